use super::AtomicMeasure;
use crate::error::{Error, Result};

/// Largest total atom count accepted by [`w1_discrete`].
pub const MAX_TRANSPORT_ATOMS: usize = 10_000;

/// Tolerance on the mass mismatch of the two measures.
pub const MASS_MATCH_TOL: f64 = 1e-10;

/// Weights of `nu` rescaled to the total of `mu`.
fn matched_weights(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<Vec<f64>> {
    if mu.dim() != nu.dim() {
        return Err(Error::contract(format!(
            "measures live in dimensions {} and {}",
            mu.dim(),
            nu.dim()
        )));
    }
    let (a, b) = (mu.total(), nu.total());
    if (a - b).abs() > MASS_MATCH_TOL * a.max(b) {
        return Err(Error::contract(format!(
            "measures carry different masses {a} and {b}"
        )));
    }
    Ok(nu.weights().iter().map(|w| w * (a / b)).collect())
}

/// Exact `W_1` on the real line: the integral of `|F_mu - F_nu|`.
pub fn w1_1d(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<f64> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::contract("w1_1d needs one-dimensional measures"));
    }
    let nu_w = matched_weights(mu, nu)?;
    let mut atoms: Vec<(f64, f64)> = mu
        .locations()
        .iter()
        .zip(mu.weights())
        .map(|(x, w)| (*x, *w))
        .chain(nu.locations().iter().zip(&nu_w).map(|(x, w)| (*x, -*w)))
        .collect();
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut cdf = 0.0;
    let mut total = 0.0;
    for pair in atoms.windows(2) {
        cdf += pair[0].1;
        total += cdf.abs() * (pair[1].0 - pair[0].0);
    }
    Ok(total)
}

/// Exact `W_1` with Euclidean ground cost, solved as an uncapacitated
/// transportation problem by the primal network simplex method.
pub fn w1_discrete(mu: &AtomicMeasure, nu: &AtomicMeasure) -> Result<f64> {
    let nu_w = matched_weights(mu, nu)?;
    let atoms = mu.len() + nu.len();
    if atoms > MAX_TRANSPORT_ATOMS {
        return Err(Error::Capacity(format!(
            "{atoms} atoms exceed the transport limit of {MAX_TRANSPORT_ATOMS}"
        )));
    }
    let mut supply: Vec<f64> = mu.weights().to_vec();
    supply.extend(nu_w.iter().map(|w| -w));
    let problem = Transport {
        dim: mu.dim(),
        sources: mu.locations(),
        sinks: nu.locations(),
        n1: mu.len(),
        n2: nu.len(),
    };
    NetworkSimplex::new(&problem, &supply).solve(&problem)
}

struct Transport<'a> {
    dim: usize,
    sources: &'a [f64],
    sinks: &'a [f64],
    n1: usize,
    n2: usize,
}

impl Transport<'_> {
    fn real_arcs(&self) -> usize {
        self.n1 * self.n2
    }

    fn endpoints(&self, arc: usize) -> (usize, usize) {
        (arc / self.n2, self.n1 + arc % self.n2)
    }

    fn cost(&self, arc: usize) -> f64 {
        let (i, j) = (arc / self.n2, arc % self.n2);
        let d = self.dim;
        let (p, q) = (
            &self.sources[i * d..(i + 1) * d],
            &self.sinks[j * d..(j + 1) * d],
        );
        if d == 1 {
            (p[0] - q[0]).abs()
        } else {
            p.iter()
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        }
    }

    fn diameter(&self) -> f64 {
        let d = self.dim;
        let mut span = 0.0;
        for k in 0..d {
            let coords = self
                .sources
                .iter()
                .skip(k)
                .step_by(d)
                .chain(self.sinks.iter().skip(k).step_by(d));
            let (lo, hi) = coords.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            });
            span += (hi - lo) * (hi - lo);
        }
        span.sqrt()
    }
}

/// Spanning-tree state over the `n1 + n2` atoms plus an artificial root.
/// Flows are stored on the tree arc joining each node to its parent; every
/// non-tree arc carries zero flow, so arcs never need to be materialized.
struct NetworkSimplex {
    root: usize,
    parent: Vec<usize>,
    /// Arc joining a node to its parent (artificial arcs are numbered after
    /// the real ones).
    pred: Vec<usize>,
    /// Whether `pred` is oriented from the node towards its parent.
    up: Vec<bool>,
    flow: Vec<f64>,
    pi: Vec<f64>,
    depth: Vec<usize>,
    children: Vec<Vec<usize>>,
    eps: f64,
}

impl NetworkSimplex {
    fn new(problem: &Transport, supply: &[f64]) -> Self {
        let n = supply.len();
        let root = n;
        let max_cost = problem.diameter();
        let art_cost = (max_cost + 1.0) * (n as f64 + 1.0);
        let mut s = NetworkSimplex {
            root,
            parent: vec![root; n + 1],
            pred: (0..=n).map(|u| problem.real_arcs() + u).collect(),
            up: vec![true; n + 1],
            flow: vec![0.0; n + 1],
            pi: vec![0.0; n + 1],
            depth: vec![1; n + 1],
            children: vec![Vec::new(); n + 1],
            eps: 1e-14 * art_cost,
        };
        s.depth[root] = 0;
        s.children[root] = (0..n).collect();
        for (u, &b) in supply.iter().enumerate() {
            if b >= 0.0 {
                s.up[u] = true;
                s.flow[u] = b;
                s.pi[u] = 0.0;
            } else {
                s.up[u] = false;
                s.flow[u] = -b;
                s.pi[u] = art_cost;
            }
        }
        s
    }

    fn reduced_cost(&self, problem: &Transport, arc: usize) -> f64 {
        let (u, v) = problem.endpoints(arc);
        problem.cost(arc) + self.pi[u] - self.pi[v]
    }

    /// Block-search pricing: scans blocks of arcs cyclically and returns the
    /// most negative reduced cost of the first block containing one.
    fn find_entering(&self, problem: &Transport, next: &mut usize, block: usize) -> Option<usize> {
        let m = problem.real_arcs();
        let mut best = None;
        let mut best_rc = -self.eps;
        let mut scanned_in_block = 0;
        for _ in 0..m {
            let arc = *next;
            *next = if *next + 1 == m { 0 } else { *next + 1 };
            let rc = self.reduced_cost(problem, arc);
            if rc < best_rc {
                best_rc = rc;
                best = Some(arc);
            }
            scanned_in_block += 1;
            if scanned_in_block == block {
                if best.is_some() {
                    return best;
                }
                scanned_in_block = 0;
            }
        }
        best
    }

    fn join(&self, mut u: usize, mut v: usize) -> usize {
        while u != v {
            if self.depth[u] >= self.depth[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        u
    }

    fn pivot(&mut self, problem: &Transport, entering: usize) {
        let (first, second) = problem.endpoints(entering);
        let join = self.join(first, second);
        // Flow travels join -> first, first -> second along the entering arc,
        // then second -> join. Only arcs traversed backwards can block.
        let mut delta = f64::INFINITY;
        let mut out = None;
        let mut u = first;
        while u != join {
            if self.up[u] && self.flow[u] < delta {
                delta = self.flow[u];
                out = Some((u, true));
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if !self.up[u] && self.flow[u] <= delta {
                delta = self.flow[u];
                out = Some((u, false));
            }
            u = self.parent[u];
        }
        let (u_out, on_first) = out.expect("nonnegative costs admit no unbounded cycle");
        let mut u = first;
        while u != join {
            if self.up[u] {
                self.flow[u] -= delta;
            } else {
                self.flow[u] += delta;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if self.up[u] {
                self.flow[u] += delta;
            } else {
                self.flow[u] -= delta;
            }
            u = self.parent[u];
        }
        let (u_in, v_in) = if on_first {
            (first, second)
        } else {
            (second, first)
        };
        self.reroot(problem, entering, delta, u_in, v_in, u_out);
    }

    /// Detaches the subtree below `u_out`, re-roots it at `u_in` and hangs it
    /// from `v_in` through the entering arc.
    fn reroot(
        &mut self,
        problem: &Transport,
        entering: usize,
        delta: f64,
        u_in: usize,
        v_in: usize,
        u_out: usize,
    ) {
        let mut path = vec![u_in];
        while *path.last().unwrap() != u_out {
            path.push(self.parent[*path.last().unwrap()]);
        }
        let old_parent: Vec<usize> = path.iter().map(|&w| self.parent[w]).collect();
        let old_pred: Vec<usize> = path.iter().map(|&w| self.pred[w]).collect();
        let old_up: Vec<bool> = path.iter().map(|&w| self.up[w]).collect();
        let old_flow: Vec<f64> = path.iter().map(|&w| self.flow[w]).collect();
        for (k, &w) in path.iter().enumerate() {
            let siblings = &mut self.children[old_parent[k]];
            let pos = siblings
                .iter()
                .position(|&c| c == w)
                .expect("child listed under its parent");
            siblings.remove(pos);
            if k == 0 {
                self.parent[w] = v_in;
                self.pred[w] = entering;
                self.up[w] = problem.endpoints(entering).0 == w;
                self.flow[w] = delta;
            } else {
                self.parent[w] = path[k - 1];
                self.pred[w] = old_pred[k - 1];
                self.up[w] = !old_up[k - 1];
                self.flow[w] = old_flow[k - 1];
            }
            let p = self.parent[w];
            self.children[p].push(w);
        }
        let c = problem.cost(entering);
        let target = if self.up[u_in] {
            self.pi[v_in] - c
        } else {
            self.pi[v_in] + c
        };
        let shift = target - self.pi[u_in];
        let mut stack = vec![u_in];
        while let Some(w) = stack.pop() {
            self.pi[w] += shift;
            self.depth[w] = self.depth[self.parent[w]] + 1;
            stack.extend(self.children[w].iter().copied());
        }
    }

    fn solve(mut self, problem: &Transport) -> Result<f64> {
        let m = problem.real_arcs();
        let block = ((m as f64).sqrt().ceil() as usize).max(10).min(m);
        let mut next = 0;
        let limit = 50 * (m + self.parent.len());
        let mut pivots = 0;
        while let Some(arc) = self.find_entering(problem, &mut next, block) {
            self.pivot(problem, arc);
            pivots += 1;
            if pivots > limit {
                return Err(Error::Solver(format!(
                    "network simplex exceeded {limit} pivots"
                )));
            }
        }
        let mut cost = 0.0;
        for u in 0..self.root {
            let arc = self.pred[u];
            if arc < m {
                cost += self.flow[u] * problem.cost(arc);
            } else if self.flow[u] > 1e-9 {
                return Err(Error::Solver(format!(
                    "artificial flow {:e} left at atom {u}: transport infeasible",
                    self.flow[u]
                )));
            }
        }
        Ok(cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn measure(dim: usize, atoms: &[(&[f64], f64)]) -> AtomicMeasure {
        AtomicMeasure::new(
            dim,
            atoms.iter().flat_map(|a| a.0.iter().copied()).collect(),
            atoms.iter().map(|a| a.1).collect(),
        )
        .unwrap()
    }

    #[test]
    fn hand_examples_1d() {
        let d0 = measure(1, &[(&[0.0], 1.0)]);
        let d1 = measure(1, &[(&[1.0], 1.0)]);
        assert_eq!(w1_1d(&d0, &d0).unwrap(), 0.0);
        assert_eq!(w1_1d(&d0, &d1).unwrap(), 1.0);
        assert_eq!(w1_discrete(&d0, &d1).unwrap(), 1.0);
        let split = measure(1, &[(&[0.0], 0.5), (&[2.0], 0.5)]);
        let mid = measure(1, &[(&[1.0], 1.0)]);
        assert_eq!(w1_1d(&split, &mid).unwrap(), 1.0);
        assert_eq!(w1_discrete(&split, &mid).unwrap(), 1.0);
    }

    #[test]
    fn hand_examples_2d() {
        let diag = measure(2, &[(&[0.0, 0.0], 0.5), (&[1.0, 1.0], 0.5)]);
        let anti = measure(2, &[(&[0.0, 1.0], 0.5), (&[1.0, 0.0], 0.5)]);
        assert_eq!(w1_discrete(&diag, &anti).unwrap(), 1.0);
        assert_eq!(w1_discrete(&diag, &diag).unwrap(), 0.0);
        let shifted = measure(2, &[(&[0.6, 0.8], 0.5), (&[1.6, 1.8], 0.5)]);
        assert!((w1_discrete(&diag, &shifted).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mass_mismatch_and_capacity() {
        let a = measure(1, &[(&[0.0], 1.0)]);
        let b = measure(1, &[(&[0.0], 0.5)]);
        assert!(matches!(w1_1d(&a, &b), Err(Error::Contract(_))));
        assert!(matches!(w1_discrete(&a, &b), Err(Error::Contract(_))));
        let big = AtomicMeasure::new(
            1,
            (0..6000).map(f64::from).collect(),
            vec![1.0 / 6000.0; 6000],
        )
        .unwrap();
        assert!(matches!(w1_discrete(&big, &big), Err(Error::Capacity(_))));
        let plane = measure(2, &[(&[0.0, 0.0], 1.0)]);
        assert!(w1_1d(&plane, &plane).is_err());
        assert!(w1_discrete(&a, &plane).is_err());
    }

    fn unit_measure(dim: usize) -> impl Strategy<Value = AtomicMeasure> {
        (1usize..12).prop_flat_map(move |n| {
            (
                prop::collection::vec(-3.0..3.0f64, n * dim),
                prop::collection::vec(0.05..1.0f64, n),
            )
                .prop_map(move |(x, w)| {
                    let total: f64 = w.iter().sum();
                    AtomicMeasure::new(dim, x, w.iter().map(|v| v / total).collect()).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn simplex_matches_cdf_formula(mu in unit_measure(1), nu in unit_measure(1)) {
            let exact = w1_1d(&mu, &nu).unwrap();
            let flow = w1_discrete(&mu, &nu).unwrap();
            prop_assert!((exact - flow).abs() < 1e-9, "{} vs {}", exact, flow);
        }

        #[test]
        fn symmetric_and_triangle(a in unit_measure(2), b in unit_measure(2), c in unit_measure(2)) {
            let ab = w1_discrete(&a, &b).unwrap();
            let ba = w1_discrete(&b, &a).unwrap();
            let bc = w1_discrete(&b, &c).unwrap();
            let ac = w1_discrete(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(w1_discrete(&a, &a).unwrap().abs() < 1e-9);
        }
    }
}
