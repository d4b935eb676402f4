use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mass_rates_into, velocities_into, DiscreteState, InfluenceKernel, SignMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Rk4Fixed,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    /// Record one frame every `record_every` steps.
    pub record_every: usize,
    /// Minimal pairwise distance tolerated before the run is halted.
    pub collision_floor: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::Rk4Fixed,
            dt: 1e-3,
            record_every: 1,
            collision_floor: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        IntegratorConfig {
            dt,
            ..Default::default()
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::contract(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.dt > horizon {
            return Err(Error::contract(format!(
                "dt = {} exceeds horizon {horizon}",
                self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::contract("record_every must be at least 1"));
        }
        if !(self.collision_floor >= 0.0) {
            return Err(Error::contract("collision_floor must be non-negative"));
        }
        Ok(())
    }

    /// Number of steps covering `[0, horizon]` and the step actually used,
    /// `horizon / steps <= dt`.
    pub fn time_grid(&self, horizon: f64) -> (usize, f64) {
        let steps = ((horizon / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, horizon / steps as f64)
    }
}

/// Evaluates `(xdot, mdot)` into the provided buffers.
fn derivatives(
    dim: usize,
    x: &[f64],
    m: &[f64],
    kernel: &InfluenceKernel,
    sign: &SignMap,
    xdot: &mut [f64],
    mdot: &mut [f64],
) {
    velocities_into(dim, x, m, kernel, xdot);
    mass_rates_into(dim, x, m, xdot, sign, mdot);
}

struct Workspace {
    k: [(Vec<f64>, Vec<f64>); 4],
    tmp_x: Vec<f64>,
    tmp_m: Vec<f64>,
}

impl Workspace {
    fn new(nx: usize, nm: usize) -> Self {
        let pair = || (vec![0.0; nx], vec![0.0; nm]);
        Workspace {
            k: [pair(), pair(), pair(), pair()],
            tmp_x: vec![0.0; nx],
            tmp_m: vec![0.0; nm],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn advance(
    dim: usize,
    x: &mut [f64],
    m: &mut [f64],
    dt: f64,
    scheme: Scheme,
    kernel: &InfluenceKernel,
    sign: &SignMap,
    ws: &mut Workspace,
) {
    let Workspace { k, tmp_x, tmp_m } = ws;
    match scheme {
        Scheme::Euler => {
            let (kx, km) = &mut k[0];
            derivatives(dim, x, m, kernel, sign, kx, km);
            axpy_in_place(x, dt, kx);
            axpy_in_place(m, dt, km);
        }
        Scheme::Rk4Fixed => {
            let [k1, k2, k3, k4] = k;
            derivatives(dim, x, m, kernel, sign, &mut k1.0, &mut k1.1);
            axpy_into(tmp_x, x, 0.5 * dt, &k1.0);
            axpy_into(tmp_m, m, 0.5 * dt, &k1.1);
            derivatives(dim, tmp_x, tmp_m, kernel, sign, &mut k2.0, &mut k2.1);
            axpy_into(tmp_x, x, 0.5 * dt, &k2.0);
            axpy_into(tmp_m, m, 0.5 * dt, &k2.1);
            derivatives(dim, tmp_x, tmp_m, kernel, sign, &mut k3.0, &mut k3.1);
            axpy_into(tmp_x, x, dt, &k3.0);
            axpy_into(tmp_m, m, dt, &k3.1);
            derivatives(dim, tmp_x, tmp_m, kernel, sign, &mut k4.0, &mut k4.1);
            combine(x, dt, &k1.0, &k2.0, &k3.0, &k4.0);
            combine(m, dt, &k1.1, &k2.1, &k3.1, &k4.1);
        }
    }
}

fn axpy_in_place(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

fn axpy_into(out: &mut [f64], y: &[f64], a: f64, x: &[f64]) {
    out.iter_mut()
        .zip(y.iter().zip(x))
        .for_each(|(o, (y, x))| *o = y + a * x);
}

fn combine(y: &mut [f64], dt: f64, k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]) {
    let h = dt / 6.0;
    for i in 0..y.len() {
        y[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn check_masses(m: &[f64], time: f64) -> Result<()> {
    match m.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((index, mass)) => Err(Error::Collapse {
            index,
            time,
            mass: *mass,
        }),
        None => Ok(()),
    }
}

/// Advances `state` by one step of `cfg.dt`.
pub fn step(
    state: &DiscreteState,
    cfg: &IntegratorConfig,
    kernel: &InfluenceKernel,
    sign: &SignMap,
) -> Result<DiscreteState> {
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(Error::contract(format!("dt must be > 0, got {}", cfg.dt)));
    }
    check_sign(state, sign)?;
    let dim = state.dim();
    let mut x = state.positions().to_vec();
    let mut m = state.masses().to_vec();
    let mut ws = Workspace::new(x.len(), m.len());
    advance(
        dim, &mut x, &mut m, cfg.dt, cfg.scheme, kernel, sign, &mut ws,
    );
    let time = state.time() + cfg.dt;
    check_masses(&m, time)?;
    DiscreteState::from_parts(time, dim, x, m)
}

fn check_sign(state: &DiscreteState, sign: &SignMap) -> Result<()> {
    if sign.dim() != state.dim() {
        return Err(Error::contract(format!(
            "sign map dimension {} does not match state dimension {}",
            sign.dim(),
            state.dim()
        )));
    }
    Ok(())
}

/// Smallest pairwise distance and the pair attaining it.
pub fn min_pairwise_distance(dim: usize, x: &[f64]) -> Option<(f64, usize, usize)> {
    let count = x.len() / dim;
    if count < 2 {
        return None;
    }
    if dim == 1 {
        let mut order: Vec<usize> = (0..count).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        return order
            .windows(2)
            .map(|w| ((x[w[1]] - x[w[0]]).abs(), w[0].min(w[1]), w[0].max(w[1])))
            .min_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    }
    (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let xi = &x[i * dim..(i + 1) * dim];
            ((i + 1)..count)
                .map(|j| {
                    let xj = &x[j * dim..(j + 1) * dim];
                    let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2.sqrt(), i, j)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))))
}

/// Why a run stopped before its horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HaltDiagnostic {
    pub time: f64,
    pub min_distance: f64,
    pub pair: (usize, usize),
}

/// Fixed-step time marching shared by the particle and grid solvers.
///
/// `observe` is called with the step index and state at `t = 0` and after every
/// step; returning `Break` stops the run.
pub(crate) fn integrate<F>(
    initial: &DiscreteState,
    cfg: &IntegratorConfig,
    horizon: f64,
    kernel: &InfluenceKernel,
    sign: &SignMap,
    mut observe: F,
) -> Result<Option<HaltDiagnostic>>
where
    F: FnMut(usize, &DiscreteState) -> Result<ControlFlow<()>>,
{
    cfg.validate(horizon)?;
    check_sign(initial, sign)?;
    let (steps, dt) = cfg.time_grid(horizon);
    let dim = initial.dim();
    let mut state = initial.clone().with_time(0.0);
    if observe(0, &state)?.is_break() {
        return Ok(None);
    }
    let (mut x, mut m) = state.clone().into_parts();
    let mut ws = Workspace::new(x.len(), m.len());
    for n in 1..=steps {
        advance(dim, &mut x, &mut m, dt, cfg.scheme, kernel, sign, &mut ws);
        let time = if n == steps { horizon } else { n as f64 * dt };
        check_masses(&m, time)?;
        state = DiscreteState::from_parts(time, dim, x.clone(), m.clone())?;
        if let Some((dist, i, j)) = min_pairwise_distance(dim, &x) {
            if dist < cfg.collision_floor {
                return Ok(Some(HaltDiagnostic {
                    time,
                    min_distance: dist,
                    pair: (i, j),
                }));
            }
        }
        if observe(n, &state)?.is_break() {
            break;
        }
    }
    Ok(None)
}
