//! Right-hand sides of the particle system.
//!
//! The slice-level routines here are shared by the particle integrator and the
//! grid solver, so both produce bitwise-identical derivatives for identical
//! inputs. Every per-particle reduction runs over `j` in ascending order, which
//! keeps results independent of the rayon thread count.

use rayon::prelude::*;

use super::{DiscreteState, InfluenceKernel, SignMap};
use crate::error::{Error, Result};

const MIN_PAR_LEN: usize = 8;

/// `a(v)`; rejects non-finite input.
pub fn eval_influence(kernel: &InfluenceKernel, v: &[f64]) -> Result<Vec<f64>> {
    kernel.eval(v)
}

/// `s(v)`: sign in one dimension, unit projection otherwise, 0 at the origin.
pub fn eval_sign(sign: &SignMap, v: &[f64]) -> Vec<f64> {
    sign.eval(v)
}

/// Opinion velocities `(1/P) sum_j m_j a(x_j - x_i)`, flat like the positions.
pub fn rhs_positions(state: &DiscreteState, kernel: &InfluenceKernel) -> Vec<f64> {
    let mut out = vec![0.0; state.positions().len()];
    velocities_into(
        state.dim(),
        state.positions(),
        state.masses(),
        kernel,
        &mut out,
    );
    out
}

/// Mass rates `(1/P) sum_j m_i m_j <(v_i + v_j)/2, s(x_i - x_j)>`, reusing the
/// velocities from [`rhs_positions`]. Costs `O(P^2)`.
pub fn rhs_masses(state: &DiscreteState, velocities: &[f64], sign: &SignMap) -> Result<Vec<f64>> {
    if velocities.len() != state.positions().len() {
        return Err(Error::contract(format!(
            "{} velocity components for {} position components",
            velocities.len(),
            state.positions().len()
        )));
    }
    check_sign_dim(state, sign)?;
    let mut out = vec![0.0; state.len()];
    mass_rates_into(
        state.dim(),
        state.positions(),
        state.masses(),
        velocities,
        sign,
        &mut out,
    );
    Ok(out)
}

/// Mass rates from the literal triple sum
/// `(1/(2P^2)) m_i sum_{j,k} m_j m_k (a(x_k - x_i) + a(x_k - x_j)) . s(x_i - x_j)`.
/// `O(P^3)`; kept as the oracle for [`rhs_masses`].
pub fn rhs_masses_bruteforce(
    state: &DiscreteState,
    kernel: &InfluenceKernel,
    sign: &SignMap,
) -> Result<Vec<f64>> {
    check_sign_dim(state, sign)?;
    let mut out = vec![0.0; state.len()];
    bruteforce_into(
        state.dim(),
        state.positions(),
        state.masses(),
        kernel,
        sign,
        &mut out,
    );
    Ok(out)
}

fn check_sign_dim(state: &DiscreteState, sign: &SignMap) -> Result<()> {
    if sign.dim() != state.dim() {
        return Err(Error::contract(format!(
            "sign map of dimension {} applied to a {}-dimensional state",
            sign.dim(),
            state.dim()
        )));
    }
    Ok(())
}

pub(crate) fn velocities_into(
    dim: usize,
    x: &[f64],
    m: &[f64],
    kernel: &InfluenceKernel,
    out: &mut [f64],
) {
    match kernel {
        InfluenceKernel::Linear => velocities_impl(dim, x, m, |_| 1.0, out),
        InfluenceKernel::Saturating => velocities_impl(dim, x, m, |r2| 1.0 / (1.0 + r2), out),
        InfluenceKernel::Radial { profile, .. } => {
            velocities_impl(dim, x, m, |r2| profile(r2.sqrt()), out)
        }
    }
}

fn velocities_impl<F>(dim: usize, x: &[f64], m: &[f64], factor: F, out: &mut [f64])
where
    F: Fn(f64) -> f64 + Sync,
{
    let count = m.len() as f64;
    if dim == 1 {
        out.par_iter_mut()
            .with_min_len(MIN_PAR_LEN)
            .enumerate()
            .for_each(|(i, o)| {
                let xi = x[i];
                let mut acc = 0.0;
                for (xj, mj) in x.iter().zip(m) {
                    let d = xj - xi;
                    acc += mj * factor(d * d) * d;
                }
                *o = acc / count;
            });
        return;
    }
    out.par_chunks_mut(dim)
        .with_min_len(MIN_PAR_LEN)
        .enumerate()
        .for_each(|(i, o)| {
            let xi = &x[i * dim..(i + 1) * dim];
            o.iter_mut().for_each(|c| *c = 0.0);
            for (xj, mj) in x.chunks_exact(dim).zip(m) {
                let r2: f64 = xj.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
                let w = mj * factor(r2);
                for ((c, a), b) in o.iter_mut().zip(xj).zip(xi) {
                    *c += w * (a - b);
                }
            }
            o.iter_mut().for_each(|c| *c /= count);
        });
}

pub(crate) fn mass_rates_into(
    dim: usize,
    x: &[f64],
    m: &[f64],
    v: &[f64],
    sign: &SignMap,
    out: &mut [f64],
) {
    let count = m.len() as f64;
    if dim == 1 {
        if let SignMap::Projection { .. } = sign {
            out.par_iter_mut()
                .with_min_len(MIN_PAR_LEN)
                .enumerate()
                .for_each(|(i, o)| {
                    let (xi, vi) = (x[i], v[i]);
                    let mut acc = 0.0;
                    for ((xj, vj), mj) in x.iter().zip(v).zip(m) {
                        let d = xi - xj;
                        if d > 0.0 {
                            acc += mj * (vi + vj);
                        } else if d < 0.0 {
                            acc -= mj * (vi + vj);
                        }
                    }
                    *o = 0.5 * m[i] * acc / count;
                });
            return;
        }
    }
    out.par_iter_mut()
        .with_min_len(MIN_PAR_LEN)
        .enumerate()
        .for_each(|(i, o)| {
            let xi = &x[i * dim..(i + 1) * dim];
            let vi = &v[i * dim..(i + 1) * dim];
            let mut w = vec![0.0; dim];
            let mut delta = vec![0.0; dim];
            let mut acc = 0.0;
            for ((xj, vj), mj) in x.chunks_exact(dim).zip(v.chunks_exact(dim)).zip(m) {
                for k in 0..dim {
                    delta[k] = xi[k] - xj[k];
                    w[k] = vi[k] + vj[k];
                }
                acc += mj * sign.dot(&w, &delta);
            }
            *o = 0.5 * m[i] * acc / count;
        });
}

pub(crate) fn bruteforce_into(
    dim: usize,
    x: &[f64],
    m: &[f64],
    kernel: &InfluenceKernel,
    sign: &SignMap,
    out: &mut [f64],
) {
    out.par_iter_mut()
        .with_min_len(1)
        .enumerate()
        .for_each(|(i, o)| *o = bruteforce_one(dim, x, m, kernel, sign, i));
}

/// Literal double sum for a single particle `i`.
pub(crate) fn bruteforce_one(
    dim: usize,
    x: &[f64],
    m: &[f64],
    kernel: &InfluenceKernel,
    sign: &SignMap,
    i: usize,
) -> f64 {
    let count = m.len() as f64;
    let xi = &x[i * dim..(i + 1) * dim];
    let mut dir = vec![0.0; dim];
    let mut d1 = vec![0.0; dim];
    let mut d2 = vec![0.0; dim];
    let mut a1 = vec![0.0; dim];
    let mut a2 = vec![0.0; dim];
    let mut acc = 0.0;
    for (xj, mj) in x.chunks_exact(dim).zip(m) {
        for k in 0..dim {
            d1[k] = xi[k] - xj[k];
        }
        sign_into(sign, &d1, &mut dir);
        for (xk, mk) in x.chunks_exact(dim).zip(m) {
            for k in 0..dim {
                d1[k] = xk[k] - xi[k];
                d2[k] = xk[k] - xj[k];
            }
            kernel.eval_into(&d1, &mut a1);
            kernel.eval_into(&d2, &mut a2);
            let dot: f64 = (0..dim).map(|k| (a1[k] + a2[k]) * dir[k]).sum();
            acc += mj * mk * dot;
        }
    }
    m[i] * acc / (2.0 * count * count)
}

fn sign_into(sign: &SignMap, v: &[f64], out: &mut [f64]) {
    if let (SignMap::Projection { .. }, 1) = (sign, v.len()) {
        out[0] = super::sign::signum0(v[0]);
        return;
    }
    let r2: f64 = v.iter().map(|c| c * c).sum();
    let f = sign.factor(r2);
    for (o, c) in out.iter_mut().zip(v) {
        *o = f * c;
    }
}
