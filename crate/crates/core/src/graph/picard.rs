use serde::{Deserialize, Serialize};

use super::direct::check_initial_positions;
use super::grid::{check_pair, ContinuumFrame, ContinuumTrajectory, GridFunction};
use crate::error::{Error, Result};
use crate::model::{mass_rates_into, velocities_into, InfluenceKernel, SignMap};

/// How the Picard window length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowRule {
    /// From the current sup-bounds; the mass window is halved whenever an
    /// iterate leaves its envelope.
    Auto,
    /// Fixed length; an envelope exit is an error.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeQuadrature {
    Trapezoid,
    LeftRectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub window: WindowRule,
    pub tolerance: f64,
    pub max_inner_iterations: usize,
    pub max_outer_iterations: usize,
    pub quadrature: TimeQuadrature,
    pub dt: f64,
    pub horizon: f64,
}

impl PicardConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        PicardConfig {
            window: WindowRule::Auto,
            tolerance: 1e-12,
            max_inner_iterations: 500,
            max_outer_iterations: 100,
            quadrature: TimeQuadrature::Trapezoid,
            dt,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::contract(format!(
                "horizon {} must be positive",
                self.horizon
            )));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::contract(format!(
                "time step {} outside (0, T]",
                self.dt
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::contract("Picard tolerance must be positive"));
        }
        if self.max_inner_iterations == 0 || self.max_outer_iterations == 0 {
            return Err(Error::contract("iteration limits must be positive"));
        }
        if let WindowRule::Fixed(w) = self.window {
            if !(w > 0.0) {
                return Err(Error::contract(format!(
                    "window length {w} must be positive"
                )));
            }
            if w < self.dt_eff() * (1.0 - 1e-9) {
                return Err(Error::contract(format!(
                    "window {w} shorter than the time step"
                )));
            }
        }
        Ok(())
    }

    /// Number of steps and uniform step covering `[0, horizon]`.
    pub fn time_grid(&self) -> (usize, f64) {
        let steps = ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, self.horizon / steps as f64)
    }

    pub fn times(&self) -> Vec<f64> {
        let (steps, dt) = self.time_grid();
        (0..=steps)
            .map(|k| {
                if k == steps {
                    self.horizon
                } else {
                    k as f64 * dt
                }
            })
            .collect()
    }

    fn dt_eff(&self) -> f64 {
        self.time_grid().1
    }
}

/// Iteration record of one time window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub start: f64,
    pub end: f64,
    pub iterations: usize,
    /// Distance between successive iterates (sup norm for positions,
    /// `sup_t` of the `L^1` norm for masses).
    pub diffs: Vec<f64>,
    /// Contraction constant guaranteed by the window choice.
    pub contraction_bound: f64,
}

impl WindowReport {
    /// Largest ratio of successive differences, ignoring differences already
    /// at round-off level.
    pub fn max_contraction(&self) -> Option<f64> {
        self.diffs
            .windows(2)
            .filter(|w| w[0] > 1e-11)
            .map(|w| w[1] / w[0])
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOutput {
    pub trajectory: ContinuumTrajectory,
    pub windows: Vec<WindowReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOutput {
    pub trajectory: ContinuumTrajectory,
    /// `u_n = sup|x_{n+1} - x_n| + sup_t ||m_{n+1} - m_n||_1`.
    pub outer_diffs: Vec<f64>,
    pub x_windows: Vec<WindowReport>,
    pub m_windows: Vec<WindowReport>,
}

enum Sweep {
    Converged {
        nodes: Vec<Vec<f64>>,
        diffs: Vec<f64>,
    },
    LeftEnvelope {
        iteration: usize,
        value: f64,
    },
}

/// Fixed-point iteration of `u(t_k) = u_0 + int_0^{t_k} F(tau, u) dtau` over
/// `nodes` time nodes with the requested quadrature.
#[allow(clippy::too_many_arguments)]
fn sweep_window<R, D, E>(
    start: &[f64],
    nodes: usize,
    dt: f64,
    cfg: &PicardConfig,
    mut rhs: R,
    distance: D,
    envelope: E,
    label: &str,
) -> Result<Sweep>
where
    R: FnMut(usize, &[f64], &mut [f64]),
    D: Fn(&[f64], &[f64]) -> f64,
    E: Fn(&[f64]) -> Option<f64>,
{
    let n = start.len();
    let mut cur = vec![start.to_vec(); nodes];
    let mut rates = vec![vec![0.0; n]; nodes];
    let mut diffs = Vec::new();
    for iteration in 1..=cfg.max_inner_iterations {
        for (k, (u, f)) in cur.iter().zip(rates.iter_mut()).enumerate() {
            rhs(k, u, f);
        }
        let mut next = Vec::with_capacity(nodes);
        next.push(start.to_vec());
        for k in 1..nodes {
            let prev: &Vec<f64> = &next[k - 1];
            let row: Vec<f64> = match cfg.quadrature {
                TimeQuadrature::Trapezoid => (0..n)
                    .map(|i| prev[i] + 0.5 * dt * (rates[k - 1][i] + rates[k][i]))
                    .collect(),
                TimeQuadrature::LeftRectangle => {
                    (0..n).map(|i| prev[i] + dt * rates[k - 1][i]).collect()
                }
            };
            next.push(row);
        }
        if let Some(value) = next.iter().find_map(|u| envelope(u)) {
            return Ok(Sweep::LeftEnvelope { iteration, value });
        }
        let diff = cur
            .iter()
            .zip(&next)
            .map(|(a, b)| distance(a, b))
            .fold(0.0, f64::max);
        diffs.push(diff);
        cur = next;
        if diff < cfg.tolerance {
            return Ok(Sweep::Converged { nodes: cur, diffs });
        }
    }
    Err(Error::Solver(format!(
        "{label}: no convergence after {} iterations (last difference {:e})",
        cfg.max_inner_iterations,
        diffs.last().copied().unwrap_or(f64::NAN)
    )))
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn check_frozen(frozen: &ContinuumTrajectory, x0: &GridFunction, cfg: &PicardConfig) -> Result<()> {
    let times = cfg.times();
    if frozen.dim() != x0.dim() || frozen.resolution() != x0.resolution() {
        return Err(Error::contract(
            "frozen trajectory and initial grid differ in shape",
        ));
    }
    if frozen.frames().len() != times.len()
        || frozen
            .frames()
            .iter()
            .zip(&times)
            .any(|(f, t)| (f.t - t).abs() > 1e-9 * cfg.horizon.max(1.0))
    {
        return Err(Error::contract(format!(
            "frozen trajectory must be sampled on the {} nodes of the Picard time grid",
            times.len()
        )));
    }
    Ok(())
}

fn window_steps(length: f64, dt: f64) -> usize {
    if length.is_finite() {
        ((length / dt) + 1e-9).floor().max(1.0) as usize
    } else {
        usize::MAX
    }
}

/// Solves `x(t,s) = x^0(s) + int_0^t int m(tau,s*) a(x(tau,s*) - x(tau,s)) ds* dtau`
/// for a frozen mass trajectory, window by window.
pub fn picard_decoupled_x(
    x0: &GridFunction,
    frozen_m: &ContinuumTrajectory,
    cfg: &PicardConfig,
    kernel: &InfluenceKernel,
) -> Result<PicardOutput> {
    cfg.validate()?;
    check_frozen(frozen_m, x0, cfg)?;
    let dim = x0.dim();
    let frames = frozen_m.frames();
    let m_sup = frames
        .iter()
        .flat_map(|f| f.m.values())
        .fold(0.0, |a: f64, v| a.max(v.abs()));
    let lip = kernel.lipschitz();
    let limit = 1.0 / (2.0 * lip * m_sup);
    let length = match cfg.window {
        WindowRule::Auto => 0.5 * limit,
        WindowRule::Fixed(w) => {
            if w >= limit {
                return Err(Error::precondition(format!(
                    "window {w} violates the contraction condition (limit {limit})"
                )));
            }
            w
        }
    };
    let (steps, dt) = cfg.time_grid();
    let times = cfg.times();
    let per_window = window_steps(length, dt);
    let mut path: Vec<Vec<f64>> = vec![x0.values().to_vec()];
    let mut windows = Vec::new();
    let mut a = 0;
    while a < steps {
        let b = a.saturating_add(per_window).min(steps);
        let label = format!("position window [{}, {}]", times[a], times[b]);
        let sweep = sweep_window(
            &path[a],
            b - a + 1,
            dt,
            cfg,
            |k, x, out| velocities_into(dim, x, frames[a + k].m.values(), kernel, out),
            sup_distance,
            |_| None,
            &label,
        )?;
        let Sweep::Converged { nodes, diffs } = sweep else {
            unreachable!("no envelope on positions")
        };
        windows.push(WindowReport {
            start: times[a],
            end: times[b],
            iterations: diffs.len(),
            diffs,
            contraction_bound: 2.0 * lip * m_sup * (times[b] - times[a]),
        });
        path.extend(nodes.into_iter().skip(1));
        a = b;
    }
    let out = path
        .into_iter()
        .zip(frames)
        .map(|(x, f)| {
            Ok(ContinuumFrame {
                t: f.t,
                x: GridFunction::new(dim, x0.resolution(), dim, x)?,
                m: f.m.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PicardOutput {
        trajectory: ContinuumTrajectory::new(out)?,
        windows,
    })
}

/// Solves `m(t,s) = m^0(s) + int_0^t Psi(s, x(tau), m(tau)) dtau` for a frozen
/// position trajectory. Each window starts from the short-time length
/// `1 / (16 L S X M^4)` with `M` read off the mass at the window start.
pub fn picard_decoupled_m(
    m0: &GridFunction,
    frozen_x: &ContinuumTrajectory,
    cfg: &PicardConfig,
    kernel: &InfluenceKernel,
    sign: &SignMap,
) -> Result<PicardOutput> {
    cfg.validate()?;
    m0.validate_mass()?;
    check_frozen(frozen_x, m0, cfg)?;
    if sign.dim() != m0.dim() {
        return Err(Error::contract("sign map and grid dimensions differ"));
    }
    let dim = m0.dim();
    let frames = frozen_x.frames();
    let x_sup = frames
        .iter()
        .flat_map(|f| f.x.values().chunks_exact(dim))
        .map(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let big_x = x_sup + 1.0;
    let lip = kernel.lipschitz();
    let s_inf = sign.sup_bound();
    let (steps, dt) = cfg.time_grid();
    let times = cfg.times();
    let mut path: Vec<Vec<f64>> = vec![m0.values().to_vec()];
    let mut windows = Vec::new();
    let mut velocity = vec![0.0; frames[0].x.values().len()];
    let mut a = 0;
    while a < steps {
        let start = path[a].clone();
        let (lo, hi) = start.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
        let big_m = hi.max(1.0 / lo);
        let (floor, ceiling) = (0.5 / big_m, 2.0 * big_m);
        let mut length = match cfg.window {
            WindowRule::Auto => 1.0 / (16.0 * lip * s_inf * big_x * big_m.powi(4)),
            WindowRule::Fixed(w) => w,
        };
        loop {
            let b = a.saturating_add(window_steps(length, dt)).min(steps);
            let label = format!("mass window [{}, {}]", times[a], times[b]);
            let sweep = sweep_window(
                &start,
                b - a + 1,
                dt,
                cfg,
                |k, m, out| {
                    let x = frames[a + k].x.values();
                    velocities_into(dim, x, m, kernel, &mut velocity);
                    mass_rates_into(dim, x, m, &velocity, sign, out);
                },
                l1_distance,
                |m| m.iter().copied().find(|v| !(*v >= floor && *v <= ceiling)),
                &label,
            )?;
            match sweep {
                Sweep::Converged { nodes, diffs } => {
                    windows.push(WindowReport {
                        start: times[a],
                        end: times[b],
                        iterations: diffs.len(),
                        diffs,
                        contraction_bound: 12.0 * lip * s_inf * (times[b] - times[a]) * x_sup,
                    });
                    path.extend(nodes.into_iter().skip(1));
                    a = b;
                    break;
                }
                Sweep::LeftEnvelope { iteration, value } => {
                    let reason = format!(
                        "iterate {iteration} reached mass {value:e} outside [{floor:e}, {ceiling:e}]"
                    );
                    if cfg.window != WindowRule::Auto || b - a == 1 {
                        return Err(Error::WindowTooLong {
                            start: times[a],
                            end: times[b],
                            reason,
                        });
                    }
                    length = 0.5 * (times[b] - times[a]);
                }
            }
        }
    }
    let out = path
        .into_iter()
        .zip(frames)
        .map(|(m, f)| {
            Ok(ContinuumFrame {
                t: f.t,
                x: f.x.clone(),
                m: GridFunction::new(dim, m0.resolution(), 1, m)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PicardOutput {
        trajectory: ContinuumTrajectory::new(out)?,
        windows,
    })
}

/// Alternates the two decoupled solvers, `x_{n+1} = X[m_n]` and
/// `m_{n+1} = M[x_{n+1}]`, starting from the constant pair `(x^0, m^0)`,
/// until `u_n` falls below the tolerance.
pub fn solve_coupled_picard(
    x0: &GridFunction,
    m0: &GridFunction,
    cfg: &PicardConfig,
    kernel: &InfluenceKernel,
    sign: &SignMap,
) -> Result<CoupledOutput> {
    cfg.validate()?;
    check_pair(x0, m0)?;
    m0.validate_mass()?;
    check_initial_positions(x0)?;
    let mut current = ContinuumTrajectory::constant(x0, m0, &cfg.times())?;
    let mut outer_diffs = Vec::new();
    for _ in 0..cfg.max_outer_iterations {
        let xs = picard_decoupled_x(x0, &current, cfg, kernel)?;
        let ms = picard_decoupled_m(m0, &xs.trajectory, cfg, kernel, sign)?;
        let u = trajectory_distance(&current, &ms.trajectory);
        outer_diffs.push(u);
        current = ms.trajectory;
        if u < cfg.tolerance {
            return Ok(CoupledOutput {
                trajectory: current,
                outer_diffs,
                x_windows: xs.windows,
                m_windows: ms.windows,
            });
        }
    }
    Err(Error::Solver(format!(
        "coupled Picard iteration did not converge in {} outer iterations (last difference {:e})",
        cfg.max_outer_iterations,
        outer_diffs.last().copied().unwrap_or(f64::NAN)
    )))
}

fn trajectory_distance(a: &ContinuumTrajectory, b: &ContinuumTrajectory) -> f64 {
    let (mut dx, mut dm) = (0.0_f64, 0.0_f64);
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        dx = dx.max(sup_distance(fa.x.values(), fb.x.values()));
        dm = dm.max(l1_distance(fa.m.values(), fb.m.values()));
    }
    dx + dm
}
