use std::io::Write;
use std::ops::ControlFlow;

use serde::Serialize;

use super::integrator::{integrate, min_pairwise_distance, HaltDiagnostic, IntegratorConfig};
use crate::error::{Error, Result};
use crate::model::{DiscreteState, InfluenceKernel, ModelParams, SignMap};

/// Recorded frames of a particle run. Frame 0 is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frames: Vec<DiscreteState>,
}

impl Trajectory {
    pub fn new(frames: Vec<DiscreteState>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::contract("empty trajectory"))?;
        if frames
            .iter()
            .any(|f| f.dim() != first.dim() || f.len() != first.len())
        {
            return Err(Error::contract("trajectory frames disagree in shape"));
        }
        Ok(Trajectory { frames })
    }

    pub fn frames(&self) -> &[DiscreteState] {
        &self.frames
    }

    pub fn initial(&self) -> &DiscreteState {
        &self.frames[0]
    }

    pub fn last(&self) -> &DiscreteState {
        self.frames.last().expect("non-empty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(DiscreteState::time).collect()
    }

    /// CSV with header `t,i,x_1..x_d,m`, one row per particle and frame.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.initial().dim();
        let coords: Vec<String> = (1..=dim).map(|k| format!("x_{k}")).collect();
        writeln!(out, "t,i,{},m", coords.join(","))?;
        for frame in &self.frames {
            for i in 0..frame.len() {
                write!(out, "{:e},{i}", frame.time())?;
                for c in frame.position(i) {
                    write!(out, ",{c:e}")?;
                }
                writeln!(out, ",{:e}", frame.masses()[i])?;
            }
        }
        Ok(())
    }
}

/// `min_{i != j} |x_i(t) - x_j(t)|^2 e^{2Lt} / |x_i^0 - x_j^0|^2` for frame `index`.
///
/// A value `>= 1` certifies the separation bound with exponent `2L`.
pub fn separation_ratio(traj: &Trajectory, index: usize, lip: f64) -> Result<f64> {
    let frame = traj
        .frames
        .get(index)
        .ok_or_else(|| Error::contract(format!("frame {index} out of range")))?;
    Ok(pair_statistics(traj.initial(), frame, lip)?.sep_ratio)
}

struct PairStats {
    sep_ratio: f64,
    /// `max over pairs of max(|d|/|d0|, |d0|/|d|)`.
    distortion: f64,
}

fn pair_statistics(initial: &DiscreteState, frame: &DiscreteState, lip: f64) -> Result<PairStats> {
    let dim = initial.dim();
    let x0 = initial.positions();
    let x = frame.positions();
    let count = initial.len();
    let growth = (2.0 * lip * frame.time()).exp();
    let mut sep_ratio = f64::INFINITY;
    let mut distortion: f64 = 1.0;
    for i in 0..count {
        for j in (i + 1)..count {
            let mut d0 = 0.0;
            let mut d = 0.0;
            for k in 0..dim {
                let a = x0[i * dim + k] - x0[j * dim + k];
                let b = x[i * dim + k] - x[j * dim + k];
                d0 += a * a;
                d += b * b;
            }
            if d0 == 0.0 {
                return Err(Error::precondition(format!(
                    "particles {i} and {j} start at the same position"
                )));
            }
            sep_ratio = sep_ratio.min(d * growth / d0);
            let r = (d / d0).sqrt();
            distortion = distortion.max(r.max(1.0 / r));
        }
    }
    if count < 2 {
        sep_ratio = 1.0;
    }
    Ok(PairStats {
        sep_ratio,
        distortion,
    })
}

/// Invariant values at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantRecord {
    pub t: f64,
    /// `|mean(m) - 1|`.
    pub mass_dev: f64,
    /// `min_i min(m_i / lower_i, upper_i / m_i)` for the conservative envelope; `>= 1` inside.
    pub min_env_ratio: f64,
    /// Same ratio for the envelope rate as literally stated (without `L S_inf`).
    pub min_env_ratio_literal: f64,
    /// `max_i |x_i| / (X e^{2LT})`.
    pub max_pos_ratio: f64,
    pub sep_ratio: f64,
}

/// Acceptance thresholds applied to an [`InvariantLog`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantTolerances {
    pub mass: f64,
    /// Relative slack on the weight envelope.
    pub envelope: f64,
    /// Absolute slack on the opinion bound.
    pub position: f64,
    pub separation: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        InvariantTolerances {
            mass: 1e-10,
            envelope: 1e-9,
            position: 1e-8,
            separation: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantLog {
    pub records: Vec<InvariantRecord>,
    /// `X e^{2LT}`.
    pub opinion_bound: f64,
    /// `2 L S_inf X e^{2LT}`.
    pub envelope_rate: f64,
    /// `2 X e^{2LT}`.
    pub envelope_rate_literal: f64,
    /// Empirical separation constant `C`: largest distortion of any pairwise
    /// distance relative to its initial value.
    pub empirical_separation_constant: f64,
}

impl InvariantLog {
    pub fn violations(&self, tol: &InvariantTolerances) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.records {
            if !(r.mass_dev <= tol.mass) {
                out.push(format!("t={}: mean mass deviates by {:e}", r.t, r.mass_dev));
            }
            if !(r.min_env_ratio >= 1.0 - tol.envelope) {
                out.push(format!(
                    "t={}: weight envelope ratio {}",
                    r.t, r.min_env_ratio
                ));
            }
            if !(r.max_pos_ratio * self.opinion_bound <= self.opinion_bound + tol.position) {
                out.push(format!(
                    "t={}: opinion bound ratio {}",
                    r.t, r.max_pos_ratio
                ));
            }
            if !(r.sep_ratio >= 1.0 - tol.separation) {
                out.push(format!("t={}: separation ratio {}", r.t, r.sep_ratio));
            }
        }
        out
    }

    pub fn min_sep_ratio(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.sep_ratio)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_mass_dev(&self) -> f64 {
        self.records.iter().map(|r| r.mass_dev).fold(0.0, f64::max)
    }

    /// CSV with header `t,mass_dev,min_env_ratio,max_pos_ratio,sep_ratio`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,mass_dev,min_env_ratio,max_pos_ratio,sep_ratio")?;
        for r in &self.records {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                r.t, r.mass_dev, r.min_env_ratio, r.max_pos_ratio, r.sep_ratio
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub trajectory: Trajectory,
    pub log: InvariantLog,
    /// Set when the collision floor stopped the run early.
    pub halt: Option<HaltDiagnostic>,
}

/// Integrates the particle system over `[0, params.horizon]`, recording
/// frames every `cfg.record_every` steps (and the final step) together with
/// the invariant monitors.
pub fn simulate(
    initial: &DiscreteState,
    cfg: &IntegratorConfig,
    kernel: &InfluenceKernel,
    sign: &SignMap,
    params: &ModelParams,
) -> Result<SimulationOutput> {
    params.validate()?;
    if params.dim != initial.dim() {
        return Err(Error::contract(format!(
            "parameters are for dimension {}, state has dimension {}",
            params.dim,
            initial.dim()
        )));
    }
    if let Some((dist, i, j)) = min_pairwise_distance(initial.dim(), initial.positions()) {
        if dist == 0.0 {
            return Err(Error::precondition(format!(
                "particles {i} and {j} share their initial position"
            )));
        }
    }
    let xmax = initial.max_abs_position();
    if xmax > params.pos_bound * (1.0 + 1e-12) {
        return Err(Error::precondition(format!(
            "initial opinions reach {xmax}, above the declared bound {}",
            params.pos_bound
        )));
    }

    let initial = initial.clone().with_time(0.0);
    let lip = params.lip_a;
    let rate = params.envelope_rate();
    let rate_literal = params.envelope_rate_literal();
    let opinion_bound = params.opinion_bound();
    let (steps, _) = cfg.time_grid(params.horizon);

    let mut frames = Vec::new();
    let mut records = Vec::new();
    let mut distortion: f64 = 1.0;
    let m0 = initial.masses().to_vec();

    let halt = integrate(&initial, cfg, params.horizon, kernel, sign, |n, state| {
        if n % cfg.record_every == 0 || n == steps {
            let t = state.time();
            let stats = pair_statistics(&initial, state, lip)?;
            distortion = distortion.max(stats.distortion);
            let env = |r: f64| {
                let g = (r * t).exp();
                state
                    .masses()
                    .iter()
                    .zip(&m0)
                    .map(|(m, m0)| (m * g / m0).min(m0 * g / m))
                    .fold(f64::INFINITY, f64::min)
            };
            records.push(InvariantRecord {
                t,
                mass_dev: (state.mean_mass() - 1.0).abs(),
                min_env_ratio: env(rate),
                min_env_ratio_literal: env(rate_literal),
                max_pos_ratio: state.max_abs_position() / opinion_bound,
                sep_ratio: stats.sep_ratio,
            });
            frames.push(state.clone());
        }
        Ok(ControlFlow::Continue(()))
    })?;

    Ok(SimulationOutput {
        trajectory: Trajectory::new(frames)?,
        log: InvariantLog {
            records,
            opinion_bound,
            envelope_rate: rate,
            envelope_rate_literal: rate_literal,
            empirical_separation_constant: distortion,
        },
        halt,
    })
}
