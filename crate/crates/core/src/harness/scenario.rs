use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embedding::{project_grid, project_initial};
use crate::error::{Error, Result};
use crate::graph::GridFunction;
use crate::model::{DiscreteState, InfluenceKernel, ModelParams, SignMap};
use crate::sim::{IntegratorConfig, InvariantTolerances};

/// Names of the built-in scenarios.
pub const REGISTRY: [&str; 6] = [
    "pair-symmetric",
    "pair-asymmetric",
    "singleton",
    "canonical-1d",
    "canonical-2d",
    "stress-cubic",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    Linear,
    Saturating,
}

impl KernelChoice {
    pub fn kernel(self) -> InfluenceKernel {
        match self {
            KernelChoice::Linear => InfluenceKernel::Linear,
            KernelChoice::Saturating => InfluenceKernel::Saturating,
        }
    }
}

/// Initial data families. Continuum families define `(x0, m0)` on `[0,1]^d`;
/// the others fix the particles directly.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum InitialFamily {
    /// Two particles.
    Pair {
        positions: [f64; 2],
        masses: [f64; 2],
    },
    Singleton {
        position: f64,
    },
    /// `x0(s) = s`.
    Ramp {
        mass_amplitude: f64,
    },
    /// `x0(s) = atan(slope (s - 1/2))`.
    Arctan {
        slope: f64,
        mass_amplitude: f64,
    },
    /// `x0(s) = A s + epsilon g(s)` with `g_k(s) = sin(2 pi s_{k+1}) / (2 pi)`
    /// (indices cyclic); `A` row-major.
    Affine {
        matrix: Vec<f64>,
        epsilon: f64,
        mass_amplitude: f64,
    },
    /// Sorted uniform positions in `[-1, 1]` and masses in
    /// `[1 - spread, 1 + spread]` renormalized to mean 1, drawn from the seed.
    Random {
        mass_spread: f64,
    },
}

impl InitialFamily {
    pub fn is_continuum(&self) -> bool {
        matches!(
            self,
            InitialFamily::Ramp { .. }
                | InitialFamily::Arctan { .. }
                | InitialFamily::Affine { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitialFamily::Pair { .. } => "pair",
            InitialFamily::Singleton { .. } => "singleton",
            InitialFamily::Ramp { .. } => "ramp",
            InitialFamily::Arctan { .. } => "arctan",
            InitialFamily::Affine { .. } => "affine",
            InitialFamily::Random { .. } => "random",
        }
    }
}

/// `1 + a prod_k sin(2 pi s_k)`: unit integral for every `a`, bounded below
/// by `1 - |a|`.
fn wave_mass(a: f64, s: &[f64]) -> f64 {
    1.0 + a * s.iter().map(|c| (TAU * c).sin()).product::<f64>()
}

/// Fully resolved study description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub dim: usize,
    pub kernel: KernelChoice,
    pub initial: InitialFamily,
    pub horizon: f64,
    pub integrator: IntegratorConfig,
    /// Refinement levels `N` (particle counts `N^d`).
    pub levels: Vec<usize>,
    pub reference_resolution: usize,
    /// Spacing of the times at which convergence functionals are sampled.
    pub sample_interval: f64,
    pub tolerances: InvariantTolerances,
    /// Bound on `solve_direct` vs Picard differences.
    pub cross_tolerance: f64,
    pub picard: bool,
    pub w1: bool,
    pub bench_sizes: Vec<usize>,
    pub bench_repeats: usize,
    pub seed: u64,
}

impl Scenario {
    /// Built-in scenario by registry name.
    pub fn builtin(name: &str) -> Option<Scenario> {
        let base = Scenario {
            name: name.to_string(),
            dim: 1,
            kernel: KernelChoice::Linear,
            initial: InitialFamily::Pair {
                positions: [-1.0, 1.0],
                masses: [1.0, 1.0],
            },
            horizon: 1.0,
            integrator: IntegratorConfig {
                record_every: 10,
                ..IntegratorConfig::rk4(1e-3)
            },
            levels: vec![2],
            reference_resolution: 2,
            sample_interval: 0.05,
            tolerances: InvariantTolerances::default(),
            cross_tolerance: 1e-6,
            picard: false,
            w1: true,
            bench_sizes: vec![128, 256, 512],
            bench_repeats: 5,
            seed: 0,
        };
        let s = match name {
            "pair-symmetric" => base,
            "pair-asymmetric" => Scenario {
                initial: InitialFamily::Pair {
                    positions: [-1.0, 1.0],
                    masses: [1.5, 0.5],
                },
                ..base
            },
            "singleton" => Scenario {
                initial: InitialFamily::Singleton { position: 0.5 },
                levels: vec![1],
                reference_resolution: 1,
                ..base
            },
            "canonical-1d" => Scenario {
                kernel: KernelChoice::Saturating,
                initial: InitialFamily::Ramp {
                    mass_amplitude: 0.5,
                },
                levels: vec![8, 16, 32, 64, 128],
                reference_resolution: 512,
                picard: true,
                ..base
            },
            "canonical-2d" => Scenario {
                dim: 2,
                kernel: KernelChoice::Saturating,
                initial: InitialFamily::Affine {
                    matrix: vec![1.0, 0.3, 0.2, 1.0],
                    epsilon: 0.1,
                    mass_amplitude: 0.5,
                },
                integrator: IntegratorConfig {
                    record_every: 5,
                    ..IntegratorConfig::rk4(1e-2)
                },
                levels: vec![4, 8, 16],
                reference_resolution: 64,
                ..base
            },
            "stress-cubic" => Scenario {
                kernel: KernelChoice::Saturating,
                initial: InitialFamily::Random { mass_spread: 0.5 },
                levels: vec![64],
                reference_resolution: 64,
                w1: false,
                ..base
            },
            _ => return None,
        };
        Some(s)
    }

    pub fn kernel(&self) -> InfluenceKernel {
        self.kernel.kernel()
    }

    pub fn sign(&self) -> SignMap {
        SignMap::projection(self.dim)
    }

    /// Checks internal consistency; messages name the offending key.
    /// The first key present in the configuration is the one reported.
    pub fn validate(&self) -> std::result::Result<(), (&'static [&'static str], String)> {
        let fail = |keys: &'static [&'static str], msg: String| Err((keys, msg));
        if self.dim == 0 {
            return fail(&["dim"], "dimension must be at least 1".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return fail(
                &["horizon"],
                format!("horizon {} must be positive", self.horizon),
            );
        }
        if let Err(e) = self.integrator.validate(self.horizon) {
            return fail(
                &["dt", "record_every", "collision_floor", "horizon"],
                e.to_string(),
            );
        }
        if !(self.sample_interval > 0.0) {
            return fail(
                &["sample_interval"],
                "sample interval must be positive".into(),
            );
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            return fail(
                &["levels"],
                "refinement levels must be non-empty and positive".into(),
            );
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return fail(
                &["levels"],
                "refinement levels must be strictly increasing".into(),
            );
        }
        if self.initial.is_continuum()
            && self
                .levels
                .iter()
                .any(|n| !self.reference_resolution.is_multiple_of(*n))
        {
            return fail(
                &["reference_resolution", "levels"],
                format!(
                    "reference resolution {} is not a multiple of every level",
                    self.reference_resolution
                ),
            );
        }
        let t = &self.tolerances;
        let tols = [
            t.mass,
            t.envelope,
            t.position,
            t.separation,
            self.cross_tolerance,
        ];
        if tols.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return fail(
                &[
                    "mass_tol",
                    "envelope_tol",
                    "position_tol",
                    "separation_tol",
                    "cross_tol",
                ],
                "tolerances must be finite and non-negative".into(),
            );
        }
        if self.bench_sizes.contains(&0) || self.bench_repeats == 0 {
            return fail(
                &["bench_sizes"],
                "benchmark sizes and repeats must be positive".into(),
            );
        }
        match &self.initial {
            InitialFamily::Pair { positions, masses } => {
                if self.dim != 1 {
                    return fail(&["initial"], "pair scenarios are one-dimensional".into());
                }
                if positions[0] == positions[1] {
                    return fail(&["pair_positions"], "pair positions must differ".into());
                }
                if !(masses[0] > 0.0 && masses[1] > 0.0)
                    || (masses[0] + masses[1] - 2.0).abs() > 1e-12
                {
                    return fail(
                        &["pair_masses"],
                        "pair masses must be positive with mean 1".into(),
                    );
                }
            }
            InitialFamily::Singleton { .. } => {
                if self.dim != 1 {
                    return fail(
                        &["initial"],
                        "singleton scenarios are one-dimensional".into(),
                    );
                }
            }
            InitialFamily::Ramp { mass_amplitude }
            | InitialFamily::Arctan { mass_amplitude, .. } => {
                if self.dim != 1 {
                    return fail(
                        &["initial"],
                        format!("{} data are one-dimensional", self.initial.name()),
                    );
                }
                if !(mass_amplitude.abs() < 1.0) {
                    return fail(
                        &["mass_amplitude"],
                        "mass amplitude must lie in (-1, 1)".into(),
                    );
                }
                if let InitialFamily::Arctan { slope, .. } = self.initial {
                    if !(slope > 0.0) {
                        return fail(&["arctan_slope"], "slope must be positive".into());
                    }
                }
            }
            InitialFamily::Affine {
                matrix,
                epsilon,
                mass_amplitude,
            } => {
                if matrix.len() != self.dim * self.dim {
                    return fail(
                        &["affine"],
                        format!("matrix needs {} entries", self.dim * self.dim),
                    );
                }
                let sigma = smallest_singular_value(self.dim, matrix);
                if !(*epsilon >= 0.0 && *epsilon < 0.5 * sigma) {
                    return fail(
                        &["epsilon"],
                        format!(
                            "epsilon {epsilon} must lie in [0, sigma_min(A)/2) = [0, {})",
                            0.5 * sigma
                        ),
                    );
                }
                if !(mass_amplitude.abs() < 1.0) {
                    return fail(
                        &["mass_amplitude"],
                        "mass amplitude must lie in (-1, 1)".into(),
                    );
                }
            }
            InitialFamily::Random { mass_spread } => {
                if self.dim != 1 {
                    return fail(&["initial"], "random data are one-dimensional".into());
                }
                if !(*mass_spread >= 0.0 && *mass_spread < 1.0) {
                    return fail(&["random_mass_spread"], "spread must lie in [0, 1)".into());
                }
            }
        }
        Ok(())
    }

    /// `(x0, m0)` evaluated at `s` for continuum families.
    #[allow(clippy::type_complexity)]
    fn continuum_data(
        &self,
    ) -> Option<(
        impl Fn(&[f64]) -> Vec<f64> + Sync + '_,
        impl Fn(&[f64]) -> f64 + Sync + '_,
    )> {
        let amp = match &self.initial {
            InitialFamily::Ramp { mass_amplitude }
            | InitialFamily::Arctan { mass_amplitude, .. }
            | InitialFamily::Affine { mass_amplitude, .. } => *mass_amplitude,
            _ => return None,
        };
        let dim = self.dim;
        let x0 = move |s: &[f64]| -> Vec<f64> {
            match &self.initial {
                InitialFamily::Ramp { .. } => vec![s[0]],
                InitialFamily::Arctan { slope, .. } => vec![(slope * (s[0] - 0.5)).atan()],
                InitialFamily::Affine {
                    matrix, epsilon, ..
                } => (0..dim)
                    .map(|k| {
                        let lin: f64 = (0..dim).map(|j| matrix[k * dim + j] * s[j]).sum();
                        lin + epsilon * (TAU * s[(k + 1) % dim]).sin() / TAU
                    })
                    .collect(),
                _ => unreachable!("continuum family"),
            }
        };
        Some((x0, move |s: &[f64]| wave_mass(amp, s)))
    }

    /// Particle initial state at refinement level `n` (ignored by fixed
    /// families, which have a single admissible particle count).
    pub fn initial_state(&self, n: usize) -> Result<DiscreteState> {
        match &self.initial {
            InitialFamily::Pair { positions, masses } => {
                DiscreteState::new(1, positions.to_vec(), masses.to_vec())
            }
            InitialFamily::Singleton { position } => {
                DiscreteState::new(1, vec![*position], vec![1.0])
            }
            InitialFamily::Random { mass_spread } => random_state(n, *mass_spread, self.seed),
            _ => {
                let (x0, m0) = self.continuum_data().expect("continuum family");
                project_initial(self.dim, n, x0, m0)
            }
        }
    }

    /// Cell-averaged initial grids at resolution `k` for continuum families.
    pub fn initial_grids(&self, k: usize) -> Result<(GridFunction, GridFunction)> {
        let (x0, m0) = self.continuum_data().ok_or_else(|| {
            Error::precondition(format!(
                "initial family '{}' has no continuum form",
                self.initial.name()
            ))
        })?;
        let x = project_grid(self.dim, k, self.dim, x0)?;
        let m = project_grid(self.dim, k, 1, |s| vec![m0(s)])?;
        Ok((x, m))
    }

    /// Structural constants for a given initial state.
    pub fn params_for(&self, state: &DiscreteState) -> ModelParams {
        let (lo, hi) = state
            .masses()
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), m| {
                (lo.min(*m), hi.max(*m))
            });
        let xmax = state.max_abs_position();
        ModelParams {
            dim: self.dim,
            lip_a: self.kernel().lipschitz(),
            sign_bound: self.sign().sup_bound(),
            sign_lip: 1.0,
            mass_bound: hi.max(1.0 / lo).max(1.0 + 1e-12),
            pos_bound: if xmax > 0.0 { xmax } else { 1.0 },
            horizon: self.horizon,
        }
    }

    /// Integrator configuration recording every `sample_interval`.
    pub fn sampling_integrator(&self) -> IntegratorConfig {
        let (_, dt) = self.integrator.time_grid(self.horizon);
        let every = ((self.sample_interval / dt).round() as usize).max(1);
        IntegratorConfig {
            record_every: every,
            ..self.integrator
        }
    }
}

/// `sigma_min(A)` for a `dim x dim` row-major matrix.
pub fn smallest_singular_value(dim: usize, matrix: &[f64]) -> f64 {
    let a = DMatrix::from_row_slice(dim, dim, matrix);
    a.singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Random one-dimensional state of `p` particles drawn from a ChaCha8 stream
/// keyed by `seed` and `p`.
pub fn random_state(p: usize, mass_spread: f64, seed: u64) -> Result<DiscreteState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(p as u64);
    let mut x: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    x.sort_by(f64::total_cmp);
    let mut m: Vec<f64> = (0..p)
        .map(|_| 1.0 + mass_spread * rng.gen_range(-1.0..1.0))
        .collect();
    let mean = m.iter().sum::<f64>() / p as f64;
    m.iter_mut().for_each(|v| *v /= mean);
    DiscreteState::at_time(0.0, 1, x, m)
}
