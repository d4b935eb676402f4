//! Kernels, sign maps, model constants, particle states and the discrete RHS.

mod kernel;
mod params;
mod rhs;
mod sign;
mod state;

pub use kernel::{InfluenceKernel, KernelKind};
pub use params::ModelParams;
pub(crate) use rhs::{bruteforce_one, mass_rates_into, velocities_into};
pub use rhs::{eval_influence, eval_sign, rhs_masses, rhs_masses_bruteforce, rhs_positions};
pub use sign::SignMap;
pub use state::{exact_root, DiscreteState, MEAN_MASS_TOL};
