//! Time integration of the particle system and invariant monitoring.

mod integrator;
mod monitor;

pub(crate) use integrator::integrate;
pub use integrator::{min_pairwise_distance, step, HaltDiagnostic, IntegratorConfig, Scheme};
pub use monitor::{
    separation_ratio, simulate, InvariantLog, InvariantRecord, InvariantTolerances,
    SimulationOutput, Trajectory,
};
