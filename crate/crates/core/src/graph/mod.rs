//! Continuum graph-limit equation on uniform grids over the labeling cube.

mod direct;
mod grid;
mod picard;

pub(crate) use direct::check_initial_positions;
pub use direct::{eval_psi, grid_rhs, psi_all, solve_direct};
pub(crate) use grid::check_pair;
pub use grid::{
    grids_to_state, state_to_grids, ContinuumFrame, ContinuumTrajectory, GridFunction,
    UNIT_MASS_TOL,
};
pub use picard::{
    picard_decoupled_m, picard_decoupled_x, solve_coupled_picard, CoupledOutput, PicardConfig,
    PicardOutput, TimeQuadrature, WindowReport, WindowRule,
};
