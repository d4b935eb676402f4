//! Labeling of the unit cube, projection of initial data onto particles,
//! Riemann-sum embeddings and the graph-limit convergence functionals.

mod labeling;
mod norms;
mod projection;
mod report;

pub use labeling::CubeLabeling;
pub use norms::{block_average, gn_diagnostic, grid_distance, xi_zeta, NormKind};
pub use projection::{project_grid, project_initial, riemann_embed, QUADRATURE_TOL};
pub use report::{ConvergenceReport, ConvergenceRow, ConvergenceSummary, LevelSummary};
