//! Weighted empirical and continuum measures and their Wasserstein-1
//! distance.

mod measure;
mod wasserstein;

pub use measure::{continuum_measure, empirical_measure, AtomicMeasure, UNIT_WEIGHT_TOL};
pub use wasserstein::{w1_1d, w1_discrete, MASS_MATCH_TOL, MAX_TRANSPORT_ATOMS};
