use crate::error::{Error, Result};
use crate::graph::{check_pair, GridFunction};
use crate::model::DiscreteState;

/// Tolerance on unit total weight.
pub const UNIT_WEIGHT_TOL: f64 = 1e-10;

/// Finite sum of weighted Dirac masses in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    dim: usize,
    locations: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    /// Atoms at `locations` (flat, `dim` coordinates each) with positive
    /// `weights`.
    pub fn new(dim: usize, locations: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || weights.is_empty() || locations.len() != dim * weights.len() {
            return Err(Error::contract(format!(
                "{} coordinates for {} atoms in dimension {dim}",
                locations.len(),
                weights.len()
            )));
        }
        if let Some(v) = locations.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite atom location {v}")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::contract(format!("atom weight {w} is not positive")));
        }
        Ok(AtomicMeasure {
            dim,
            locations,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.locations[i * self.dim..(i + 1) * self.dim]
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn require_unit(self) -> Result<Self> {
        let total = self.total();
        if (total - 1.0).abs() > UNIT_WEIGHT_TOL {
            return Err(Error::contract(format!(
                "measure has total weight {total}, expected 1"
            )));
        }
        Ok(self)
    }
}

/// `mu_N = (1/P) sum_j m_j delta_{x_j}`.
pub fn empirical_measure(state: &DiscreteState) -> Result<AtomicMeasure> {
    let p = state.len() as f64;
    AtomicMeasure::new(
        state.dim(),
        state.positions().to_vec(),
        state.masses().iter().map(|m| m / p).collect(),
    )?
    .require_unit()
}

/// `mu = int m(s) delta_{x(s)} ds` for step functions: one atom per cell.
pub fn continuum_measure(x: &GridFunction, m: &GridFunction) -> Result<AtomicMeasure> {
    check_pair(x, m)?;
    let h = x.cell_measure();
    AtomicMeasure::new(
        x.dim(),
        x.values().to_vec(),
        m.values().iter().map(|v| v * h).collect(),
    )?
    .require_unit()
}
