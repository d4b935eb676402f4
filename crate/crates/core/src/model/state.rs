use crate::error::{Error, Result};

/// Tolerance on `|mean(m) - 1|` accepted when constructing a state.
pub const MEAN_MASS_TOL: f64 = 1e-8;

/// Positions and masses of `P = N^d` particles at one instant.
///
/// Positions are stored flat, particle-major: particle `i` occupies
/// `positions[i * dim..(i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    time: f64,
    dim: usize,
    side: usize,
    positions: Vec<f64>,
    masses: Vec<f64>,
}

/// Returns `n` with `n^dim == count`, if any.
pub fn exact_root(count: usize, dim: usize) -> Option<usize> {
    if dim == 0 || count == 0 {
        return None;
    }
    let guess = (count as f64).powf(1.0 / dim as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&n| n.checked_pow(dim as u32) == Some(count))
}

impl DiscreteState {
    /// Builds a state at `t = 0`, checking every invariant.
    pub fn new(dim: usize, positions: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        Self::at_time(0.0, dim, positions, masses)
    }

    pub fn at_time(time: f64, dim: usize, positions: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        let state = Self::from_parts(time, dim, positions, masses)?;
        let mean = state.mean_mass();
        if (mean - 1.0).abs() > MEAN_MASS_TOL {
            return Err(Error::contract(format!("mean mass is {mean}, expected 1")));
        }
        Ok(state)
    }

    /// Structural checks only; the mean-mass normalization is not enforced.
    pub(crate) fn from_parts(
        time: f64,
        dim: usize,
        positions: Vec<f64>,
        masses: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("dimension must be at least 1"));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::contract(format!("invalid time {time}")));
        }
        let count = masses.len();
        if positions.len() != count * dim {
            return Err(Error::contract(format!(
                "{} position components for {count} particles in dimension {dim}",
                positions.len()
            )));
        }
        let side = exact_root(count, dim).ok_or_else(|| {
            Error::contract(format!(
                "particle count {count} is not a perfect {dim}-th power"
            ))
        })?;
        if let Some(c) = positions.iter().find(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite position component {c}")));
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m > 0.0))
        {
            return Err(Error::contract(format!(
                "mass {i} is {m}; masses must be positive"
            )));
        }
        Ok(DiscreteState {
            time,
            dim,
            side,
            positions,
            masses,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N`, with `P = N^d`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() / self.len() as f64
    }

    pub fn max_abs_position(&self) -> f64 {
        self.positions
            .chunks_exact(self.dim)
            .map(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub(crate) fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.positions, self.masses)
    }
}
