use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structural constants of a model instance.
///
/// `sign_lip` is the one-sided Lipschitz constant of the sign map away from
/// the origin when `dim == 1`; for `dim > 1` it carries the local-L¹ bound
/// of the sign map's gradient instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    /// Lipschitz constant `L` of the influence kernel.
    pub lip_a: f64,
    /// Sup bound `S_inf` on the sign map.
    pub sign_bound: f64,
    pub sign_lip: f64,
    /// Initial masses lie in `[1/M, M]`.
    pub mass_bound: f64,
    /// Initial positions satisfy `|x| <= X`.
    pub pos_bound: f64,
    /// Final time `T`.
    pub horizon: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::contract("dimension must be at least 1"));
        }
        let named = [
            ("lip_a", self.lip_a),
            ("sign_bound", self.sign_bound),
            ("sign_lip", self.sign_lip),
            ("mass_bound", self.mass_bound),
            ("pos_bound", self.pos_bound),
            ("horizon", self.horizon),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::contract(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if self.mass_bound <= 1.0 {
            return Err(Error::contract(format!(
                "mass_bound must exceed 1, got {}",
                self.mass_bound
            )));
        }
        Ok(())
    }

    /// `X e^{2LT}`: the uniform-in-time bound on opinions.
    pub fn opinion_bound(&self) -> f64 {
        self.pos_bound * (2.0 * self.lip_a * self.horizon).exp()
    }

    /// Log-rate of the weight envelope with the explicit `L * S_inf` factor,
    /// `2 L S_inf X e^{2LT}`.
    pub fn envelope_rate(&self) -> f64 {
        2.0 * self.lip_a * self.sign_bound * self.opinion_bound()
    }

    /// Log-rate as literally printed for the discrete weight bound,
    /// `2 X e^{2LT}` (no `L S_inf` factor). Reported alongside the conservative one.
    pub fn envelope_rate_literal(&self) -> f64 {
        2.0 * self.opinion_bound()
    }
}
