use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Saturating,
    CustomRadial,
}

/// Radial influence kernel `a(x) = a(|x|) x`.
#[derive(Clone)]
pub enum InfluenceKernel {
    /// `a(x) = x`, Lipschitz constant 1.
    Linear,
    /// `a(x) = x / (1 + |x|^2)`, Lipschitz constant 1.
    Saturating,
    /// `a(x) = profile(|x|) x` with a caller-declared Lipschitz constant.
    Radial {
        name: String,
        lipschitz: f64,
        profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for InfluenceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfluenceKernel::Linear => f.write_str("Linear"),
            InfluenceKernel::Saturating => f.write_str("Saturating"),
            InfluenceKernel::Radial {
                name, lipschitz, ..
            } => f
                .debug_struct("Radial")
                .field("name", name)
                .field("lipschitz", lipschitz)
                .finish(),
        }
    }
}

impl InfluenceKernel {
    pub fn radial(
        name: impl Into<String>,
        lipschitz: f64,
        profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        InfluenceKernel::Radial {
            name: name.into(),
            lipschitz,
            profile: Arc::new(profile),
        }
    }

    /// The trivial kernel `a = 0`; positions never move.
    pub fn zero() -> Self {
        Self::radial("zero", 0.0, |_| 0.0)
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            InfluenceKernel::Linear => KernelKind::Linear,
            InfluenceKernel::Saturating => KernelKind::Saturating,
            InfluenceKernel::Radial { .. } => KernelKind::CustomRadial,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            InfluenceKernel::Linear => "linear",
            InfluenceKernel::Saturating => "saturating",
            InfluenceKernel::Radial { name, .. } => name,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            InfluenceKernel::Linear | InfluenceKernel::Saturating => 1.0,
            InfluenceKernel::Radial { lipschitz, .. } => *lipschitz,
        }
    }

    /// Scalar radial factor `a(r)` as a function of `r^2`.
    #[inline]
    pub(crate) fn factor(&self, r2: f64) -> f64 {
        match self {
            InfluenceKernel::Linear => 1.0,
            InfluenceKernel::Saturating => 1.0 / (1.0 + r2),
            InfluenceKernel::Radial { profile, .. } => profile(r2.sqrt()),
        }
    }

    /// Evaluates `a(v)`.
    pub fn eval(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("non-finite kernel argument {v:?}")));
        }
        let mut out = vec![0.0; v.len()];
        self.eval_into(v, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn eval_into(&self, v: &[f64], out: &mut [f64]) {
        let r2: f64 = v.iter().map(|c| c * c).sum();
        if r2 == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let f = self.factor(r2);
        for (o, c) in out.iter_mut().zip(v) {
            *o = f * c;
        }
    }

    /// Randomized check of `a(0) = 0` and `|a(u) - a(v)| <= L |u - v|` on the
    /// ball of the given radius.
    pub fn verify(&self, dim: usize, radius: f64, samples: usize, seed: u64) -> Result<()> {
        let origin = self.eval(&vec![0.0; dim])?;
        if origin.iter().any(|c| *c != 0.0) {
            return Err(Error::Domain(format!(
                "kernel {} does not vanish at 0",
                self.name()
            )));
        }
        let lip = self.lipschitz();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect();
            let au = self.eval(&u)?;
            let av = self.eval(&v)?;
            let lhs = norm_diff(&au, &av);
            let rhs = lip * norm_diff(&u, &v);
            if lhs > rhs * (1.0 + 1e-9) + 1e-14 {
                return Err(Error::Domain(format!(
                    "kernel {} violates Lipschitz bound {lip} at u = {u:?}, v = {v:?}",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_values() {
        let k = InfluenceKernel::Linear;
        assert_eq!(k.eval(&[0.0]).unwrap(), vec![0.0]);
        assert_eq!(k.eval(&[2.0]).unwrap(), vec![2.0]);
        assert_eq!(k.kind(), KernelKind::Linear);
    }

    #[test]
    fn saturating_hand_value() {
        // r^2 = 25, a(r) = 1/26
        let v = InfluenceKernel::Saturating.eval(&[3.0, 4.0]).unwrap();
        assert!((v[0] - 3.0 / 26.0).abs() < 1e-15);
        assert!((v[1] - 4.0 / 26.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            InfluenceKernel::Linear.eval(&[f64::NAN]),
            Err(Error::Domain(_))
        ));
        assert!(InfluenceKernel::Saturating
            .eval(&[1.0, f64::INFINITY])
            .is_err());
    }

    #[test]
    fn library_kernels_pass_lipschitz_check() {
        for k in [
            InfluenceKernel::Linear,
            InfluenceKernel::Saturating,
            InfluenceKernel::zero(),
        ] {
            for dim in 1..=3 {
                k.verify(dim, 5.0, 2000, 11).unwrap();
            }
        }
    }

    #[test]
    fn understated_lipschitz_is_caught() {
        let k = InfluenceKernel::radial("steep", 0.5, |_| 1.0);
        assert!(k.verify(1, 3.0, 200, 3).is_err());
    }
}
