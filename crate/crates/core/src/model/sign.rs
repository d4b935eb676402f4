/// Odd, bounded map driving mass exchange; zero at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignMap {
    /// `x / |x|`, i.e. the sign function when `dim == 1`.
    Projection { dim: usize },
    /// `x / sqrt(|x|^2 + width^2)`, a Lipschitz regularization of the projection.
    Smoothed { dim: usize, width: f64 },
}

impl SignMap {
    pub fn projection(dim: usize) -> Self {
        SignMap::Projection { dim }
    }

    pub fn dim(&self) -> usize {
        match *self {
            SignMap::Projection { dim } | SignMap::Smoothed { dim, .. } => dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SignMap::Projection { .. } => "projection",
            SignMap::Smoothed { .. } => "smoothed",
        }
    }

    /// Sup bound `S_inf`.
    pub fn sup_bound(&self) -> f64 {
        1.0
    }

    pub fn eval(&self, v: &[f64]) -> Vec<f64> {
        match *self {
            SignMap::Projection { .. } if v.len() == 1 => vec![signum0(v[0])],
            _ => {
                let r2: f64 = v.iter().map(|c| c * c).sum();
                let f = self.factor(r2);
                v.iter().map(|c| f * c).collect()
            }
        }
    }

    /// Radial scale such that `s(v) = factor(|v|^2) v`; 0 at the origin.
    #[inline]
    pub(crate) fn factor(&self, r2: f64) -> f64 {
        if r2 == 0.0 {
            return 0.0;
        }
        match *self {
            SignMap::Projection { .. } => 1.0 / r2.sqrt(),
            SignMap::Smoothed { width, .. } => 1.0 / (r2 + width * width).sqrt(),
        }
    }

    /// `<w, s(delta)>` without materializing `s(delta)`.
    #[inline]
    pub(crate) fn dot(&self, w: &[f64], delta: &[f64]) -> f64 {
        if let (SignMap::Projection { .. }, 1) = (self, delta.len()) {
            return w[0] * signum0(delta[0]);
        }
        let mut r2 = 0.0;
        let mut wd = 0.0;
        for (a, b) in w.iter().zip(delta) {
            r2 += b * b;
            wd += a * b;
        }
        self.factor(r2) * wd
    }
}

#[inline]
pub(crate) fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
