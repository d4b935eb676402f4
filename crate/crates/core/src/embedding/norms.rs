use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{psi_all, GridFunction};
use crate::model::{InfluenceKernel, SignMap};

/// Norm used by the convergence functionals: squared `L^2` on the unit
/// interval, plain `L^1` on higher-dimensional cubes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    L2Squared,
    L1,
}

impl NormKind {
    pub fn for_dim(dim: usize) -> Self {
        if dim == 1 {
            NormKind::L2Squared
        } else {
            NormKind::L1
        }
    }

    /// Norm of a cellwise field given as `components` values per cell, each
    /// cell of measure `1 / cells`.
    fn of_cells(self, diff: &[f64], components: usize) -> f64 {
        let cells = diff.len() / components;
        let total: f64 = diff
            .chunks_exact(components)
            .map(|c| {
                let sq: f64 = c.iter().map(|v| v * v).sum();
                match self {
                    NormKind::L2Squared => sq,
                    NormKind::L1 => sq.sqrt(),
                }
            })
            .sum();
        total / cells as f64
    }
}

/// Norm of `a - b` for step functions on nested grids, evaluated exactly on
/// the finer grid.
pub fn grid_distance(a: &GridFunction, b: &GridFunction, norm: NormKind) -> Result<f64> {
    if a.dim() != b.dim() || a.components() != b.components() {
        return Err(Error::contract("grids differ in dimension or components"));
    }
    let (coarse, fine) = if a.resolution() <= b.resolution() {
        (a, b)
    } else {
        (b, a)
    };
    if fine.resolution() % coarse.resolution() != 0 {
        return Err(Error::contract(format!(
            "resolution {} does not refine {}",
            fine.resolution(),
            coarse.resolution()
        )));
    }
    let lifted = coarse.refine(fine.resolution() / coarse.resolution())?;
    let diff: Vec<f64> = lifted
        .values()
        .iter()
        .zip(fine.values())
        .map(|(p, q)| p - q)
        .collect();
    Ok(norm.of_cells(&diff, fine.components()))
}

/// `(xi_N, zeta_N)` between an embedded pair at resolution `N` and a
/// reference pair at a multiple `K` of `N`.
pub fn xi_zeta(
    x_embed: &GridFunction,
    m_embed: &GridFunction,
    x_ref: &GridFunction,
    m_ref: &GridFunction,
) -> Result<(f64, f64)> {
    if !x_ref.resolution().is_multiple_of(x_embed.resolution()) {
        return Err(Error::contract(format!(
            "reference resolution {} is not a multiple of {}",
            x_ref.resolution(),
            x_embed.resolution()
        )));
    }
    let norm = NormKind::for_dim(x_embed.dim());
    Ok((
        grid_distance(x_embed, x_ref, norm)?,
        grid_distance(m_embed, m_ref, norm)?,
    ))
}

/// Cellwise averages of `g` over blocks of `(K/N)^d` cells, returned on the
/// `N`-grid.
pub fn block_average(g: &GridFunction, side: usize) -> Result<GridFunction> {
    let k = g.resolution();
    if side == 0 || !k.is_multiple_of(side) {
        return Err(Error::contract(format!(
            "resolution {k} is not a multiple of {side}"
        )));
    }
    let fine = g.labeling();
    let coarse = crate::embedding::CubeLabeling::new(g.dim(), side)?;
    let c = g.components();
    let factor = k / side;
    let mut sums = vec![0.0; coarse.len() * c];
    for cell in 0..fine.len() {
        let multi: Vec<usize> = fine
            .unlabel(cell)?
            .into_iter()
            .map(|i| i / factor)
            .collect();
        let target = coarse.label(&multi)?;
        for (s, v) in sums[target * c..(target + 1) * c]
            .iter_mut()
            .zip(g.cell(cell))
        {
            *s += v;
        }
    }
    let block = factor.pow(g.dim() as u32) as f64;
    sums.iter_mut().for_each(|s| *s /= block);
    GridFunction::new(g.dim(), side, c, sums)
}

/// `||g_N||` with `g_N(s) = N^d int_{cell_N(s)} Psi - Psi(s)` for a reference
/// pair at resolution `K`, `N | K`.
pub fn gn_diagnostic(
    x_ref: &GridFunction,
    m_ref: &GridFunction,
    side: usize,
    kernel: &InfluenceKernel,
    sign: &SignMap,
) -> Result<f64> {
    let psi = GridFunction::new(
        x_ref.dim(),
        x_ref.resolution(),
        1,
        psi_all(x_ref, m_ref, kernel, sign)?,
    )?;
    let averaged = block_average(&psi, side)?;
    grid_distance(&averaged, &psi, NormKind::for_dim(x_ref.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::project_grid;

    #[test]
    fn identical_and_offset() {
        let x = GridFunction::from_midpoints(1, 8, 1, |s| vec![s[0] * s[0]]).unwrap();
        let m = GridFunction::new(1, 8, 1, vec![1.0; 8]).unwrap();
        assert_eq!(xi_zeta(&x, &m, &x, &m).unwrap(), (0.0, 0.0));
        let shifted =
            GridFunction::new(1, 8, 1, x.values().iter().map(|v| v + 0.1).collect()).unwrap();
        let (xi, zeta) = xi_zeta(&shifted, &m, &x, &m).unwrap();
        assert!((xi - 0.01).abs() < 1e-15 && zeta == 0.0);
    }

    #[test]
    fn midpoint_projection_of_identity() {
        // int_0^1 (s - c(s))^2 ds over two cells of width 1/2 is 1/48; on a
        // midpoint reference of K cells the step error removes 1/(12 K^2).
        let coarse = project_grid(1, 2, 1, |s| vec![s[0]]).unwrap();
        let one = GridFunction::new(1, 2, 1, vec![1.0, 1.0]).unwrap();
        for k in [256usize, 4096] {
            let fine = GridFunction::from_midpoints(1, k, 1, |s| vec![s[0]]).unwrap();
            let fm = GridFunction::new(1, k, 1, vec![1.0; k]).unwrap();
            let (xi, zeta) = xi_zeta(&coarse, &one, &fine, &fm).unwrap();
            let expected = 1.0 / 48.0 - 1.0 / (12.0 * (k * k) as f64);
            assert!((xi - expected).abs() < 1e-13, "{xi} vs {expected}");
            assert_eq!(zeta, 0.0);
        }
    }

    #[test]
    fn l1_in_two_dimensions() {
        let a = GridFunction::new(2, 1, 2, vec![0.0, 0.0]).unwrap();
        let b = GridFunction::new(2, 2, 2, vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((grid_distance(&a, &b, NormKind::L1).unwrap() - 1.25).abs() < 1e-15);
        assert!(xi_zeta(&b, &b, &a, &a).is_err());
    }

    #[test]
    fn gn_vanishes_on_coarse_data() {
        let x = GridFunction::from_midpoints(1, 4, 1, |s| vec![s[0]])
            .unwrap()
            .refine(4)
            .unwrap();
        let m = GridFunction::from_midpoints(1, 4, 1, |s| vec![1.0 + 0.3 * (s[0] - 0.5)])
            .unwrap()
            .refine(4)
            .unwrap();
        let sign = SignMap::projection(1);
        let kernel = InfluenceKernel::Saturating;
        // Psi is constant on each coarse block when the data are.
        assert_eq!(gn_diagnostic(&x, &m, 16, &kernel, &sign).unwrap(), 0.0);
        assert!(gn_diagnostic(&x, &m, 4, &kernel, &sign).unwrap() < 1e-30);
        let smooth_x =
            GridFunction::from_midpoints(1, 64, 1, |s| vec![s[0] + 0.2 * s[0] * s[0]]).unwrap();
        let smooth_m =
            GridFunction::from_midpoints(1, 64, 1, |s| vec![1.0 + 0.4 * (6.0 * s[0]).sin()])
                .unwrap();
        let g: Vec<f64> = [4, 8, 16, 32]
            .iter()
            .map(|&n| gn_diagnostic(&smooth_x, &smooth_m, n, &kernel, &sign).unwrap())
            .collect();
        assert!(g.windows(2).all(|w| w[1] < w[0]), "{g:?}");
    }
}
