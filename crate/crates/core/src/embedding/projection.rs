use rayon::prelude::*;

use super::CubeLabeling;
use crate::error::{Error, Result};
use crate::graph::{check_initial_positions, state_to_grids, GridFunction};
use crate::model::DiscreteState;

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Relative tolerance of the cell-average quadrature.
pub const QUADRATURE_TOL: f64 = 1e-12;

/// Composite 5-point Gauss-Legendre average of `f` over the box
/// `[lo, lo + h]^d`, split into `sub^d` sub-boxes.
fn box_average<F>(f: &F, lo: &[f64], h: f64, sub: usize, components: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let dim = lo.len();
    let hs = h / sub as f64;
    let per_axis = sub * 5;
    let total = per_axis.pow(dim as u32);
    let mut acc = vec![0.0; components];
    let mut point = vec![0.0; dim];
    for flat in 0..total {
        let mut rest = flat;
        let mut weight = 1.0;
        for k in 0..dim {
            let j = rest % per_axis;
            rest /= per_axis;
            let (box_index, node) = (j / 5, j % 5);
            point[k] = lo[k] + hs * (box_index as f64 + 0.5 * (1.0 + GL_NODES[node]));
            weight *= 0.5 * GL_WEIGHTS[node];
        }
        for (a, v) in acc.iter_mut().zip(f(&point)) {
            *a += weight * v;
        }
    }
    let scale = (sub as f64).powi(dim as i32);
    acc.iter_mut().for_each(|a| *a /= scale);
    acc
}

/// Cell averages `N^d int_{Q_i} f` on the `N^d` grid. Each cell is refined
/// dyadically until two successive composite rules agree to
/// [`QUADRATURE_TOL`] relative to the value.
pub fn project_grid<F>(dim: usize, side: usize, components: usize, f: F) -> Result<GridFunction>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let labeling = CubeLabeling::new(dim, side)?;
    let h = 1.0 / side as f64;
    // Up to 4096 sub-boxes per cell.
    let max_level = 12 / dim;
    let cells: Vec<Result<Vec<f64>>> = (0..labeling.len())
        .into_par_iter()
        .map(|cell| {
            let lo = labeling.corner(cell)?;
            let mut coarse = box_average(&f, &lo, h, 1, components);
            if coarse.len() != components {
                return Err(Error::contract(
                    "function returned the wrong number of components",
                ));
            }
            let mut err = f64::INFINITY;
            for level in 1..=max_level {
                let fine = box_average(&f, &lo, h, 1 << level, components);
                err = coarse
                    .iter()
                    .zip(&fine)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let scale = fine.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
                if !err.is_finite() {
                    break;
                }
                if err <= QUADRATURE_TOL * scale {
                    return Ok(fine);
                }
                coarse = fine;
            }
            Err(Error::Quadrature { cell, error: err })
        })
        .collect();
    let values = cells.into_iter().collect::<Result<Vec<_>>>()?.concat();
    GridFunction::new(dim, side, components, values)
}

/// Particle initial data `x_i = N^d int_{Q_i} x0`, `m_i = N^d int_{Q_i} m0`
/// with `P = N^d`.
pub fn project_initial<X, M>(dim: usize, side: usize, x0: X, m0: M) -> Result<DiscreteState>
where
    X: Fn(&[f64]) -> Vec<f64> + Sync,
    M: Fn(&[f64]) -> f64 + Sync,
{
    let x = project_grid(dim, side, dim, x0)?;
    let m = project_grid(dim, side, 1, |s| vec![m0(s)])?;
    if let Some((i, v)) = m.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::precondition(format!(
            "projected mass {v} in cell {i} is not positive"
        )));
    }
    check_initial_positions(&x)?;
    DiscreteState::new(dim, x.values().to_vec(), m.values().to_vec())
}

/// Riemann-sum embedding: the step functions carrying the particle values on
/// the cells of `labeling`.
pub fn riemann_embed(
    state: &DiscreteState,
    labeling: &CubeLabeling,
) -> Result<(GridFunction, GridFunction)> {
    if labeling.dim() != state.dim() || labeling.len() != state.len() {
        return Err(Error::contract(format!(
            "{} particles in dimension {} do not fill a {}^{} labeling",
            state.len(),
            state.dim(),
            labeling.side(),
            labeling.dim()
        )));
    }
    state_to_grids(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn linear_map_averages_to_midpoints() {
        let st = project_initial(1, 4, |s| vec![s[0]], |_| 1.0).unwrap();
        for (a, b) in st.positions().iter().zip([0.125, 0.375, 0.625, 0.875]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(st.masses().iter().all(|m| (m - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sine_mass_average() {
        let st = project_initial(1, 2, |s| vec![s[0]], |s| 1.0 + 0.5 * (TAU * s[0]).sin()).unwrap();
        assert!((st.masses()[0] - (1.0 + 1.0 / PI)).abs() < 1e-13);
        assert!((st.masses()[1] - (1.0 - 1.0 / PI)).abs() < 1e-13);
        assert!((st.mean_mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_dimensional_polynomial() {
        // Average of s1 * s2^2 over [0, 1/2]^2 is (1/4) (1/12).
        let g = project_grid(2, 2, 1, |s| vec![s[0] * s[1] * s[1]]).unwrap();
        assert!((g.values()[0] - 1.0 / 48.0).abs() < 1e-15);
        assert!((g.integral()[0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn non_smooth_data_fails_quadrature() {
        let r = project_grid(1, 3, 1, |s| vec![if s[0] < 0.4 { 0.0 } else { 1.0 }]);
        assert!(matches!(r, Err(Error::Quadrature { cell: 1, .. })), "{r:?}");
    }

    #[test]
    fn embedding_round_trip() {
        let st = project_initial(1, 2, |s| vec![s[0]], |_| 1.0).unwrap();
        let l = CubeLabeling::new(1, 2).unwrap();
        let (x, m) = riemann_embed(&st, &l).unwrap();
        assert!((x.values()[0] - 0.25).abs() < 1e-15 && (x.values()[1] - 0.75).abs() < 1e-15);
        assert_eq!(x.values(), st.positions());
        assert_eq!(m.values(), st.masses());
        let st4 = project_initial(1, 4, |s| vec![s[0] * s[0]], |_| 1.0).unwrap();
        let (x4, _) = riemann_embed(&st4, &CubeLabeling::new(1, 4).unwrap()).unwrap();
        assert_eq!(x4.value_at(&[0.3]).unwrap(), st4.position(1));
        assert!(riemann_embed(&st4, &l).is_err());
    }

    #[test]
    fn decreasing_data_is_rejected() {
        let r = project_initial(1, 4, |s| vec![1.0 - s[0]], |_| 1.0);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
