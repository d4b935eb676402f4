use std::ops::ControlFlow;

use super::grid::{
    check_pair, grids_to_state, state_to_grids, ContinuumFrame, ContinuumTrajectory, GridFunction,
};
use crate::error::{Error, Result};
use crate::model::{bruteforce_one, mass_rates_into, velocities_into, InfluenceKernel, SignMap};
use crate::sim::{integrate, min_pairwise_distance, IntegratorConfig};

/// `Psi` at one cell, evaluated as the literal double sum over cells with
/// weight `K^{-2d}`. `O(K^{2d})` per cell.
pub fn eval_psi(
    cell: usize,
    x: &GridFunction,
    m: &GridFunction,
    kernel: &InfluenceKernel,
    sign: &SignMap,
) -> Result<f64> {
    check_pair(x, m)?;
    check_sign(x, sign)?;
    if cell >= x.cell_count() {
        return Err(Error::contract(format!(
            "cell {cell} outside 0..{}",
            x.cell_count()
        )));
    }
    Ok(bruteforce_one(
        x.dim(),
        x.values(),
        m.values(),
        kernel,
        sign,
        cell,
    ))
}

/// `Psi` on every cell through the factorized `O(K^{2d})` evaluation.
pub fn psi_all(
    x: &GridFunction,
    m: &GridFunction,
    kernel: &InfluenceKernel,
    sign: &SignMap,
) -> Result<Vec<f64>> {
    Ok(grid_rhs(x, m, kernel, sign)?.1.into_values())
}

/// Right-hand side of the continuum system on a step-function grid:
/// `x' = int m(s*) a(x(s*) - x(s)) ds*` and `m' = Psi`.
pub fn grid_rhs(
    x: &GridFunction,
    m: &GridFunction,
    kernel: &InfluenceKernel,
    sign: &SignMap,
) -> Result<(GridFunction, GridFunction)> {
    check_pair(x, m)?;
    check_sign(x, sign)?;
    let dim = x.dim();
    let mut xdot = vec![0.0; x.values().len()];
    let mut mdot = vec![0.0; m.values().len()];
    velocities_into(dim, x.values(), m.values(), kernel, &mut xdot);
    mass_rates_into(dim, x.values(), m.values(), &xdot, sign, &mut mdot);
    Ok((
        GridFunction::new(dim, x.resolution(), dim, xdot)?,
        GridFunction::new(dim, x.resolution(), 1, mdot)?,
    ))
}

fn check_sign(x: &GridFunction, sign: &SignMap) -> Result<()> {
    if sign.dim() != x.dim() {
        return Err(Error::contract(format!(
            "sign map of dimension {} on a {}-dimensional grid",
            sign.dim(),
            x.dim()
        )));
    }
    Ok(())
}

/// Checks that initial positions separate cells: strictly increasing in
/// `d = 1`, pairwise distinct otherwise.
pub(crate) fn check_initial_positions(x0: &GridFunction) -> Result<()> {
    if x0.dim() == 1 {
        if let Some(w) = x0.values().windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::precondition(format!(
                "initial positions not strictly increasing at cells {w}, {}",
                w + 1
            )));
        }
        return Ok(());
    }
    if let Some((d, i, j)) = min_pairwise_distance(x0.dim(), x0.values()) {
        if d == 0.0 {
            return Err(Error::precondition(format!(
                "cells {i} and {j} share an initial position"
            )));
        }
    }
    Ok(())
}

/// Marches the grid system with the particle integrator; frames are recorded
/// every `cfg.record_every` steps and at the final time.
pub fn solve_direct(
    x0: &GridFunction,
    m0: &GridFunction,
    cfg: &IntegratorConfig,
    horizon: f64,
    kernel: &InfluenceKernel,
    sign: &SignMap,
) -> Result<ContinuumTrajectory> {
    check_pair(x0, m0)?;
    check_sign(x0, sign)?;
    m0.validate_mass()?;
    check_initial_positions(x0)?;
    let initial = grids_to_state(0.0, x0, m0)?;
    let (steps, _) = cfg.time_grid(horizon);
    let mut frames = Vec::new();
    let halt = integrate(&initial, cfg, horizon, kernel, sign, |n, state| {
        if n % cfg.record_every == 0 || n == steps {
            let (x, m) = state_to_grids(state)?;
            frames.push(ContinuumFrame {
                t: state.time(),
                x,
                m,
            });
        }
        Ok(ControlFlow::Continue(()))
    })?;
    if let Some(h) = halt {
        return Err(Error::Solver(format!(
            "cells {:?} reached distance {:e} at t = {}",
            h.pair, h.min_distance, h.time
        )));
    }
    ContinuumTrajectory::new(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rhs_masses, rhs_positions, DiscreteState};

    fn pair_grids() -> (GridFunction, GridFunction) {
        (
            GridFunction::new(1, 2, 1, vec![-1.0, 1.0]).unwrap(),
            GridFunction::new(1, 2, 1, vec![1.5, 0.5]).unwrap(),
        )
    }

    #[test]
    fn constant_positions_give_zero_psi() {
        let x = GridFunction::new(1, 4, 1, vec![0.3; 4]).unwrap();
        let m = GridFunction::new(1, 4, 1, vec![0.5, 1.5, 1.2, 0.8]).unwrap();
        for c in 0..4 {
            assert_eq!(
                eval_psi(c, &x, &m, &InfluenceKernel::Linear, &SignMap::projection(1)).unwrap(),
                0.0
            );
        }
        let (xd, md) = grid_rhs(&x, &m, &InfluenceKernel::Linear, &SignMap::projection(1)).unwrap();
        assert!(xd.values().iter().chain(md.values()).all(|v| *v == 0.0));
    }

    #[test]
    fn two_cell_values() {
        let (x, m) = pair_grids();
        let s = SignMap::projection(1);
        let psi: Vec<f64> = (0..2)
            .map(|c| eval_psi(c, &x, &m, &InfluenceKernel::Linear, &s).unwrap())
            .collect();
        assert!((psi[0] - 0.1875).abs() < 1e-15 && (psi[1] + 0.1875).abs() < 1e-15);
        let (xd, md) = grid_rhs(&x, &m, &InfluenceKernel::Linear, &s).unwrap();
        assert_eq!(xd.values(), &[0.5, -1.5]);
        assert!((md.values()[0] - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn grid_rhs_is_bitwise_the_particle_rhs() {
        let x = GridFunction::from_midpoints(2, 3, 2, |s| {
            vec![s[0] + 0.2 * s[1], s[1] - 0.1 * s[0] * s[0]]
        })
        .unwrap();
        let m = GridFunction::from_midpoints(2, 3, 1, |s| vec![1.0 + 0.3 * (s[0] - 0.5)]).unwrap();
        let sign = SignMap::projection(2);
        let (xd, md) = grid_rhs(&x, &m, &InfluenceKernel::Saturating, &sign).unwrap();
        let st =
            DiscreteState::from_parts(0.0, 2, x.values().to_vec(), m.values().to_vec()).unwrap();
        let v = rhs_positions(&st, &InfluenceKernel::Saturating);
        assert_eq!(xd.values(), v.as_slice());
        assert_eq!(md.values(), rhs_masses(&st, &v, &sign).unwrap().as_slice());
    }

    #[test]
    fn psi_integrates_to_zero() {
        let x = GridFunction::from_midpoints(1, 32, 1, |s| vec![(3.0 * s[0]).atan()]).unwrap();
        let m = GridFunction::from_midpoints(1, 32, 1, |s| vec![1.0 + 0.5 * (6.0 * s[0]).cos()])
            .unwrap();
        let psi = psi_all(
            &x,
            &m,
            &InfluenceKernel::Saturating,
            &SignMap::projection(1),
        )
        .unwrap();
        let integral: f64 = psi.iter().sum::<f64>() / 32.0;
        assert!(integral.abs() < 1e-12);
        let brute = eval_psi(
            7,
            &x,
            &m,
            &InfluenceKernel::Saturating,
            &SignMap::projection(1),
        )
        .unwrap();
        assert!((brute - psi[7]).abs() < 1e-12);
    }

    #[test]
    fn mismatched_resolution_is_rejected() {
        let x = GridFunction::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let m = GridFunction::new(1, 4, 1, vec![1.0; 4]).unwrap();
        assert!(matches!(
            grid_rhs(&x, &m, &InfluenceKernel::Linear, &SignMap::projection(1)),
            Err(Error::Contract(_))
        ));
        assert!(eval_psi(0, &x, &m, &InfluenceKernel::Linear, &SignMap::projection(1)).is_err());
    }

    #[test]
    fn direct_solver_rejects_non_monotone_start() {
        let x = GridFunction::new(1, 2, 1, vec![1.0, 0.0]).unwrap();
        let m = GridFunction::new(1, 2, 1, vec![1.0, 1.0]).unwrap();
        let r = solve_direct(
            &x,
            &m,
            &IntegratorConfig::rk4(0.1),
            1.0,
            &InfluenceKernel::Linear,
            &SignMap::projection(1),
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
