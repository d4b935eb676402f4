use std::io::Write;

use crate::embedding::CubeLabeling;
use crate::error::{Error, Result};
use crate::model::DiscreteState;

/// Tolerance on the unit integral of a mass grid.
pub const UNIT_MASS_TOL: f64 = 1e-9;

/// Step function on the uniform `K^d` grid over `[0,1]^d`, constant on each
/// cell. Cells follow the row-major [`CubeLabeling`]; each cell carries
/// `components` values (`d` for positions, 1 for masses).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    resolution: usize,
    components: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(dim: usize, resolution: usize, components: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || resolution == 0 || components == 0 {
            return Err(Error::contract(format!(
                "invalid grid shape d = {dim}, K = {resolution}, components = {components}"
            )));
        }
        let cells = CubeLabeling::new(dim, resolution)?.len();
        if values.len() != cells * components {
            return Err(Error::contract(format!(
                "{} values for {cells} cells with {components} components",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite grid value {v}")));
        }
        Ok(GridFunction {
            dim,
            resolution,
            components,
            values,
        })
    }

    /// Samples `f` at cell midpoints.
    pub fn from_midpoints<F>(dim: usize, resolution: usize, components: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let labeling = CubeLabeling::new(dim, resolution)?;
        let h = 1.0 / resolution as f64;
        let mut values = Vec::with_capacity(labeling.len() * components);
        for cell in 0..labeling.len() {
            let mid: Vec<f64> = labeling.corner(cell)?.iter().map(|c| c + 0.5 * h).collect();
            let v = f(&mid);
            if v.len() != components {
                return Err(Error::contract(
                    "sampled value has the wrong number of components",
                ));
            }
            values.extend(v);
        }
        Self::new(dim, resolution, components, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn cell_count(&self) -> usize {
        self.values.len() / self.components
    }

    /// `K^{-d}`.
    pub fn cell_measure(&self) -> f64 {
        1.0 / self.cell_count() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labeling(&self) -> CubeLabeling {
        CubeLabeling::new(self.dim, self.resolution).expect("validated at construction")
    }

    pub fn cell(&self, index: usize) -> &[f64] {
        &self.values[index * self.components..(index + 1) * self.components]
    }

    /// Point evaluation of the step function.
    pub fn value_at(&self, s: &[f64]) -> Result<&[f64]> {
        Ok(self.cell(self.labeling().cell_of(s)?))
    }

    /// Integral over `[0,1]^d` (componentwise).
    pub fn integral(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.components];
        for cell in self.values.chunks_exact(self.components) {
            for (o, v) in out.iter_mut().zip(cell) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.cell_measure());
        out
    }

    /// Same step function represented on the grid `factor` times finer.
    pub fn refine(&self, factor: usize) -> Result<GridFunction> {
        if factor == 0 {
            return Err(Error::contract("refinement factor must be positive"));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let fine = CubeLabeling::new(self.dim, self.resolution * factor)?;
        let coarse = self.labeling();
        let mut values = Vec::with_capacity(fine.len() * self.components);
        for cell in 0..fine.len() {
            let multi: Vec<usize> = fine
                .unlabel(cell)?
                .into_iter()
                .map(|i| i / factor)
                .collect();
            values.extend_from_slice(self.cell(coarse.label(&multi)?));
        }
        GridFunction::new(self.dim, self.resolution * factor, self.components, values)
    }

    /// Checks a mass grid: one component, positive values, unit integral.
    pub fn validate_mass(&self) -> Result<()> {
        if self.components != 1 {
            return Err(Error::contract("mass grids are scalar"));
        }
        if let Some((i, v)) = self.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::contract(format!(
                "mass grid value {v} in cell {i} is not positive"
            )));
        }
        let total = self.integral()[0];
        if (total - 1.0).abs() > UNIT_MASS_TOL {
            return Err(Error::contract(format!(
                "mass grid integrates to {total}, expected 1"
            )));
        }
        Ok(())
    }

    pub(crate) fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Checks that a position and a mass grid describe the same labeling cube.
pub(crate) fn check_pair(x: &GridFunction, m: &GridFunction) -> Result<()> {
    if x.dim != m.dim || x.resolution != m.resolution {
        return Err(Error::contract(format!(
            "position grid (d = {}, K = {}) and mass grid (d = {}, K = {}) differ",
            x.dim, x.resolution, m.dim, m.resolution
        )));
    }
    if x.components != x.dim || m.components != 1 {
        return Err(Error::contract(
            "position grids carry d components and mass grids one",
        ));
    }
    Ok(())
}

/// Identifies a grid pair at resolution `K` with the `P = K^d` particle state.
pub fn grids_to_state(time: f64, x: &GridFunction, m: &GridFunction) -> Result<DiscreteState> {
    check_pair(x, m)?;
    DiscreteState::from_parts(time, x.dim, x.values.clone(), m.values.clone())
}

/// Inverse of [`grids_to_state`].
pub fn state_to_grids(state: &DiscreteState) -> Result<(GridFunction, GridFunction)> {
    let d = state.dim();
    Ok((
        GridFunction::new(d, state.side(), d, state.positions().to_vec())?,
        GridFunction::new(d, state.side(), 1, state.masses().to_vec())?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumFrame {
    pub t: f64,
    pub x: GridFunction,
    pub m: GridFunction,
}

/// Sampled solution of the continuum equation on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumTrajectory {
    frames: Vec<ContinuumFrame>,
}

impl ContinuumTrajectory {
    pub fn new(frames: Vec<ContinuumFrame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::contract("empty continuum trajectory"))?;
        for f in &frames {
            check_pair(&f.x, &f.m)?;
            if f.x.resolution != first.x.resolution || f.x.dim != first.x.dim {
                return Err(Error::contract("continuum frames disagree in resolution"));
            }
        }
        Ok(ContinuumTrajectory { frames })
    }

    /// The time-independent trajectory `(x, m)` sampled at `times`.
    pub fn constant(x: &GridFunction, m: &GridFunction, times: &[f64]) -> Result<Self> {
        check_pair(x, m)?;
        Self::new(
            times
                .iter()
                .map(|&t| ContinuumFrame {
                    t,
                    x: x.clone(),
                    m: m.clone(),
                })
                .collect(),
        )
    }

    pub fn frames(&self) -> &[ContinuumFrame] {
        &self.frames
    }

    pub fn dim(&self) -> usize {
        self.frames[0].x.dim
    }

    pub fn resolution(&self) -> usize {
        self.frames[0].x.resolution
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    pub fn last(&self) -> &ContinuumFrame {
        self.frames.last().expect("non-empty")
    }

    /// Frame whose time is closest to `t`.
    pub fn frame_near(&self, t: f64) -> &ContinuumFrame {
        self.frames
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("non-empty")
    }

    /// CSV with header `t,cell_multi_index,x_1..x_d,m`; multi-indices are
    /// 0-based and joined with `:`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let dim = self.dim();
        let labeling = self.frames[0].x.labeling();
        let coords: Vec<String> = (1..=dim).map(|k| format!("x_{k}")).collect();
        writeln!(out, "t,cell_multi_index,{},m", coords.join(","))?;
        let names: Vec<String> = (0..labeling.len())
            .map(|c| {
                let multi = labeling.unlabel(c).expect("in range");
                multi
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(":")
            })
            .collect();
        for f in &self.frames {
            for (c, name) in names.iter().enumerate() {
                write!(out, "{:e},{name}", f.t)?;
                for v in f.x.cell(c) {
                    write!(out, ",{v:e}")?;
                }
                writeln!(out, ",{:e}", f.m.cell(c)[0])?;
            }
        }
        Ok(())
    }
}
