use crate::error::{Error, Result};

/// Row-major bijection between multi-indices `{0..N-1}^d` and flat indices
/// `{0..N^d - 1}`; the first coordinate varies fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CubeLabeling {
    dim: usize,
    side: usize,
}

impl CubeLabeling {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::contract(format!(
                "invalid labeling d = {dim}, N = {side}"
            )));
        }
        side.checked_pow(dim as u32)
            .ok_or_else(|| Error::Capacity(format!("{side}^{dim} cells overflow")))?;
        Ok(CubeLabeling { dim, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.dim {
            return Err(Error::contract(format!(
                "multi-index of length {} for dimension {}",
                multi.len(),
                self.dim
            )));
        }
        let mut flat = 0;
        for &i in multi.iter().rev() {
            if i >= self.side {
                return Err(Error::contract(format!(
                    "index {i} outside 0..{}",
                    self.side
                )));
            }
            flat = flat * self.side + i;
        }
        Ok(flat)
    }

    pub fn unlabel(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.len() {
            return Err(Error::contract(format!(
                "flat index {flat} outside 0..{}",
                self.len()
            )));
        }
        let mut rest = flat;
        Ok((0..self.dim)
            .map(|_| {
                let i = rest % self.side;
                rest /= self.side;
                i
            })
            .collect())
    }

    /// Flat index of the cell containing `s` in `[0,1]^d`; the right edge
    /// belongs to the last cell.
    pub fn cell_of(&self, s: &[f64]) -> Result<usize> {
        if s.len() != self.dim || s.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::contract(format!(
                "point {s:?} outside the unit cube"
            )));
        }
        let multi: Vec<usize> = s
            .iter()
            .map(|c| ((c * self.side as f64).floor() as usize).min(self.side - 1))
            .collect();
        self.label(&multi)
    }

    /// Lower corner of cell `flat`.
    pub fn corner(&self, flat: usize) -> Result<Vec<f64>> {
        let h = 1.0 / self.side as f64;
        Ok(self
            .unlabel(flat)?
            .into_iter()
            .map(|i| i as f64 * h)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_is_identity() {
        let l = CubeLabeling::new(1, 7).unwrap();
        for i in 0..7 {
            assert_eq!(l.label(&[i]).unwrap(), i);
        }
    }

    #[test]
    fn two_by_two_row_major() {
        let l = CubeLabeling::new(2, 2).unwrap();
        assert_eq!(l.label(&[0, 0]).unwrap(), 0);
        assert_eq!(l.label(&[1, 0]).unwrap(), 1);
        assert_eq!(l.label(&[0, 1]).unwrap(), 2);
        assert_eq!(l.label(&[1, 1]).unwrap(), 3);
    }

    #[test]
    fn round_trip_d4_n3() {
        let l = CubeLabeling::new(4, 3).unwrap();
        assert_eq!(l.len(), 81);
        for flat in 0..81 {
            assert_eq!(l.label(&l.unlabel(flat).unwrap()).unwrap(), flat);
        }
    }

    #[test]
    fn out_of_range() {
        let l = CubeLabeling::new(2, 3).unwrap();
        assert!(l.label(&[3, 0]).is_err());
        assert!(l.label(&[0]).is_err());
        assert!(l.unlabel(9).is_err());
        assert!(l.cell_of(&[1.2, 0.0]).is_err());
    }

    #[test]
    fn cell_membership() {
        let l = CubeLabeling::new(1, 4).unwrap();
        // s = 0.3 lies in the second cell.
        assert_eq!(l.cell_of(&[0.3]).unwrap(), 1);
        assert_eq!(l.cell_of(&[1.0]).unwrap(), 3);
        let l2 = CubeLabeling::new(2, 4).unwrap();
        assert_eq!(l2.cell_of(&[0.3, 0.8]).unwrap(), 1 + 3 * 4);
    }
}
