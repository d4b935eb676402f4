use std::io::Write;

use serde::Serialize;

use super::NormKind;
use crate::error::{Error, Result};

/// One sample of the convergence functionals for refinement level `n` at
/// time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    pub xi: f64,
    pub zeta: f64,
    pub gn: f64,
    pub w1: Option<f64>,
}

/// Time series of `xi_N`, `zeta_N`, `||g_N||` and `W_1(mu_N, mu)` across a
/// list of refinement levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    norm_kind: NormKind,
    rows: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub n: usize,
    pub sup_xi: f64,
    pub sup_zeta: f64,
    pub sup_xi_plus_zeta: f64,
    pub sup_gn: f64,
    pub sup_w1: Option<f64>,
}

/// Per-level suprema over `t` and ratios between consecutive levels
/// (coarse over fine, so values above 1 mean decay).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub norm_kind: NormKind,
    pub levels: Vec<LevelSummary>,
    pub decay_ratios: Vec<f64>,
    /// `log(ratio) / log(N_{k+1} / N_k)` of the `xi + zeta` suprema.
    pub empirical_orders: Vec<f64>,
    pub gn_decay_ratios: Vec<f64>,
    pub w1_decay_ratios: Vec<f64>,
}

fn strictly_decreasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

impl ConvergenceSummary {
    pub fn error_strictly_decreasing(&self) -> bool {
        strictly_decreasing(self.levels.iter().map(|l| l.sup_xi_plus_zeta))
    }

    pub fn gn_strictly_decreasing(&self) -> bool {
        strictly_decreasing(self.levels.iter().map(|l| l.sup_gn))
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.into()))
    }
}

impl ConvergenceReport {
    pub fn new(dim: usize) -> Self {
        ConvergenceReport {
            norm_kind: NormKind::for_dim(dim),
            rows: Vec::new(),
        }
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn push(&mut self, row: ConvergenceRow) -> Result<()> {
        let values = [row.xi, row.zeta, row.gn, row.w1.unwrap_or(0.0)];
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::contract(format!(
                "convergence entries must be finite and non-negative: {row:?}"
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ConvergenceRow>) -> Result<()> {
        rows.into_iter().try_for_each(|r| self.push(r))
    }

    pub fn rows(&self) -> &[ConvergenceRow] {
        &self.rows
    }

    /// Refinement levels in increasing order.
    pub fn levels(&self) -> Vec<usize> {
        let mut n: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    pub fn series(&self, n: usize) -> Vec<ConvergenceRow> {
        self.rows.iter().filter(|r| r.n == n).copied().collect()
    }

    /// Row of level `n` whose time is closest to `t`.
    pub fn row_near(&self, n: usize, t: f64) -> Option<ConvergenceRow> {
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .copied()
    }

    pub fn summary(&self) -> ConvergenceSummary {
        let levels: Vec<LevelSummary> = self
            .levels()
            .into_iter()
            .map(|n| {
                let s = self.series(n);
                let sup = |f: &dyn Fn(&ConvergenceRow) -> f64| s.iter().map(f).fold(0.0, f64::max);
                LevelSummary {
                    n,
                    sup_xi: sup(&|r| r.xi),
                    sup_zeta: sup(&|r| r.zeta),
                    sup_xi_plus_zeta: sup(&|r| r.xi + r.zeta),
                    sup_gn: sup(&|r| r.gn),
                    sup_w1: if s.iter().all(|r| r.w1.is_some()) {
                        Some(sup(&|r| r.w1.unwrap()))
                    } else {
                        None
                    },
                }
            })
            .collect();
        let ratios = |f: &dyn Fn(&LevelSummary) -> Option<f64>| -> Vec<f64> {
            levels
                .windows(2)
                .filter_map(|w| Some(f(&w[0])? / f(&w[1])?))
                .collect()
        };
        let decay_ratios = ratios(&|l| Some(l.sup_xi_plus_zeta));
        let empirical_orders = levels
            .windows(2)
            .zip(&decay_ratios)
            .map(|(w, r)| r.ln() / (w[1].n as f64 / w[0].n as f64).ln())
            .collect();
        ConvergenceSummary {
            norm_kind: self.norm_kind,
            gn_decay_ratios: ratios(&|l| Some(l.sup_gn)),
            w1_decay_ratios: ratios(&|l| l.sup_w1),
            decay_ratios,
            empirical_orders,
            levels,
        }
    }

    /// CSV with header `N,t,xi,zeta,gn,w1`; a missing `w1` is left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "N,t,xi,zeta,gn,w1")?;
        for r in &self.rows {
            write!(out, "{},{:e},{:e},{:e},{:e},", r.n, r.t, r.xi, r.zeta, r.gn)?;
            match r.w1 {
                Some(w) => writeln!(out, "{w:e}")?,
                None => writeln!(out)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, t: f64, e: f64) -> ConvergenceRow {
        ConvergenceRow {
            n,
            t,
            xi: e,
            zeta: e,
            gn: e,
            w1: Some(e),
        }
    }

    #[test]
    fn summary_ratios() {
        let mut r = ConvergenceReport::new(1);
        r.extend([
            row(8, 0.0, 0.0),
            row(8, 1.0, 4e-2),
            row(16, 0.0, 0.0),
            row(16, 1.0, 1e-2),
        ])
        .unwrap();
        let s = r.summary();
        assert_eq!(s.norm_kind, NormKind::L2Squared);
        assert_eq!(s.levels.len(), 2);
        assert!((s.decay_ratios[0] - 4.0).abs() < 1e-12);
        assert!((s.empirical_orders[0] - 2.0).abs() < 1e-12);
        assert!(s.error_strictly_decreasing() && s.gn_strictly_decreasing());
        assert_eq!(r.row_near(16, 0.9).unwrap().t, 1.0);
    }

    #[test]
    fn rejects_negative_entries() {
        let mut r = ConvergenceReport::new(2);
        assert_eq!(r.norm_kind(), NormKind::L1);
        assert!(r.push(row(4, 0.0, -1.0)).is_err());
        assert!(r
            .push(ConvergenceRow {
                w1: Some(f64::NAN),
                ..row(4, 0.0, 1.0)
            })
            .is_err());
    }

    #[test]
    fn csv_layout() {
        let mut r = ConvergenceReport::new(1);
        r.push(row(8, 0.5, 0.25)).unwrap();
        r.push(ConvergenceRow {
            w1: None,
            ..row(16, 0.5, 0.5)
        })
        .unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "N,t,xi,zeta,gn,w1\n8,5e-1,2.5e-1,2.5e-1,2.5e-1,2.5e-1\n16,5e-1,5e-1,5e-1,5e-1,\n"
        );
    }
}
