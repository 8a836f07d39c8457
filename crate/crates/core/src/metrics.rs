//! Separation quality of the global system `C = B·A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Mat, Scalar};

/// Value reported by [`crosstalk_db`] when there is no interference at all.
pub const CROSSTALK_FLOOR_DB: f64 = -120.0;

/// Amari performance index, normalized to `[0, 1]`.
///
/// Zero exactly when `C` is a scaled permutation. Defined as 0 for `1 × 1` systems.
pub fn amari_index<T: Scalar>(c: &Mat<T>) -> Result<f64> {
    let abs = abs_square(c, "amari_index")?;
    let n = abs.len();
    if n == 1 {
        return Ok(0.0);
    }
    let row_sum = ordered_sum((0..n).map(|i| {
        let row = &abs[i];
        let max = row.iter().copied().fold(0.0, f64::max);
        ordered_sum(row.iter().map(|v| v / max)) - 1.0
    }));
    let col_sum = ordered_sum((0..n).map(|j| {
        let max = (0..n).map(|i| abs[i][j]).fold(0.0, f64::max);
        ordered_sum((0..n).map(|i| abs[i][j] / max)) - 1.0
    }));
    Ok((row_sum + col_sum) / (2 * n * (n - 1)) as f64)
}

/// Sums in ascending order so the result depends only on the multiset of terms, which makes
/// the index exactly invariant under row and column permutations.
fn ordered_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut terms: Vec<f64> = terms.collect();
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Interference energy relative to the per-row dominant entries, in dB.
pub fn crosstalk_db<T: Scalar>(c: &Mat<T>) -> Result<f64> {
    let abs = abs_square(c, "crosstalk_db")?;
    let (mut dominant, mut other) = (0.0, 0.0);
    for row in &abs {
        let max = row.iter().copied().fold(0.0, f64::max);
        let total: f64 = row.iter().map(|v| v * v).sum();
        dominant += max * max;
        other += total - max * max;
    }
    let ratio = other.max(0.0) / dominant;
    Ok((10.0 * ratio.log10()).max(CROSSTALK_FLOOR_DB))
}

fn abs_square<T: Scalar>(c: &Mat<T>, op: &'static str) -> Result<Vec<Vec<f64>>> {
    let (r, k) = c.shape();
    if r != k {
        return Err(Error::shape(op, (r, r), (r, k)));
    }
    if !c.is_finite() {
        return Err(Error::NonFinite("global system"));
    }
    let abs: Vec<Vec<f64>> = (0..r).map(|i| c.row(i).iter().map(|v| v.to_f64_lossless().abs()).collect()).collect();
    if let Some(i) = abs.iter().position(|row| row.iter().all(|&v| v == 0.0)) {
        return Err(Error::UndefinedMetric(format!("row {i} of the global system is zero")));
    }
    if let Some(j) = (0..r).find(|&j| abs.iter().all(|row| row[j] == 0.0)) {
        return Err(Error::UndefinedMetric(format!("column {j} of the global system is zero")));
    }
    Ok(abs)
}

/// When a run counts as separated: Amari index strictly below `threshold` for `window`
/// consecutive samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceCriterion {
    pub threshold: f64,
    pub window: usize,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self { threshold: 0.05, window: 100 }
    }
}

impl ConvergenceCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::InvalidHyperparameter { name: "threshold", reason: "must be finite and > 0".into() });
        }
        if self.window == 0 {
            return Err(Error::InvalidHyperparameter { name: "window", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// First index `t` with `series[t..t + window]` all below the threshold.
pub fn check_convergence(series: &[f64], criterion: &ConvergenceCriterion) -> Option<usize> {
    let mut run_start = 0;
    for (t, &v) in series.iter().enumerate() {
        if v < criterion.threshold {
            if t + 1 - run_start >= criterion.window {
                return Some(run_start);
            }
        } else {
            run_start = t + 1;
        }
    }
    None
}

/// Per-run trace of one separation experiment.
///
/// `amari[t]` is the index of the separator after consuming sample `t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub amari: Vec<f64>,
    /// Samples consumed until the first sample of the converged window, inclusive.
    pub iterations_to_convergence: Option<usize>,
    pub diverged: bool,
}

impl RunRecord {
    pub fn push(&mut self, amari: f64) {
        self.amari.push(amari);
    }

    /// Scans the series and stores the result.
    pub fn finish(&mut self, criterion: &ConvergenceCriterion) -> Option<usize> {
        self.iterations_to_convergence =
            if self.diverged { None } else { check_convergence(&self.amari, criterion).map(|t| t + 1) };
        self.iterations_to_convergence
    }
}
