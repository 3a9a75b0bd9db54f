//! Just-identified multi-treatment IV: first stage, reduced form, 2SLS,
//! own-instrument Wald ratios, and cluster-level inference.
//!
//! Every fit residualizes y, A and Z on the controls first (Frisch-Waugh), so
//! callers may pass raw or already partialled data.

mod bootstrap;
mod fit;
mod inference;
mod partial;

pub use bootstrap::{cluster_bootstrap, BootstrapResult, Statistic};
pub use fit::{fit_2sls, fit_first_stage, fit_first_stage_with, fit_reduced_form, wald_ratios};
pub use inference::{cluster_robust_se, estimate, estimate_with, EstimateSet, SeTarget};
pub use partial::partial_out;

use crate::error::{Error, Result, Warning};
use crate::linalg::{Mat, Vector};

/// Default |π_kk| below which a weak-diagonal warning is attached.
pub const WEAK_DIAGONAL_THRESHOLD: f64 = 1e-6;

/// Tunables shared by the fitting routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub weak_diagonal_threshold: f64,
    /// Apply G/(G-1) * (N-1)/(N-K-p) to cluster sandwiches.
    pub small_sample_correction: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { weak_diagonal_threshold: WEAK_DIAGONAL_THRESHOLD, small_sample_correction: true }
    }
}

/// K×K first-stage matrix Π: rows are treatments j, columns instruments k.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pi: Mat,
    warnings: Vec<Warning>,
}

impl FirstStage {
    pub fn new(pi: Mat) -> Result<Self> {
        if !pi.is_square() || pi.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "first-stage matrix must be square and non-empty, got {}x{}",
                pi.nrows(),
                pi.ncols()
            )));
        }
        if pi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("first-stage matrix has non-finite entries".into()));
        }
        let mut fs = FirstStage { pi, warnings: Vec::new() };
        fs.check_relevance(WEAK_DIAGONAL_THRESHOLD);
        Ok(fs)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInput("first-stage rows must all have length K".into()));
        }
        Self::new(Mat::from_fn(k, k, |i, j| rows[i][j]))
    }

    /// Re-evaluates the weak-diagonal warnings against `threshold`.
    pub fn check_relevance(&mut self, threshold: f64) {
        self.warnings.retain(|w| !matches!(w, Warning::WeakDiagonal { .. }));
        for k in 0..self.k() {
            let v = self.pi[(k, k)];
            if v.abs() < threshold {
                self.warnings.push(Warning::WeakDiagonal { k, value: v });
            }
        }
    }

    pub fn k(&self) -> usize {
        self.pi.nrows()
    }

    pub fn pi(&self) -> &Mat {
        &self.pi
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.pi[(j, k)]
    }

    /// D: the own-instrument effects π_kk.
    pub fn diag(&self) -> Vector {
        self.pi.diagonal()
    }

    /// P = Π - D.
    pub fn offdiag(&self) -> Mat {
        let mut p = self.pi.clone();
        p.fill_diagonal(0.0);
        p
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// Index of the first exactly-zero diagonal entry.
    pub fn zero_diagonal(&self) -> Option<usize> {
        (0..self.k()).find(|&k| self.pi[(k, k)] == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_reassembles() {
        let fs = FirstStage::from_rows(&[vec![0.3, -0.1], vec![-0.05, 0.2]]).unwrap();
        let back = Mat::from_diagonal(&fs.diag()) + fs.offdiag();
        assert_eq!(&back, fs.pi());
        assert_eq!(fs.offdiag()[(0, 0)], 0.0);
        assert!(fs.warnings().is_empty());
    }

    #[test]
    fn weak_diagonal_is_flagged() {
        let fs = FirstStage::from_rows(&[vec![1e-9, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(fs.warnings().len(), 1);
        assert!(matches!(fs.warnings()[0], Warning::WeakDiagonal { k: 0, .. }));
    }
}
