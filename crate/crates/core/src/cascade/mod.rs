//! Total policy effects of adding one slot, computed from a first-stage
//! matrix and a reduced form.
//!
//! With Π = D + P (diagonal plus off-diagonal part), the per-program effects
//! satisfy `T_k = RF_k/π_kk + Σ_{j≠k} (-π_jk/π_kk) T_j`, i.e.
//! `(I - M) T = D⁻¹ RF` with the vacancy matrix `M = -D⁻¹Pᵀ`. The direct solve
//! inverts that system; the Neumann mode sums `Σ Mⁿ W` round by round.

mod aggregation;
mod heterogeneity;
mod neumann;
mod solve;

pub use aggregation::{block_coefficients, block_weights, three_program_beta2, Block, BlockSpec};
pub use heterogeneity::{
    conditional_entrant_effect, conditional_entrant_from_data, group_outcome_decomposition, GroupDecomposition,
};
pub use neumann::{neumann_solve, spectral_radius};
pub use solve::{cascade_decomposition, cascade_solve, two_program_closed_form};

use crate::error::{Error, Result, Warning};
use crate::estimator::FirstStage;
use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeOptions {
    /// Refuse to invert Πᵀ above this condition number.
    pub condition_ceiling: f64,
    /// Attach an ill-conditioning warning above this condition number.
    pub condition_warning: f64,
    pub spectral_iters: usize,
    pub spectral_seed: u64,
}

impl Default for CascadeOptions {
    fn default() -> Self {
        CascadeOptions { condition_ceiling: 1e12, condition_warning: 1e8, spectral_iters: 10_000, spectral_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSolution {
    pub t: Vector,
    pub w: Vector,
    pub delta: Vector,
    pub method: Method,
    /// Neumann only: contribution of each round, `Mⁿ W`.
    pub rounds: Option<Vec<Vector>>,
    /// Upper-bound estimate of ρ(|M|).
    pub rho_estimate: f64,
    pub warnings: Vec<Warning>,
}

/// Vacancy creation matrix `M = -D⁻¹Pᵀ`: entry (k, j) is the number of
/// vacancies opened in program j per new admit to program k, `-π_jk/π_kk`.
#[derive(Debug, Clone, PartialEq)]
pub struct VacancyMatrix {
    m: Mat,
}

impl VacancyMatrix {
    pub fn from_first_stage(fs: &FirstStage) -> Result<Self> {
        if let Some(k) = fs.zero_diagonal() {
            return Err(Error::ZeroDiagonal { k });
        }
        let k = fs.k();
        let m = Mat::from_fn(k, k, |row, col| if row == col { 0.0 } else { -fs.get(col, row) / fs.get(row, row) });
        Ok(VacancyMatrix { m })
    }

    /// Directly from a matrix; the diagonal must be zero and entries finite.
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput("vacancy matrix must be square".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("vacancy matrix has non-finite entries".into()));
        }
        if (0..m.nrows()).any(|i| m[(i, i)] != 0.0) {
            return Err(Error::InvalidInput("vacancy matrix must have a zero diagonal".into()));
        }
        Ok(VacancyMatrix { m })
    }

    /// Two programs with rates r21 (vacancies in 2 per admit to 1) and r12.
    pub fn two_program(r21: f64, r12: f64) -> Self {
        VacancyMatrix { m: Mat::from_row_slice(2, 2, &[0.0, r21, r12, 0.0]) }
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn k(&self) -> usize {
        self.m.nrows()
    }

    /// Vacancies created in program `j` per new admit to program `k`.
    pub fn rate(&self, j: usize, k: usize) -> f64 {
        self.m[(k, j)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacancy_orientation_matches_two_program_rates() {
        // π21 = -0.2, π12 = -0.1 with unit diagonal: r21 = 0.2, r12 = 0.1.
        let fs = FirstStage::from_rows(&[vec![1.0, -0.1], vec![-0.2, 1.0]]).unwrap();
        let vm = VacancyMatrix::from_first_stage(&fs).unwrap();
        assert_eq!(vm, VacancyMatrix::two_program(0.2, 0.1));
        assert_eq!(vm.rate(1, 0), 0.2);
        assert_eq!(vm.matrix()[(0, 0)], 0.0);
    }
}
