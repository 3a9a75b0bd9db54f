use crate::error::{Error, Result, Warning};
use crate::estimator::{wald_ratios, FirstStage};
use crate::linalg::{self, Mat, Vector};

use super::{spectral_radius, CascadeOptions, CascadeSolution, Method, VacancyMatrix};

/// Solves `(I - M) T = D⁻¹ RF` directly.
pub fn cascade_solve(fs: &FirstStage, rf: &Vector, opts: &CascadeOptions) -> Result<CascadeSolution> {
    let w = wald_ratios(rf, fs)?;
    let pi_t = fs.pi().transpose();
    let condition = linalg::condition_number(&pi_t);
    if !condition.is_finite() || condition > opts.condition_ceiling {
        return Err(Error::SingularFirstStage { condition });
    }
    let mut warnings = Vec::new();
    if condition > opts.condition_warning {
        warnings.push(Warning::IllConditioned { condition });
    }
    let vm = VacancyMatrix::from_first_stage(fs)?;
    let k = fs.k();
    let system = Mat::identity(k, k) - vm.matrix();
    let mut t = linalg::solve_square(&system, &w).ok_or(Error::SingularFirstStage { condition })?;
    // One step of iterative refinement against the original Πᵀ T = RF.
    let resid = rf - &pi_t * &t;
    if linalg::max_abs(&resid) > 1e-12 * linalg::max_abs(rf) {
        if let Some(fix) = linalg::solve_square(&pi_t, &resid) {
            t += fix;
        }
    }
    let rho = spectral_radius(vm.matrix(), opts.spectral_iters, opts.spectral_seed);
    let delta = &t - &w;
    Ok(CascadeSolution { t, w, delta, method: Method::Direct, rounds: None, rho_estimate: rho, warnings })
}

/// Δ_k = T_k - W_k.
pub fn cascade_decomposition(t: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if t.len() != w.len() {
        return Err(Error::LengthMismatch { left: t.len(), right: w.len() });
    }
    Ok(t.iter().zip(w).map(|(a, b)| a - b).collect())
}

/// Two-program cascade written out: `T1 = (W1 + r21 W2)/(1 - r21 r12)`,
/// `T2 = (W2 + r12 W1)/(1 - r21 r12)`.
pub fn two_program_closed_form(w: [f64; 2], r21: f64, r12: f64) -> [f64; 2] {
    let rho = r21 * r12;
    [(w[0] + r21 * w[1]) / (1.0 - rho), (w[1] + r12 * w[0]) / (1.0 - rho)]
}
