use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::seed;

use super::{CascadeSolution, Method, VacancyMatrix};

/// Upper-bound estimate of ρ(|M|), which in turn bounds ρ(M).
///
/// Runs power iteration on `|M| + I` from a random positive start vector and
/// returns the Collatz-Wielandt upper bound `max_i (Ax)_i / x_i - 1`. The
/// shift makes the Perron root strictly dominant, so periodic patterns such
/// as the antidiagonal two-program matrix converge instead of oscillating.
pub fn spectral_radius(m: &Mat, iters: usize, seed: u64) -> f64 {
    let k = m.nrows();
    if k == 0 || m.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let a = m.abs() + Mat::identity(k, k);
    let mut rng = seed::rng(seed, 0);
    let mut x = Vector::from_fn(k, |_, _| 0.5 + rng.random::<f64>());
    let mut upper = f64::INFINITY;
    for _ in 0..iters.max(1) {
        let y = &a * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..k {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        upper = upper.min(hi);
        let norm = linalg::max_abs(&y);
        x = y / norm;
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    (upper - 1.0).max(0.0)
}

/// Sums the cascade round by round: `T = Σ_n Mⁿ W`.
///
/// Rounds are added while their ∞-norm exceeds `tol * (1 - ρ̂)`, where ρ̂ is
/// the upper bound from [`spectral_radius`]; the neglected tail is then at
/// most about `tol`. Fails up front when ρ̂ >= 1.
pub fn neumann_solve(vm: &VacancyMatrix, wald: &Vector, tol: f64, max_rounds: usize) -> Result<CascadeSolution> {
    if wald.len() != vm.k() {
        return Err(Error::LengthMismatch { left: wald.len(), right: vm.k() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let rho = spectral_radius(vm.matrix(), 10_000, 0);
    if rho >= 1.0 {
        return Err(Error::DivergentCascade { rho });
    }
    let stop = tol * (1.0 - rho);
    let mut t = wald.clone();
    let mut rounds = vec![wald.clone()];
    let mut term = wald.clone();
    loop {
        let next = vm.matrix() * &term;
        if linalg::max_abs(&next) <= stop {
            break;
        }
        if rounds.len() > max_rounds {
            return Err(Error::MaxRoundsExceeded { rounds: max_rounds });
        }
        t += &next;
        rounds.push(next.clone());
        term = next;
    }
    let delta = &t - wald;
    Ok(CascadeSolution {
        t,
        w: wald.clone(),
        delta,
        method: Method::Neumann,
        rounds: Some(rounds),
        rho_estimate: rho,
        warnings: Vec::new(),
    })
}
