//! Cluster sandwich variances built from per-observation influence functions.
//!
//! For a statistic θ with influence rows ψ_i, the variance is
//! `c * Σ_g (Σ_{i∈g} ψ_i)(Σ_{i∈g} ψ_i)ᵀ` with the small-sample factor
//! `c = G/(G-1) * (N-1)/(N-K-p)`.

use crate::cascade::{cascade_solve, CascadeOptions};
use crate::data::Dataset;
use crate::error::{Error, Result, Warning};
use crate::linalg::{self, Mat, Vector};

use super::fit::IvSystem;
use super::{wald_ratios, FirstStage, FitOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeTarget {
    Beta,
    ReducedForm,
    Wald,
    CascadeDelta,
}

/// Point estimates and clustered standard errors for one dataset.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EstimateSet {
    pub beta: Vec<f64>,
    pub rf: Vec<f64>,
    pub wald: Vec<f64>,
    pub cascade_t: Vec<f64>,
    pub cascade_delta: Vec<f64>,
    pub se_beta: Vec<f64>,
    pub se_rf: Vec<f64>,
    pub se_wald: Vec<f64>,
    pub se_delta: Vec<f64>,
    /// `se_first_stage[j][k]` is the clustered SE of π_jk.
    pub se_first_stage: Vec<Vec<f64>>,
    /// Clustered Wald F for all instruments in each treatment's first-stage equation.
    pub first_stage_f: Vec<f64>,
    /// Clustered Wald statistic for β = 0 (χ² with K degrees of freedom).
    pub joint_wald: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
    #[serde(skip)]
    pub first_stage: Option<FirstStage>,
    pub warnings: Vec<Warning>,
}

impl EstimateSet {
    pub fn k(&self) -> usize {
        self.beta.len()
    }

    /// Builds the point-estimate columns from reported (T, W) pairs, with
    /// Δ = T - W. Used for published tables where only those columns exist.
    pub fn from_reported(t: &[f64], w: &[f64], se_t: &[f64], se_w: &[f64]) -> Result<Self> {
        let k = t.len();
        for len in [w.len(), se_t.len(), se_w.len()] {
            if len != k {
                return Err(Error::LengthMismatch { left: len, right: k });
            }
        }
        let nan = vec![f64::NAN; k];
        Ok(EstimateSet {
            beta: t.to_vec(),
            rf: nan.clone(),
            wald: w.to_vec(),
            cascade_t: t.to_vec(),
            cascade_delta: t.iter().zip(w).map(|(a, b)| a - b).collect(),
            se_beta: se_t.to_vec(),
            se_rf: nan.clone(),
            se_wald: se_w.to_vec(),
            se_delta: nan.clone(),
            se_first_stage: vec![nan.clone(); k],
            first_stage_f: nan,
            joint_wald: f64::NAN,
            n_obs: 0,
            n_clusters: 0,
            first_stage: None,
            warnings: Vec::new(),
        })
    }
}

/// Influence rows for every statistic of the just-identified system.
struct Influence {
    beta: Mat,
    rf: Mat,
    wald: Mat,
    /// One N×K block per first-stage equation j (coefficients of A_j on Z).
    first_stage: Vec<Mat>,
}

fn influence(sys: &IvSystem, beta: &Vector, pi_diag: &Vector, wald: &Vector) -> Result<Influence> {
    let (n, k) = (sys.y.len(), sys.pi_t.nrows());
    let ztz = sys.z.tr_mul(&sys.z);
    let ztz_inv = ztz
        .clone()
        .try_inverse()
        .ok_or(Error::SingularInstrumentGram { condition: linalg::condition_number(&ztz) })?;
    // Row i of h is ((Z̃ᵀZ̃)⁻¹ z̃_i)ᵀ.
    let h = &sys.z * &ztz_inv;
    let zta = sys.z.tr_mul(&sys.a);
    let zta_inv_t = zta
        .clone()
        .try_inverse()
        .ok_or(Error::SingularFirstStage { condition: linalg::condition_number(&zta) })?
        .transpose();
    let h_beta = &sys.z * zta_inv_t;

    let e_y = &sys.y - &sys.z * &sys.rf;
    let e_a = &sys.a - &sys.z * &sys.pi_t;
    let u = &sys.y - &sys.a * beta;

    let mut psi_beta = h_beta;
    let mut psi_rf = h.clone();
    let mut psi_wald = Mat::zeros(n, k);
    for i in 0..n {
        psi_beta.row_mut(i).scale_mut(u[i]);
        psi_rf.row_mut(i).scale_mut(e_y[i]);
        for c in 0..k {
            psi_wald[(i, c)] = h[(i, c)] * (e_y[i] - wald[c] * e_a[(i, c)]) / pi_diag[c];
        }
    }
    let first_stage = (0..k)
        .map(|j| {
            let mut m = h.clone();
            for i in 0..n {
                m.row_mut(i).scale_mut(e_a[(i, j)]);
            }
            m
        })
        .collect();
    Ok(Influence { beta: psi_beta, rf: psi_rf, wald: psi_wald, first_stage })
}

/// Clustered covariance from influence rows.
fn sandwich(psi: &Mat, codes: &[usize], n_clusters: usize, scale: f64) -> Mat {
    let k = psi.ncols();
    let mut sums = Mat::zeros(n_clusters, k);
    for (i, &g) in codes.iter().enumerate() {
        let mut row = sums.row_mut(g);
        row += psi.row(i);
    }
    sums.tr_mul(&sums) * scale
}

fn correction(opts: &FitOptions, n: usize, g: usize, k: usize, p: usize) -> f64 {
    if !opts.small_sample_correction {
        return 1.0;
    }
    let denom = n.saturating_sub(k + p).max(1) as f64;
    (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / denom)
}

fn se_from(v: &Mat) -> Vec<f64> {
    v.diagonal().iter().map(|x| x.max(0.0).sqrt()).collect()
}

fn quad_form_pinv(v: &Mat, b: &Vector) -> f64 {
    let (pinv, _) = linalg::pinv_symmetric(v);
    (b.transpose() * pinv * b)[(0, 0)]
}

/// Clustered standard errors for one family of estimates.
pub fn cluster_robust_se(data: &Dataset, which: SeTarget) -> Result<Vec<f64>> {
    let est = estimate(data)?;
    Ok(match which {
        SeTarget::Beta => est.se_beta,
        SeTarget::ReducedForm => est.se_rf,
        SeTarget::Wald => est.se_wald,
        SeTarget::CascadeDelta => est.se_delta,
    })
}

/// Full estimate set with default options.
pub fn estimate(data: &Dataset) -> Result<EstimateSet> {
    estimate_with(data, &FitOptions::default())
}

pub fn estimate_with(data: &Dataset, opts: &FitOptions) -> Result<EstimateSet> {
    let (codes, g) = data.cluster_codes();
    if g < 2 {
        return Err(Error::TooFewClusters { found: g });
    }
    let sys = IvSystem::build(data)?;
    let fs = sys.first_stage(opts);
    let beta = sys.beta()?;
    let wald = wald_ratios(&sys.rf, &fs)?;
    let solution = cascade_solve(&fs, &sys.rf, &CascadeOptions::default())?;
    let delta: Vector = &solution.t - &wald;

    let (n, k) = (data.n(), data.k());
    let scale = correction(opts, n, g, k, sys.n_controls);
    let inf = influence(&sys, &beta, &fs.diag(), &wald)?;
    let v_beta = sandwich(&inf.beta, &codes, g, scale);
    let v_rf = sandwich(&inf.rf, &codes, g, scale);
    let v_wald = sandwich(&inf.wald, &codes, g, scale);
    let v_delta = sandwich(&(&inf.beta - &inf.wald), &codes, g, scale);
    let mut se_first_stage = Vec::with_capacity(k);
    let mut first_stage_f = Vec::with_capacity(k);
    for (j, psi) in inf.first_stage.iter().enumerate() {
        let v = sandwich(psi, &codes, g, scale);
        se_first_stage.push(se_from(&v));
        first_stage_f.push(quad_form_pinv(&v, &sys.pi_t.column(j).into_owned()) / k as f64);
    }
    let joint_wald = quad_form_pinv(&v_beta, &beta);

    let mut warnings = fs.warnings().to_vec();
    warnings.extend(solution.warnings.iter().cloned());
    Ok(EstimateSet {
        beta: beta.iter().copied().collect(),
        rf: sys.rf.iter().copied().collect(),
        wald: wald.iter().copied().collect(),
        cascade_t: solution.t.iter().copied().collect(),
        cascade_delta: delta.iter().copied().collect(),
        se_beta: se_from(&v_beta),
        se_rf: se_from(&v_rf),
        se_wald: se_from(&v_wald),
        se_delta: se_from(&v_delta),
        se_first_stage,
        first_stage_f,
        joint_wald,
        n_obs: n,
        n_clusters: g,
        first_stage: Some(fs),
        warnings,
    })
}
