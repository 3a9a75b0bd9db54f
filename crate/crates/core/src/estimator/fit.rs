use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, PivotedQr, Vector};

use super::{partial_out, FirstStage, FitOptions};

/// Condition-number ceiling for inverting the first stage.
pub(crate) const CONDITION_CEILING: f64 = 1e12;

/// Partialled system shared by all fits on one dataset.
pub(crate) struct IvSystem {
    pub y: Vector,
    pub a: Mat,
    pub z: Mat,
    /// Least-squares coefficients of A on Z: column j holds (π_j1..π_jK), so this is Πᵀ.
    pub pi_t: Mat,
    pub rf: Vector,
    pub n_controls: usize,
}

impl IvSystem {
    pub fn build(data: &Dataset) -> Result<Self> {
        let (k, m) = (data.k(), data.n_instruments());
        if k != m {
            return Err(Error::NotJustIdentified { instruments: m, treatments: k });
        }
        let p = data.n_controls();
        if data.n() <= k + p {
            return Err(Error::InvalidInput(format!(
                "need more than K + p = {} observations, have {}",
                k + p,
                data.n()
            )));
        }
        let d = partial_out(data)?;
        let qr = PivotedQr::new(d.z());
        if !qr.is_full_rank() {
            return Err(Error::SingularInstrumentGram { condition: qr.condition_number() });
        }
        let pi_t = qr.solve(d.a()).expect("full rank");
        let rf = qr.solve(&Mat::from_column_slice(d.n(), 1, d.y().as_slice())).expect("full rank").column(0).into_owned();
        Ok(IvSystem { y: d.y().clone(), a: d.a().clone(), z: d.z().clone(), pi_t, rf, n_controls: p })
    }

    pub fn first_stage(&self, opts: &FitOptions) -> FirstStage {
        let mut fs = FirstStage::new(self.pi_t.transpose()).expect("square finite matrix");
        fs.check_relevance(opts.weak_diagonal_threshold);
        fs
    }

    /// Solves the sample moment conditions Z̃ᵀ(ỹ - Ãβ) = 0.
    pub fn beta(&self) -> Result<Vector> {
        let condition = linalg::condition_number(&self.pi_t);
        if !condition.is_finite() || condition > CONDITION_CEILING {
            return Err(Error::SingularFirstStage { condition });
        }
        let zta = self.z.tr_mul(&self.a);
        let zty = self.z.tr_mul(&self.y);
        linalg::solve_square(&zta, &zty).ok_or(Error::SingularFirstStage { condition })
    }
}

/// π_jk: coefficient on Z_k when A_j is regressed on all K instruments and the controls.
pub fn fit_first_stage(data: &Dataset) -> Result<FirstStage> {
    fit_first_stage_with(data, &FitOptions::default())
}

pub fn fit_first_stage_with(data: &Dataset, opts: &FitOptions) -> Result<FirstStage> {
    Ok(IvSystem::build(data)?.first_stage(opts))
}

/// RF_k: coefficient on Z_k in the regression of y on all K instruments and the controls.
pub fn fit_reduced_form(data: &Dataset) -> Result<Vector> {
    Ok(IvSystem::build(data)?.rf)
}

/// Just-identified 2SLS coefficients on the K treatments.
pub fn fit_2sls(data: &Dataset) -> Result<Vector> {
    IvSystem::build(data)?.beta()
}

/// Own-instrument Wald ratios W_k = RF_k / π_kk.
pub fn wald_ratios(rf: &Vector, fs: &FirstStage) -> Result<Vector> {
    if rf.len() != fs.k() {
        return Err(Error::LengthMismatch { left: rf.len(), right: fs.k() });
    }
    if let Some(k) = fs.zero_diagonal() {
        return Err(Error::ZeroDiagonal { k });
    }
    Ok(Vector::from_fn(fs.k(), |k, _| rf[k] / fs.get(k, k)))
}
