use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, PivotedQr};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BalanceReport {
    /// Coefficient on the pooled luck variable, one per covariate.
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    /// `bᵀ V⁺ b` over all covariates jointly.
    pub wald: f64,
    /// Rank of V, the numerator degrees of freedom.
    pub df: usize,
    /// `wald / df` against F(df, G - 1).
    pub f_stat: f64,
    pub p_value: f64,
    pub n_clusters: usize,
}

/// Regresses each covariate on the pooled luck variable (the row sum of Z)
/// and the dataset's controls, with cluster-robust inference.
pub fn balance_check(data: &Dataset, covariates: &Mat) -> Result<BalanceReport> {
    let n = data.n();
    if covariates.nrows() != n {
        return Err(Error::LengthMismatch { left: covariates.nrows(), right: n });
    }
    let (codes, g) = data.cluster_codes();
    if g < 2 {
        return Err(Error::TooFewClusters { found: g });
    }
    let q = covariates.ncols();
    let luck = Mat::from_fn(n, 1, |i, _| data.z().row(i).sum());
    let mut stacked = Mat::zeros(n, 1 + q);
    stacked.set_column(0, &luck.column(0));
    for c in 0..q {
        stacked.set_column(1 + c, &covariates.column(c));
    }
    let qr = PivotedQr::new(data.x());
    if !qr.is_full_rank() {
        return Err(Error::RankDeficientControls {
            column: qr.first_deficient_column().unwrap_or(0),
            condition: qr.condition_number(),
        });
    }
    let resid = qr.residuals(&stacked).expect("controls have full rank");
    let l = resid.column(0);
    let sxx = l.dot(&l);
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("luck variable has no variation after partialling".into()));
    }
    let coef: Vec<f64> = (0..q).map(|c| l.dot(&resid.column(1 + c)) / sxx).collect();

    let mut scores = Mat::zeros(g, q);
    for i in 0..n {
        for c in 0..q {
            let e = resid[(i, 1 + c)] - coef[c] * l[i];
            scores[(codes[i], c)] += l[i] * e / sxx;
        }
    }
    let p = data.x().ncols() + 1;
    let factor = if n > p {
        (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n - p) as f64)
    } else {
        g as f64 / (g as f64 - 1.0)
    };
    let v = scores.tr_mul(&scores) * factor;
    let se = (0..q).map(|c| v[(c, c)].max(0.0).sqrt()).collect();
    let b = Mat::from_column_slice(q, 1, &coef);
    let (v_pinv, df) = linalg::pinv_symmetric(&v);
    let wald = if df == 0 { 0.0 } else { (b.transpose() * v_pinv * &b)[(0, 0)] };
    let (f_stat, p_value) = if df == 0 {
        (0.0, 1.0)
    } else {
        let f = wald / df as f64;
        let dist = FisherSnedecor::new(df as f64, (g - 1) as f64)
            .map_err(|e| Error::InvalidInput(format!("F distribution: {e}")))?;
        (f, dist.sf(f))
    };
    Ok(BalanceReport { coef, se, wald, df, f_stat, p_value, n_clusters: g })
}
