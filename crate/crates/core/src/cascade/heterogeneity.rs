use crate::data::Dataset;
use crate::error::{Error, Result, Warning};
use crate::estimator::{fit_2sls, fit_first_stage, fit_reduced_form, FirstStage};
use crate::linalg::Vector;

/// Total effect of admitting one more member of group g to each program:
/// `T_k^{|g} = RF_k^g/π_kk^g + Σ_{j≠k} (-π_jk^g/π_kk^g) β_j`.
///
/// The first hop uses the group's own first stage and reduced form; the
/// vacancies it opens are valued at the full-sample coefficients.
pub fn conditional_entrant_effect(rf_g: &Vector, fs_g: &FirstStage, beta_full: &Vector) -> Result<Vector> {
    let k = fs_g.k();
    for len in [rf_g.len(), beta_full.len()] {
        if len != k {
            return Err(Error::LengthMismatch { left: len, right: k });
        }
    }
    if let Some(k) = fs_g.zero_diagonal() {
        return Err(Error::ZeroDiagonal { k });
    }
    Ok(Vector::from_fn(k, |col, _| {
        let own = fs_g.get(col, col);
        let tail: f64 = (0..k).filter(|&j| j != col).map(|j| -fs_g.get(j, col) / own * beta_full[j]).sum();
        rf_g[col] / own + tail
    }))
}

/// [`conditional_entrant_effect`] with the group quantities fitted on the
/// rows labelled `label` and β fitted on the whole sample.
pub fn conditional_entrant_from_data(data: &Dataset, label: &str) -> Result<Vector> {
    let beta = fit_2sls(data)?;
    let sub = data.group_subsample(label)?;
    let fs = fit_first_stage(&sub)?;
    let rf = fit_reduced_form(&sub)?;
    conditional_entrant_effect(&rf, &fs, &beta)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GroupDecomposition {
    pub levels: Vec<String>,
    /// `betas[g][k]`: 2SLS coefficient on treatment k with outcome `1[g_i = g]·Y_i`.
    pub betas: Vec<Vec<f64>>,
    pub warnings: Vec<Warning>,
}

impl GroupDecomposition {
    /// Σ_g β^{(g)}, which equals the full-sample β up to rounding.
    pub fn total(&self) -> Vec<f64> {
        let k = self.betas.first().map_or(0, Vec::len);
        (0..k).map(|c| self.betas.iter().map(|b| b[c]).sum()).collect()
    }
}

/// Splits β into additive group contributions by running 2SLS on the full
/// sample with the outcome zeroed outside each group.
///
/// `labels` gives each row's group; every label must appear in `levels`.
/// Levels with no rows get a zero contribution and an `EmptyGroup` warning.
pub fn group_outcome_decomposition(data: &Dataset, labels: &[String], levels: &[String]) -> Result<GroupDecomposition> {
    if labels.len() != data.n() {
        return Err(Error::LengthMismatch { left: labels.len(), right: data.n() });
    }
    if let Some(bad) = labels.iter().find(|l| !levels.contains(l)) {
        return Err(Error::InvalidInput(format!("label '{bad}' is not one of the partition levels")));
    }
    let mut betas = Vec::with_capacity(levels.len());
    let mut warnings = Vec::new();
    for level in levels {
        let mask: Vec<bool> = labels.iter().map(|l| l == level).collect();
        if !mask.iter().any(|&m| m) {
            warnings.push(Warning::EmptyGroup { label: level.clone() });
        }
        let y = Vector::from_fn(data.n(), |i, _| if mask[i] { data.y()[i] } else { 0.0 });
        betas.push(fit_2sls(&data.with_outcome(y)?)?.iter().copied().collect());
    }
    Ok(GroupDecomposition { levels: levels.to_vec(), betas, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{cascade_solve, CascadeOptions};
    use crate::linalg::Mat;

    #[test]
    fn full_group_reproduces_cascade_solution() {
        let fs = FirstStage::from_rows(&[vec![0.3, -0.05, 0.01], vec![-0.04, 0.25, -0.02], vec![0.0, -0.03, 0.4]]).unwrap();
        let beta = Vector::from_vec(vec![0.1, -0.2, 0.35]);
        let rf = fs.pi().transpose() * &beta;
        let t = cascade_solve(&fs, &rf, &CascadeOptions::default()).unwrap().t;
        let tg = conditional_entrant_effect(&rf, &fs, &t).unwrap();
        assert!((tg - t).amax() < 1e-12);
    }

    #[test]
    fn diagonal_group_stage_gives_wald_ratios() {
        let fs = FirstStage::new(Mat::from_diagonal(&Vector::from_vec(vec![0.5, 0.25]))).unwrap();
        let rf = Vector::from_vec(vec![0.1, 0.1]);
        let tg = conditional_entrant_effect(&rf, &fs, &Vector::from_vec(vec![9.0, 9.0])).unwrap();
        assert_eq!(tg.as_slice(), &[0.2, 0.4]);
    }

    #[test]
    fn zero_group_diagonal_rejected() {
        let fs = FirstStage::from_rows(&[vec![0.0, 0.1], vec![0.1, 0.3]]).unwrap();
        let err = conditional_entrant_effect(&Vector::zeros(2), &fs, &Vector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::ZeroDiagonal { k: 0 }));
    }
}
