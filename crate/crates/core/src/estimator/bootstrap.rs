use rand::Rng;
use rayon::prelude::*;

use crate::cascade::{cascade_solve, conditional_entrant_from_data, CascadeOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::seed;

use super::fit::IvSystem;
use super::{wald_ratios, FitOptions};

/// Share of failed replications above which the bootstrap gives up.
const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Beta,
    Wald,
    CascadeDelta,
    /// T^{|g} for the named group label.
    ConditionalEntrant { group: String },
}

impl Statistic {
    pub fn evaluate(&self, data: &Dataset) -> Result<Vector> {
        let sys = IvSystem::build(data)?;
        let fs = sys.first_stage(&FitOptions::default());
        match self {
            Statistic::Beta => sys.beta(),
            Statistic::Wald => wald_ratios(&sys.rf, &fs),
            Statistic::CascadeDelta => {
                let w = wald_ratios(&sys.rf, &fs)?;
                let sol = cascade_solve(&fs, &sys.rf, &CascadeOptions::default())?;
                Ok(sol.t - w)
            }
            Statistic::ConditionalEntrant { group } => conditional_entrant_from_data(data, group),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Statistic::Beta => "beta".into(),
            Statistic::Wald => "wald".into(),
            Statistic::CascadeDelta => "cascade_delta".into(),
            Statistic::ConditionalEntrant { group } => format!("conditional_entrant[{group}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BootstrapResult {
    pub statistic: String,
    pub point: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub reps: usize,
    pub failed: usize,
}

/// Linear-interpolation percentile of sorted data (R's type 7).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pairs cluster bootstrap. Replication `r` draws its clusters from the RNG
/// stream `seed::derive(seed, r)`, and results are merged by replication
/// index, so the output does not depend on thread scheduling.
pub fn cluster_bootstrap(data: &Dataset, statistic: &Statistic, reps: usize, seed: u64) -> Result<BootstrapResult> {
    if reps < 2 {
        return Err(Error::InvalidInput("bootstrap needs at least 2 replications".into()));
    }
    let point = statistic.evaluate(data)?;
    let (codes, g) = data.cluster_codes();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); g];
    for (i, &c) in codes.iter().enumerate() {
        members[c].push(i);
    }

    let draws: Vec<Option<Vector>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed, r as u64);
            let mut rows = Vec::with_capacity(data.n());
            let mut ids = Vec::with_capacity(data.n());
            for draw in 0..g {
                let c = rng.random_range(0..g);
                rows.extend_from_slice(&members[c]);
                ids.extend(std::iter::repeat_n(format!("b{draw}"), members[c].len()));
            }
            let mut sample = data.select_rows(&rows);
            sample.relabel_clusters(ids);
            statistic.evaluate(&sample).ok().filter(|v| v.iter().all(|x| x.is_finite()))
        })
        .collect();

    let ok: Vec<&Vector> = draws.iter().flatten().collect();
    let failed = reps - ok.len();
    if failed as f64 > MAX_FAILURE_SHARE * reps as f64 || ok.len() < 2 {
        return Err(Error::StatisticFailedInReplication { failed, reps });
    }
    let k = point.len();
    let mut se = Vec::with_capacity(k);
    let mut lo = Vec::with_capacity(k);
    let mut hi = Vec::with_capacity(k);
    for c in 0..k {
        let mut col: Vec<f64> = ok.iter().map(|v| v[c]).collect();
        let m = col.len() as f64;
        let mean = col.iter().sum::<f64>() / m;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
        se.push(var.sqrt());
        col.sort_by(f64::total_cmp);
        lo.push(percentile(&col, 0.025));
        hi.push(percentile(&col, 0.975));
    }
    Ok(BootstrapResult {
        statistic: statistic.name(),
        point: point.iter().copied().collect(),
        se,
        ci_lower: lo,
        ci_upper: hi,
        reps: ok.len(),
        failed,
    })
}
