use std::collections::HashMap;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::seed;

use super::clearing::{clear, run_clearing};
use super::{MechanismConfig, Population};

/// Stacked pivotal-group records from many lottery replications, with the
/// applicant, replication and program behind every row.
#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub data: Dataset,
    pub applicant: Vec<usize>,
    pub replication: Vec<usize>,
    /// Program whose pivotal group the row belongs to (zero-based).
    pub program: Vec<usize>,
}

impl SimulatedDataset {
    /// Predetermined covariates aligned with the dataset rows.
    pub fn covariates(&self, pop: &Population) -> Mat {
        let p = pop.covariate_names.len();
        Mat::from_fn(self.applicant.len(), p, |r, c| pop.applicants[self.applicant[r]].covariates[c])
    }
}

struct Row {
    applicant: usize,
    program: usize,
    luck: f64,
    y: f64,
    a: Vec<f64>,
}

/// Replication `r` uses lottery seed `seed::derive(master_seed, r)`; the
/// seed in `cfg` is ignored.
///
/// One row per (replication, pivotal-group membership). `Z_k` is the luck
/// value for rows of program k's group and 0 otherwise; controls are a
/// constant plus one dummy per group program (first dropped); clusters are
/// `"<replication>:<program>"` with one-based programs.
pub fn simulate_iv_dataset(pop: &Population, cfg: &MechanismConfig, reps: usize, master_seed: u64) -> Result<SimulatedDataset> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    pop.validate()?;
    cfg.validate(pop)?;
    let k = pop.k;
    let per_rep: Vec<Vec<Row>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let res = run_clearing(pop, &cfg.with_seed(seed::derive(master_seed, r as u64)))?;
            let mut rows = Vec::new();
            for g in &res.pivotal_groups {
                for (&i, &luck) in g.members.iter().zip(&g.luck) {
                    let a = (0..k).map(|j| if res.admitted(i, j) { 1.0 } else { 0.0 }).collect();
                    let y = pop.applicants[i].outcome(res.assignment[i]);
                    rows.push(Row { applicant: i, program: g.program, luck, y, a });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let n: usize = per_rep.iter().map(Vec::len).sum();
    if n == 0 {
        return Err(Error::NoPivotalVariation);
    }
    let mut present = vec![false; k];
    per_rep.iter().flatten().for_each(|row| present[row.program] = true);
    let dummies: Vec<usize> = (0..k).filter(|&p| present[p]).skip(1).collect();

    let mut y = Vector::zeros(n);
    let mut a = Mat::zeros(n, k);
    let mut z = Mat::zeros(n, k);
    let mut x = Mat::zeros(n, 1 + dummies.len());
    let mut cluster = Vec::with_capacity(n);
    let mut applicant = Vec::with_capacity(n);
    let mut replication = Vec::with_capacity(n);
    let mut program = Vec::with_capacity(n);
    let labelled = pop.applicants.iter().all(|a| a.label.is_some());
    let mut group = labelled.then(|| Vec::with_capacity(n));
    let mut i = 0;
    for (r, rows) in per_rep.iter().enumerate() {
        for row in rows {
            y[i] = row.y;
            for j in 0..k {
                a[(i, j)] = row.a[j];
            }
            z[(i, row.program)] = row.luck;
            x[(i, 0)] = 1.0;
            if let Some(d) = dummies.iter().position(|&p| p == row.program) {
                x[(i, 1 + d)] = 1.0;
            }
            cluster.push(format!("{}:{}", r, row.program + 1));
            if let Some(g) = group.as_mut() {
                g.push(pop.applicants[row.applicant].label.clone().unwrap_or_default());
            }
            applicant.push(row.applicant);
            replication.push(r);
            program.push(row.program);
            i += 1;
        }
    }
    let data = Dataset::new(y, a, z, x, cluster, group)?;
    Ok(SimulatedDataset { data, applicant, replication, program })
}

/// One link of a vacancy chain: `applicant` moves from `from` to `to`
/// (one-based programs, 0 = outside option).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChainEvent {
    pub replication: usize,
    /// Program that received the extra slot.
    pub expanded: usize,
    pub round: usize,
    pub from: usize,
    pub to: usize,
    pub applicant: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OracleResult {
    /// Zero-based program that received the slot.
    pub program: usize,
    /// Mean change in total outcome across replications.
    pub effect: f64,
    /// Monte Carlo standard error, `sd / sqrt(reps)`.
    pub se: f64,
    pub per_rep: Vec<f64>,
    /// Replications in which the program turned nobody away.
    pub undersubscribed_reps: usize,
    /// True when the program was never oversubscribed; `effect` is then 0.
    pub undersubscribed: bool,
    #[serde(skip)]
    pub events: Vec<ChainEvent>,
}

/// Brute-force total effect of one extra slot at program `k`: for every
/// replication's lottery, clear the market at Q̄ and at Q̄ + e_k and sum the
/// outcome change over the whole population.
pub fn slot_expansion_oracle(
    pop: &Population,
    cfg: &MechanismConfig,
    k: usize,
    reps: usize,
    master_seed: u64,
) -> Result<OracleResult> {
    if k >= pop.k {
        return Err(Error::InvalidInput(format!("program {} does not exist (K = {})", k + 1, pop.k)));
    }
    Ok(oracle_for(pop, cfg, &[k], reps, master_seed)?.remove(0))
}

/// [`slot_expansion_oracle`] for every program, sharing the baseline runs.
pub fn oracle_all(pop: &Population, cfg: &MechanismConfig, reps: usize, master_seed: u64) -> Result<Vec<OracleResult>> {
    let programs: Vec<usize> = (0..pop.k).collect();
    oracle_for(pop, cfg, &programs, reps, master_seed)
}

fn oracle_for(pop: &Population, cfg: &MechanismConfig, programs: &[usize], reps: usize, master_seed: u64) -> Result<Vec<OracleResult>> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    pop.validate()?;
    cfg.validate(pop)?;
    // per_rep[r][p] = (change, oversubscribed, events)
    let per_rep: Vec<Vec<(f64, bool, Vec<ChainEvent>)>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = seed::derive(master_seed, r as u64);
            let base = clear(pop, &cfg.capacities, s, cfg.mutually_exclusive);
            programs
                .iter()
                .map(|&k| {
                    if !base.rejected[k] {
                        return (0.0, false, Vec::new());
                    }
                    let mut caps = cfg.capacities.clone();
                    caps[k] += 1;
                    let alt = clear(pop, &caps, s, cfg.mutually_exclusive);
                    let mut change = 0.0;
                    for (i, a) in pop.applicants.iter().enumerate() {
                        if alt.assignment[i] != base.assignment[i] {
                            change += a.outcome(alt.assignment[i]) - a.outcome(base.assignment[i]);
                        }
                    }
                    let events = chain_events(r, k, &base.assignment, &alt.assignment);
                    (change, true, events)
                })
                .collect()
        })
        .collect();

    Ok(programs
        .iter()
        .enumerate()
        .map(|(p, &k)| {
            let values: Vec<f64> = per_rep.iter().map(|r| r[p].0).collect();
            let over = per_rep.iter().filter(|r| r[p].1).count();
            let events = per_rep.iter().flat_map(|r| r[p].2.iter().cloned()).collect();
            let (effect, se) = mean_se(&values);
            OracleResult {
                program: k,
                effect: if over == 0 { 0.0 } else { effect },
                se: if over == 0 { 0.0 } else { se },
                per_rep: values,
                undersubscribed_reps: reps - over,
                undersubscribed: over == 0,
                events,
            }
        })
        .collect())
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Orders the assignment changes as a vacancy chain starting at the expanded
/// program. Changes that do not fit one chain are appended afterwards.
fn chain_events(rep: usize, k: usize, base: &[Option<usize>], alt: &[Option<usize>]) -> Vec<ChainEvent> {
    let changed: Vec<usize> = (0..base.len()).filter(|&i| base[i] != alt[i]).collect();
    let mut entrant: HashMap<Option<usize>, Vec<usize>> = HashMap::new();
    for &i in &changed {
        entrant.entry(alt[i]).or_default().push(i);
    }
    let one_based = |s: Option<usize>| s.map_or(0, |p| p + 1);
    let mut used = vec![false; base.len()];
    let mut events = Vec::new();
    let mut at = Some(k);
    while let Some(p) = at {
        let Some(i) = entrant.get(&Some(p)).and_then(|v| v.iter().copied().find(|&i| !used[i])) else { break };
        used[i] = true;
        events.push(ChainEvent {
            replication: rep,
            expanded: k + 1,
            round: events.len(),
            from: one_based(base[i]),
            to: p + 1,
            applicant: i,
        });
        at = base[i];
    }
    for &i in &changed {
        if !used[i] {
            events.push(ChainEvent {
                replication: rep,
                expanded: k + 1,
                round: events.len(),
                from: one_based(base[i]),
                to: one_based(alt[i]),
                applicant: i,
            });
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::super::Applicant;
    use super::*;

    fn ladder() -> Population {
        // Three programs everyone ranks in the same order; merit decides.
        let applicants = (0..12)
            .map(|i| Applicant {
                merit: (12 - i) as u32,
                prefs: vec![0, 1, 2],
                po: vec![0.0, 3.0, 2.0, 1.0],
                label: None,
                covariates: vec![],
            })
            .collect();
        Population::new(3, applicants, vec![]).unwrap()
    }

    #[test]
    fn chain_walks_down_the_ladder() {
        let pop = ladder();
        let cfg = MechanismConfig::new(vec![2, 2, 2], 0);
        let o = slot_expansion_oracle(&pop, &cfg, 0, 3, 5).unwrap();
        // 0->3, 3->2, 2->1: outcome rises by Y(1)-Y(0) = 3 in total.
        assert_eq!(o.effect, 3.0);
        assert_eq!(o.se, 0.0);
        let first: Vec<_> = o.events.iter().filter(|e| e.replication == 0).map(|e| (e.round, e.from, e.to, e.applicant)).collect();
        assert_eq!(first, vec![(0, 2, 1, 2), (1, 3, 2, 4), (2, 0, 3, 6)]);
    }

    #[test]
    fn undersubscribed_oracle_is_zero() {
        let pop = ladder();
        let cfg = MechanismConfig::new(vec![20, 20, 20], 0);
        let o = slot_expansion_oracle(&pop, &cfg, 1, 2, 0).unwrap();
        assert!(o.undersubscribed);
        assert_eq!(o.effect, 0.0);
    }

    #[test]
    fn no_pivotal_groups_is_an_error() {
        let pop = ladder();
        let cfg = MechanismConfig::new(vec![20, 20, 20], 0);
        assert!(matches!(simulate_iv_dataset(&pop, &cfg, 2, 0), Err(Error::NoPivotalVariation)));
    }
}
