//! Ranked-queue admission with lottery tie-breaking, the instruments it
//! generates, and brute-force counterfactuals.
//!
//! Programs are indexed `0..K` internally. Anything written out (CSV, event
//! logs, potential-outcome columns) numbers them `1..=K` and uses `0` for the
//! outside option, matching `po[0] = Y(0)`.

mod balance;
mod clearing;
mod market;
mod simulate;

pub use balance::{balance_check, BalanceReport};
pub use clearing::{
    blocking_pairs, identify_pivotal_groups, lottery_draw, luck_variable, run_clearing, AllocationResult, Cutoff,
    PivotalGroup,
};
pub use market::{market_dataset, market_oracle, Consumer, MarketConfig, MarketOracle};
pub use simulate::{
    oracle_all, simulate_iv_dataset, slot_expansion_oracle, ChainEvent, OracleResult, SimulatedDataset,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Applicant {
    /// Coarse merit bracket; higher is better.
    pub merit: u32,
    /// Ranked program ids, most preferred first. The outside option is implicit.
    pub prefs: Vec<usize>,
    /// Potential outcomes `Y(0), Y(1), ..., Y(K)`.
    pub po: Vec<f64>,
    pub label: Option<String>,
    /// Predetermined covariates, fixed before any lottery.
    pub covariates: Vec<f64>,
}

impl Applicant {
    /// Outcome under an assignment (`None` = outside option).
    pub fn outcome(&self, assigned: Option<usize>) -> f64 {
        self.po[assigned.map_or(0, |k| k + 1)]
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Population {
    pub k: usize,
    pub applicants: Vec<Applicant>,
    #[serde(default)]
    pub covariate_names: Vec<String>,
}

impl Population {
    pub fn new(k: usize, applicants: Vec<Applicant>, covariate_names: Vec<String>) -> Result<Self> {
        let pop = Population { k, applicants, covariate_names };
        pop.validate()?;
        Ok(pop)
    }

    pub fn len(&self) -> usize {
        self.applicants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.applicants.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("population needs at least one program".into()));
        }
        let mut seen = vec![usize::MAX; self.k];
        for (i, a) in self.applicants.iter().enumerate() {
            for &p in &a.prefs {
                if p >= self.k {
                    return Err(Error::InvalidInput(format!("applicant {i} ranks program {} but K = {}", p + 1, self.k)));
                }
                if seen[p] == i {
                    return Err(Error::InvalidInput(format!("applicant {i} ranks program {} twice", p + 1)));
                }
                seen[p] = i;
            }
            if a.po.len() != self.k + 1 || a.po.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("applicant {i} needs {} finite potential outcomes", self.k + 1)));
            }
            if a.covariates.len() != self.covariate_names.len() {
                return Err(Error::InvalidInput(format!(
                    "applicant {i} has {} covariates, expected {}",
                    a.covariates.len(),
                    self.covariate_names.len()
                )));
            }
        }
        Ok(())
    }

    /// Realized outcomes under an allocation.
    pub fn outcomes(&self, result: &AllocationResult) -> Vec<f64> {
        self.applicants.iter().zip(&result.assignment).map(|(a, s)| a.outcome(*s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MechanismConfig {
    pub capacities: Vec<usize>,
    pub lottery_seed: u64,
    /// When false every program admits independently and an applicant may
    /// hold several offers. Experimental.
    #[serde(default = "yes")]
    pub mutually_exclusive: bool,
}

fn yes() -> bool {
    true
}

impl MechanismConfig {
    pub fn new(capacities: Vec<usize>, lottery_seed: u64) -> Self {
        MechanismConfig { capacities, lottery_seed, mutually_exclusive: true }
    }

    pub fn validate(&self, pop: &Population) -> Result<()> {
        if self.capacities.len() != pop.k {
            return Err(Error::LengthMismatch { left: self.capacities.len(), right: pop.k });
        }
        if let Some(k) = self.capacities.iter().position(|&c| c == 0) {
            return Err(Error::InvalidInput(format!("program {} has capacity 0", k + 1)));
        }
        Ok(())
    }

    pub(crate) fn with_seed(&self, seed: u64) -> Self {
        MechanismConfig { lottery_seed: seed, ..self.clone() }
    }
}
