use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimator::Statistic;
use crate::mechanism::MarketConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Generic,
    ThreeProgram,
}

/// Parameters shared by every command. Loaded from `--config` JSON, then
/// overridden by command-line flags. See `docs/config.md`.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub tol: Option<f64>,
    pub max_rounds: Option<usize>,
    pub bootstrap_reps: Option<usize>,
    pub statistic: Option<Statistic>,
    pub blocks: Option<String>,
    pub group_col: Option<String>,
    pub fixture: Option<String>,
    pub scenario: Scenario,
    pub synth: Option<SynthConfig>,
    pub capacities: Option<Vec<usize>>,
    pub mutually_exclusive: Option<bool>,
    pub market: Option<MarketConfig>,
    pub step: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = super::csv::read_text(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::Usage(format!("tol must be positive, got {t}")));
            }
        }
        if self.reps == Some(0) {
            return Err(Error::Usage("reps must be at least 1".into()));
        }
        Ok(())
    }

    /// Stochastic commands refuse to run without an explicit seed.
    pub fn require_seed(&self, command: &str) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Usage(format!("'{command}' is stochastic and needs --seed")))
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    pub fn group_col(&self) -> &str {
        self.group_col.as_deref().unwrap_or("group")
    }
}
