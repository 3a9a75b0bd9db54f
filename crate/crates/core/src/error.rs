use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // estimator
    #[error("control matrix is rank deficient at column {column} (condition number {condition:.3e})")]
    RankDeficientControls { column: usize, condition: f64 },
    #[error("instrument Gram matrix is singular after partialling out controls (condition number {condition:.3e})")]
    SingularInstrumentGram { condition: f64 },
    #[error("first-stage matrix is singular or too ill-conditioned to invert (condition number {condition:.3e})")]
    SingularFirstStage { condition: f64 },
    #[error("own first-stage effect of instrument {k} is zero")]
    ZeroDiagonal { k: usize },
    #[error("model is not just-identified: {instruments} instruments for {treatments} treatments")]
    NotJustIdentified { instruments: usize, treatments: usize },
    #[error("need at least 2 clusters, found {found}")]
    TooFewClusters { found: usize },
    #[error("statistic failed in {failed} of {reps} bootstrap replications")]
    StatisticFailedInReplication { failed: usize, reps: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),

    // cascade
    #[error("cascade does not converge: spectral radius estimate {rho:.6} >= 1")]
    DivergentCascade { rho: f64 },
    #[error("Neumann series did not reach tolerance within {rounds} rounds")]
    MaxRoundsExceeded { rounds: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("own first-stage effect of program {m} is not positive; block weights are undefined")]
    NonpositiveDiagonal { m: usize },
    #[error("complier mass p02 + p12 must be positive")]
    ZeroComplierMass,

    // mechanism / synth
    #[error("no oversubscribed program produced a pivotal group")]
    NoPivotalVariation,
    #[error("program {k} is undersubscribed; an extra slot admits nobody")]
    UndersubscribedProgram { k: usize },
    #[error("market has no equilibrium: {0}")]
    NoEquilibrium(String),
    #[error("infeasible complier targets: {0}")]
    InfeasibleComplierTargets(String),

    // io
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("fixture mismatch: {}", .0.join("; "))]
    FixtureMismatch(Vec<String>),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable, module-qualified identifier used in the CLI's JSON error payload.
    pub fn code(&self) -> &'static str {
        match self {
            Error::RankDeficientControls { .. } => "estimator.rank_deficient_controls",
            Error::SingularInstrumentGram { .. } => "estimator.singular_instrument_gram",
            Error::SingularFirstStage { .. } => "estimator.singular_first_stage",
            Error::ZeroDiagonal { .. } => "estimator.zero_diagonal",
            Error::NotJustIdentified { .. } => "estimator.not_just_identified",
            Error::TooFewClusters { .. } => "estimator.too_few_clusters",
            Error::StatisticFailedInReplication { .. } => "estimator.statistic_failed_in_replication",
            Error::InvalidInput(_) => "estimator.invalid_input",
            Error::DivergentCascade { .. } => "cascade.divergent_cascade",
            Error::MaxRoundsExceeded { .. } => "cascade.max_rounds_exceeded",
            Error::LengthMismatch { .. } => "cascade.length_mismatch",
            Error::NonpositiveDiagonal { .. } => "cascade.nonpositive_diagonal",
            Error::ZeroComplierMass => "cascade.zero_complier_mass",
            Error::NoPivotalVariation => "mechanism.no_pivotal_variation",
            Error::UndersubscribedProgram { .. } => "mechanism.undersubscribed_program",
            Error::NoEquilibrium(_) => "mechanism.no_equilibrium",
            Error::InfeasibleComplierTargets(_) => "synth.infeasible_complier_targets",
            Error::Schema(_) => "io.schema_error",
            Error::Parse { .. } => "io.parse_error",
            Error::FixtureMismatch(_) => "io.fixture_mismatch",
            Error::Usage(_) => "cli.usage",
            Error::Io(_) => "io.io_error",
            Error::Json(_) => "io.json_error",
        }
    }

    /// Process exit status: 2 for usage, 3 for data problems, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Schema(_)
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::InvalidInput(_)
            | Error::NotJustIdentified { .. }
            | Error::LengthMismatch { .. }
            | Error::TooFewClusters { .. }
            | Error::NoPivotalVariation
            | Error::UndersubscribedProgram { .. }
            | Error::InfeasibleComplierTargets(_)
            | Error::FixtureMismatch(_) => 3,
            _ => 4,
        }
    }
}

/// Non-fatal diagnostics attached to results.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// |π_kk| below the configured threshold; instrument relevance is doubtful.
    WeakDiagonal { k: usize, value: f64 },
    /// The first-stage matrix is invertible but poorly conditioned.
    IllConditioned { condition: f64 },
    /// A group label has no members; its outcome vector is identically zero.
    EmptyGroup { label: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::WeakDiagonal { k, value } => {
                write!(f, "weak diagonal: |pi[{k},{k}]| = {value:.3e}")
            }
            Warning::IllConditioned { condition } => {
                write!(f, "first-stage matrix is ill-conditioned (condition number {condition:.3e})")
            }
            Warning::EmptyGroup { label } => write!(f, "group '{label}' is empty"),
        }
    }
}
