//! Command implementations. The binary only parses arguments and maps
//! errors to exit codes.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{RunConfig, Scenario};
use super::csv as files;
use super::fixtures::{self, PublishedFixtures};
use crate::cascade::{
    block_coefficients, block_weights, cascade_solve, conditional_entrant_effect, group_outcome_decomposition,
    neumann_solve, BlockSpec, CascadeOptions, VacancyMatrix,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimator::{
    cluster_bootstrap, estimate, fit_2sls, fit_first_stage, fit_reduced_form, wald_ratios, EstimateSet, FirstStage,
    Statistic,
};
use crate::linalg::{Mat, Vector};
use crate::mechanism::{
    balance_check, market_dataset, market_oracle, oracle_all, simulate_iv_dataset, MechanismConfig, Population,
};
use crate::synth::{self, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "cascade-iv", version, about = "Multi-treatment IV with cascade effects in capacity-constrained allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate lottery replications and write a dataset plus the vacancy-chain log.
    Simulate(Opts),
    /// Fit 2SLS, Wald ratios and cascade effects with clustered standard errors.
    Estimate(Opts),
    /// Sum the cascade round by round and write the trace.
    Cascade(Opts),
    /// Compare the slot-expansion oracle with 2SLS on simulated data.
    Verify(Opts),
    /// Cluster bootstrap for one statistic.
    Bootstrap(Opts),
    /// Test predetermined covariates against the luck variable.
    Balance(Opts),
    /// Check the embedded published-table fixtures.
    Fixtures(Opts),
    /// Fixed-supply market: supply-expansion oracle against 2SLS.
    Market(Opts),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub bootstrap_reps: Option<usize>,
    /// Treatment blocks, e.g. `stem:1,2;care:3` (one-based).
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long)]
    pub group_col: Option<String>,
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Covariate CSV aligned with the dataset rows.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Built-in fixture: `table1`, `figure1` or `diagonal`.
    #[arg(long)]
    pub fixture: Option<String>,
    /// `beta`, `wald`, `cascade_delta` or `conditional_entrant:<label>`.
    #[arg(long)]
    pub statistic: Option<String>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Estimate(_) => "estimate",
            Command::Cascade(_) => "cascade",
            Command::Verify(_) => "verify",
            Command::Bootstrap(_) => "bootstrap",
            Command::Balance(_) => "balance",
            Command::Fixtures(_) => "fixtures",
            Command::Market(_) => "market",
        }
    }

    fn opts(&self) -> &Opts {
        match self {
            Command::Simulate(o)
            | Command::Estimate(o)
            | Command::Cascade(o)
            | Command::Verify(o)
            | Command::Bootstrap(o)
            | Command::Balance(o)
            | Command::Fixtures(o)
            | Command::Market(o) => o,
        }
    }
}

pub fn parse_statistic(s: &str) -> Result<Statistic> {
    match s {
        "beta" => Ok(Statistic::Beta),
        "wald" => Ok(Statistic::Wald),
        "cascade_delta" => Ok(Statistic::CascadeDelta),
        _ => match s.strip_prefix("conditional_entrant:") {
            Some(g) if !g.is_empty() => Ok(Statistic::ConditionalEntrant { group: g.to_string() }),
            _ => Err(Error::Usage(format!("unknown statistic '{s}'"))),
        },
    }
}

/// Merges the config file (if any) with flags.
pub fn resolve(opts: &Opts) -> Result<RunConfig> {
    let mut cfg = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => { $( if opts.$f.is_some() { cfg.$f = opts.$f.clone(); } )* };
    }
    over!(seed, reps, tol, max_rounds, out, bootstrap_reps, blocks, group_col, data, covariates, fixture);
    if let Some(s) = &opts.statistic {
        cfg.statistic = Some(parse_statistic(s)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command, writing files under the output directory and a
/// human-readable summary to `log`.
pub fn run(command: &Command, log: &mut dyn Write) -> Result<()> {
    let cfg = resolve(command.opts())?;
    match command {
        Command::Simulate(_) => cmd_simulate(&cfg, log),
        Command::Estimate(_) => cmd_estimate(&cfg, log),
        Command::Cascade(_) => cmd_cascade(&cfg, log),
        Command::Verify(_) => cmd_verify(&cfg, log),
        Command::Bootstrap(_) => cmd_bootstrap(&cfg, log),
        Command::Balance(_) => cmd_balance(&cfg, log),
        Command::Fixtures(_) => cmd_fixtures(&cfg, log),
        Command::Market(_) => cmd_market(&cfg, log),
    }
}

/// Error payload written to stderr by the binary.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": { "code": e.code(), "message": e.to_string(), "exit_code": e.exit_code() } }).to_string()
}

/// Homogeneous three-program population used when no synth config is given.
pub fn default_synth(seed: u64) -> SynthConfig {
    let mut s = SynthConfig::new(20_000, vec![0.2, -0.1, 0.05], seed);
    s.brackets = 20;
    s
}

fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.data.as_ref().ok_or_else(|| Error::Usage("--data is required".into()))?;
    files::load_dataset_csv(path, cfg.group_col())
}

fn fmt_row(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| if x.is_nan() { String::new() } else { x.to_string() }).collect()
}

struct World {
    pop: Population,
    mech: MechanismConfig,
    predicted_beta2: Option<f64>,
}

/// Population and capacities from a population file or a synth config.
fn world(cfg: &RunConfig, seed: u64) -> Result<World> {
    let exclusive = cfg.mutually_exclusive.unwrap_or(true);
    let build = |pop: Population, caps: Vec<usize>, predicted_beta2| {
        let mut mech = MechanismConfig::new(caps, seed);
        mech.mutually_exclusive = exclusive;
        World { pop, mech, predicted_beta2 }
    };
    if let Some(path) = &cfg.population {
        let pop = files::load_population_csv(path)?;
        let caps = cfg.capacities.clone().ok_or_else(|| Error::Usage("a population file needs capacities".into()))?;
        return Ok(build(pop, caps, None));
    }
    let synth = cfg.synth.clone().unwrap_or_else(|| default_synth(seed));
    match cfg.scenario {
        Scenario::Generic => {
            let pop = synth::generate_population(&synth)?;
            let caps = cfg.capacities.clone().unwrap_or_else(|| synth::capacities(&pop, synth.capacity_share));
            Ok(build(pop, caps, None))
        }
        Scenario::ThreeProgram => {
            let s = synth::scenario_three_program(&synth)?;
            let caps = cfg.capacities.clone().unwrap_or(s.capacities);
            Ok(build(s.population, caps, Some(s.predicted_beta2)))
        }
    }
}

fn cmd_simulate(cfg: &RunConfig, log: &mut dyn Write) -> Result<()> {
    let seed = cfg.require_seed("simulate")?;
    let reps = cfg.reps.unwrap_or(50);
    let w = world(cfg, seed)?;
    let out = cfg.out_dir()?;
    let prov = files::provenance("simulate", Some(seed));
    let sim = simulate_iv_dataset(&w.pop, &w.mech, reps, seed)?;
    files::write_dataset_csv(&out.join("dataset.csv"), &sim.data, &prov)?;
    files::write_matrix_csv(&out.join("covariates.csv"), &w.pop.covariate_names, &sim.covariates(&w.pop), &prov)?;
    files::write_population_csv(&out.join("population.csv"), &w.pop, &prov)?;
    let oracles = oracle_all(&w.pop, &w.mech, reps, seed)?;
    let mut events = BufWriter::new(files::create_file(&out.join("events.jsonl"))?);
    let mut n_events = 0;
    for o in &oracles {
        for e in &o.events {
            serde_json::to_writer(&mut events, e)?;
            events.write_all(b"\n")?;
            n_events += 1;
        }
    }
    events.flush()?;
    writeln!(
        log,
        "simulated {reps} replications: {} rows, {} clusters, {n_events} chain events -> {}",
        sim.data.n(),
        sim.data.n_clusters(),
        out.display()
    )?;
    Ok(())
}

fn table1_estimates() -> Result<EstimateSet> {
    let fx = PublishedFixtures::load()?;
    let col = |f: fn(&fixtures::Table1Row) -> f64| fx.table1.iter().map(f).collect::<Vec<_>>();
    EstimateSet::from_reported(&col(|r| r.t), &col(|r| r.w), &col(|r| r.se_t), &col(|r| r.se_w))
}

fn cmd_estimate(cfg: &RunConfig, log: &mut dyn Write) -> Result<()> {
    let out = cfg.out_dir()?;
    let prov = files::provenance("estimate", cfg.seed);
    if let Some(name) = &cfg.fixture {
        if name != "table1" {
            return Err(Error::Usage(format!("estimate supports --fixture table1, not '{name}'")));
        }
        let est = table1_estimates()?;
        files::write_estimates_csv(&out.join("estimates.csv"), &est, None, &prov)?;
        write!(log, "{}", files::format_estimates_table(&est, Some(&fixtures::FIELDS)))?;
        let report = fixtures::fixture_report()?;
        let failures: Vec<String> =
            report.checks.iter().filter(|c| c.name.starts_with("table1.") && !c.pass).map(|c| c.name.clone()).collect();
        if !failures.is_empty() {
            return Err(Error::FixtureMismatch(failures));
        }
        writeln!(log, "cascade column matches the printed values within {}", fixtures::TOLERANCE)?;
        return Ok(());
    }
    let data = load_data(cfg)?;
    let est = estimate(&data)?;
    let boot = match cfg.bootstrap_reps {
        Some(reps) => {
            let seed = cfg.require_seed("estimate --bootstrap-reps")?;
            Some(cluster_bootstrap(&data, &cfg.statistic.clone().unwrap_or(Statistic::Beta), reps, seed)?)
        }
        None => None,
    };
    files::write_estimates_csv(&out.join("estimates.csv"), &est, boot.as_ref(), &prov)?;
    write!(log, "{}", files::format_estimates_table(&est, None))?;
    if let Some(spec) = &cfg.blocks {
        let fs = est.first_stage.clone().expect("fitted estimates carry their first stage");
        let spec = block_weights(&fs, &BlockSpec::parse(spec, fs.k())?)?;
        let beta = Vector::from_vec(est.beta.clone());
        let coefs = block_coefficients(&spec, &beta)?;
        let mut rows = Vec::new();
        for (b, (name, c)) in spec.blocks.iter().zip(&coefs) {
            for (m, w) in b.members.iter().zip(&b.weights) {
                rows.push(vec![name.clone(), (m + 1).to_string(), w.to_string(), c.to_string()]);
            }
            writeln!(log, "block {name}: beta = {c:.5}")?;
        }
        files::write_rows_csv(&out.join("blocks.csv"), &["block", "treatment", "weight", "block_beta"], &rows, &prov)?;
    }
    if data.group().is_some() {
        write_groups(&data, &est, &out, &prov, log)?;
    }
    Ok(())
}

/// Conditional-entrant effects and the additive outcome decomposition for
/// every level of the group column.
fn write_groups(data: &Dataset, est: &EstimateSet, out: &Path, prov: &str, log: &mut dyn Write) -> Result<()> {
    let labels = data.group().expect("checked by caller").to_vec();
    let levels = data.group_levels();
    let beta = Vector::from_vec(est.beta.clone());
    let decomposition = group_outcome_decomposition(data, &labels, &levels)?;
    let mut rows = Vec::new();
    for (g, level) in levels.iter().enumerate() {
        let sub = data.group_subsample(level)?;
        let (fs, rf) = (fit_first_stage(&sub)?, fit_reduced_form(&sub)?);
        let t = conditional_entrant_effect(&rf, &fs, &beta)?;
        let w = wald_ratios(&rf, &fs)?;
        for k in 0..data.k() {
            rows.push(vec![
                level.clone(),
                (k + 1).to_string(),
                t[k].to_string(),
                w[k].to_string(),
                decomposition.betas[g][k].to_string(),
            ]);
        }
        writeln!(log, "group {level}: T|g = {:?}", t.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>())?;
    }
    files::write_rows_csv(&out.join("groups.csv"), &["group", "treatment", "t_conditional", "wald_group", "beta_decomposed"], &rows, prov)
}

fn fixture_system(name: &str) -> Result<(FirstStage, Vector)> {
    let fx = PublishedFixtures::load()?;
    let w = Vector::from_iterator(fx.table1.len(), fx.table1.iter().map(|r| r.w));
    match name {
        "figure1" => Ok((fx.figure1_first_stage()?, w)),
        "diagonal" => Ok((FirstStage::new(Mat::from_diagonal(&fx.figure1_first_stage()?.diag()))?, w)),
        _ => Err(Error::Usage(format!("unknown fixture '{name}' (expected figure1 or diagonal)"))),
    }
}

fn cmd_cascade(cfg: &RunConfig, log: &mut dyn Write) -> Result<()> {
    let out = cfg.out_dir()?;
    let prov = files::provenance("cascade", cfg.seed);
    let (fs, w) = match &cfg.fixture {
        Some(name) => fixture_system(name)?,
        None => {
            let data = load_data(cfg)?;
            let fs = fit_first_stage(&data)?;
            let w = wald_ratios(&fit_reduced_form(&data)?, &fs)?;
            (fs, w)
        }
    };
    let vm = VacancyMatrix::from_first_stage(&fs)?;
    let tol = cfg.tol.unwrap_or(1e-10);
    let sol = neumann_solve(&vm, &w, tol, cfg.max_rounds.unwrap_or(10_000))?;
    files::write_trace_csv(&out.join("trace.csv"), &sol, &prov)?;
    // Reduced form implied by W, for a cross-check against the direct solve.
    let rf = fs.diag().component_mul(&w);
    let direct = cascade_solve(&fs, &rf, &CascadeOptions::default());
    let rows: Vec<Vec<String>> =
        (0..w.len()).map(|k| { let mut r = vec![(k + 1).to_string()]; r.extend(fmt_row(&[sol.t[k], sol.w[k], sol.delta[k]])); r }).collect();
    files::write_rows_csv(&out.join("cascade.csv"), &["treatment", "T", "W", "delta"], &rows, &prov)?;
    writeln!(log, "Neumann series: {} rounds, rho(|M|) <= {:.6}", sol.rounds.as_ref().map_or(0, Vec::len), sol.rho_estimate)?;
    for k in 0..w.len() {
        writeln!(log, "{:>3}  T = {:>10.6}  W = {:>10.6}  delta = {:>10.6}", k + 1, sol.t[k], sol.w[k], sol.delta[k])?;
    }
    if let Ok(d) = direct {
        writeln!(log, "max |neumann - direct| = {:.3e}", (&d.t - &sol.t).amax())?;
    }
    Ok(())
}

fn cmd_verify(cfg: &RunConfig, log: &mut dyn Write) -> Result<()> {
    let seed = cfg.require_seed("verify")?;
    let reps = cfg.reps.unwrap_or(100);
    let w = world(cfg, seed)?;
    let out = cfg.out_dir()?;
    let prov = files::provenance("verify", Some(seed));
    let sim = simulate_iv_dataset(&w.pop, &w.mech, reps, seed)?;
    let est = estimate(&sim.data)?;
    let oracles = oracle_all(&w.pop, &w.mech, reps, seed)?;
    let mut rows = Vec::new();
    writeln!(log, "{:>7} {:>10} {:>9} {:>10} {:>9} {:>8}", "program", "oracle", "se", "beta", "se", "z")?;
    for o in &oracles {
        let k = o.program;
        let combined = (o.se.powi(2) + est.se_beta[k].powi(2)).sqrt();
        let z = (o.effect - est.beta[k]) / combined;
        let agree = o.undersubscribed || z.abs() < 3.0;
        writeln!(log, "{:>7} {:>10.5} {:>9.5} {:>10.5} {:>9.5} {:>8.3}", k + 1, o.effect, o.se, est.beta[k], est.se_beta[k], z)?;
        rows.push(vec![
            (k + 1).to_string(),
            o.effect.to_string(),
            o.se.to_string(),
            est.beta[k].to_string(),
            est.se_beta[k].to_string(),
            z.to_string(),
            (!o.undersubscribed).to_string(),
            agree.to_string(),
        ]);
    }
    if let Some(b2) = w.predicted_beta2 {
        writeln!(log, "closed-form beta_2 = {b2:.5}")?;
    }
    files::write_rows_csv(
        &out.join("verify.csv"),
        &["program", "oracle", "oracle_se", "beta", "beta_se", "z", "oversubscribed", "agree"],
        &rows,
        &prov,
    )
}

fn cmd_bootstrap(cfg: &RunConfig, log: &mut dyn Write) -> Result<()> {
    let seed = cfg.require_seed("bootstrap")?;
    let data = load_data(cfg)?;
    let stat = cfg.statistic.clone().unwrap_or(Statistic::Beta);
    let reps = cfg.bootstrap_reps.unwrap_or(200);
    let est = estimate(&data)?;
    let boot = cluster_bootstrap(&data, &stat, reps, seed)?;
    let out = cfg.out_dir()?;
    files::write_estimates_csv(&out.join("estimates.csv"), &est, Some(&boot), &files::provenance("bootstrap", Some(seed)))?;
    writeln!(log, "{} bootstrap of {} ({} failed replications)", reps, boot.statistic, boot.failed)?;
    for k in 0..boot.point.len() {
        writeln!(
            log,
            "{:>3}  {:>10.5}  se {:>9.5}  95% [{:.5}, {:.5}]",
            k + 1,
            boot.point[k],
            boot.se[k],
            boot.ci_lower[k],
            boot.ci_upper[k]
        )?;
    }
    Ok(())
}

fn cmd_balance(cfg: &RunConfig, log: &mut dyn Write) -> Result<()> {
    let (data, names, cov) = match (&cfg.data, &cfg.covariates) {
        (Some(_), Some(c)) => {
            let (names, m) = files::load_matrix_csv(c)?;
            (load_data(cfg)?, names, m)
        }
        (Some(_), None) => return Err(Error::Usage("--data needs --covariates".into())),
        _ => {
            let seed = cfg.require_seed("balance")?;
            let w = world(cfg, seed)?;
            let sim = simulate_iv_dataset(&w.pop, &w.mech, cfg.reps.unwrap_or(50), seed)?;
            let cov = sim.covariates(&w.pop);
            (sim.data, w.pop.covariate_names.clone(), cov)
        }
    };
    let rep = balance_check(&data, &cov)?;
    let mut rows = Vec::new();
    for (c, name) in names.iter().enumerate() {
        writeln!(log, "{name:<16} coef {:>10.5}  se {:>9.5}", rep.coef[c], rep.se[c])?;
        rows.push(vec![name.clone(), rep.coef[c].to_string(), rep.se[c].to_string(), String::new(), String::new(), String::new()]);
    }
    rows.push(vec!["joint".into(), String::new(), String::new(), rep.wald.to_string(), rep.f_stat.to_string(), rep.p_value.to_string()]);
    writeln!(log, "joint Wald {:.4} on {} df, F = {:.4}, p = {:.4}", rep.wald, rep.df, rep.f_stat, rep.p_value)?;
    let out = cfg.out_dir()?;
    files::write_rows_csv(&out.join("balance.csv"), &["covariate", "coef", "se", "wald", "f", "p_value"], &rows, &files::provenance("balance", cfg.seed))
}

fn cmd_fixtures(cfg: &RunConfig, log: &mut dyn Write) -> Result<()> {
    let report = fixtures::fixture_report()?;
    for c in &report.checks {
        writeln!(log, "{} {:<36} expected {:<20} computed {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.expected, c.computed)?;
    }
    if cfg.out.is_some() {
        let rows: Vec<Vec<String>> =
            report.checks.iter().map(|c| vec![c.name.clone(), c.expected.clone(), c.computed.clone(), c.gap.clone(), c.pass.to_string()]).collect();
        files::write_rows_csv(&cfg.out_dir()?.join("fixtures.csv"), &["check", "expected", "computed", "gap", "pass"], &rows, &files::provenance("fixtures", None))?;
    }
    let failures = report.failures();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::FixtureMismatch(failures))
    }
}

fn cmd_market(cfg: &RunConfig, log: &mut dyn Write) -> Result<()> {
    let mkt = cfg.market.as_ref().ok_or_else(|| Error::Usage("market needs a 'market' section in --config".into()))?;
    let step = cfg.step.unwrap_or(1.0);
    let beta = fit_2sls(&market_dataset(mkt, 0.5)?)?;
    let mut rows = Vec::new();
    for k in 0..mkt.k() {
        let o = market_oracle(mkt, k, step)?;
        writeln!(log, "good {}: oracle {:.8}  2SLS {:.8}", k + 1, o.per_unit, beta[k])?;
        rows.push(fmt_row(&[(k + 1) as f64, o.per_unit, beta[k], o.per_unit - beta[k]]));
    }
    files::write_rows_csv(&cfg.out_dir()?.join("market.csv"), &["good", "oracle", "beta", "gap"], &rows, &files::provenance("market", None))
}
