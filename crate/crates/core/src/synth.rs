//! Synthetic applicant populations.
//!
//! Preferences come from a common selectivity index scaled by merit plus
//! logistic taste noise, so strong applicants tend to rank the selective
//! programs first. `taste_scale` controls how much applicants disagree and
//! therefore how much rejected applicants spill over into other programs.
//! Treatment gains are `Δ_j + σ_h·η_ij` where `η_ij` is partly aligned with
//! the applicant's taste for program j.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cascade::three_program_beta2;
use crate::error::{Error, Result};
use crate::mechanism::{Applicant, Population};
use crate::seed;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub k: usize,
    #[serde(default = "default_brackets")]
    pub brackets: u32,
    /// Relative bracket frequencies, lowest bracket first. Uniform if absent.
    #[serde(default)]
    pub bracket_weights: Option<Vec<f64>>,
    /// Per-program selectivity index. Defaults to `1, 1 - 1/K, ...`.
    #[serde(default)]
    pub selectivity: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub taste_scale: f64,
    /// Programs ranked per applicant; defaults to `min(K, 3)`.
    #[serde(default)]
    pub list_length: Option<usize>,
    /// Base gains Δ_j = E[Y(j) - Y(0)].
    pub base_effects: Vec<f64>,
    #[serde(default)]
    pub sigma_h: f64,
    /// Correlation between the heterogeneous gain term and taste.
    #[serde(default = "half")]
    pub gain_taste_corr: f64,
    #[serde(default = "one")]
    pub y0_sd: f64,
    /// (p02, p12) for the three-program scenario.
    #[serde(default)]
    pub complier_targets: Option<(f64, f64)>,
    /// (e20, e21, e10) for the three-program scenario; derived from
    /// `base_effects` when absent.
    #[serde(default)]
    pub scenario_effects: Option<(f64, f64, f64)>,
    /// Capacity as a share of first-choice demand.
    #[serde(default = "default_share")]
    pub capacity_share: f64,
    pub seed: u64,
}

fn default_brackets() -> u32 {
    30
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_share() -> f64 {
    0.6
}

impl SynthConfig {
    /// Defaults for everything but size, effects and seed.
    pub fn new(n: usize, base_effects: Vec<f64>, seed: u64) -> Self {
        SynthConfig {
            n,
            k: base_effects.len(),
            brackets: default_brackets(),
            bracket_weights: None,
            selectivity: None,
            taste_scale: 1.0,
            list_length: None,
            base_effects,
            sigma_h: 0.0,
            gain_taste_corr: 0.5,
            y0_sd: 1.0,
            complier_targets: None,
            scenario_effects: None,
            capacity_share: default_share(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n == 0 || self.k == 0 {
            return bad("n and k must be at least 1");
        }
        if self.brackets == 0 {
            return bad("need at least one merit bracket");
        }
        if self.base_effects.len() != self.k {
            return bad("base_effects must have k entries");
        }
        if !(self.sigma_h >= 0.0) || !(self.y0_sd >= 0.0) || !(self.taste_scale >= 0.0) {
            return bad("sigma_h, y0_sd and taste_scale must be nonnegative");
        }
        if !(-1.0..=1.0).contains(&self.gain_taste_corr) {
            return bad("gain_taste_corr must lie in [-1, 1]");
        }
        if let Some(w) = &self.bracket_weights {
            if w.len() != self.brackets as usize || w.iter().any(|v| !(*v >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
                return bad("bracket_weights needs one nonnegative weight per bracket");
            }
        }
        if self.selectivity.as_ref().is_some_and(|s| s.len() != self.k) {
            return bad("selectivity must have k entries");
        }
        if self.list_length == Some(0) {
            return bad("list_length must be at least 1");
        }
        if !(self.capacity_share > 0.0) {
            return bad("capacity_share must be positive");
        }
        Ok(())
    }

    fn selectivity(&self) -> Vec<f64> {
        self.selectivity
            .clone()
            .unwrap_or_else(|| (0..self.k).map(|j| 1.0 - j as f64 / self.k as f64).collect())
    }
}

/// Covariate names attached to every synthetic population.
pub const COVARIATES: [&str; 2] = ["age", "prior_score"];

fn logistic<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    (u / (1.0 - u)).ln()
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn label<R: Rng>(rng: &mut R) -> String {
    if rng.random_bool(0.5) { "f" } else { "m" }.to_string()
}

fn covariates<R: Rng>(rng: &mut R, merit: u32, brackets: u32) -> Vec<f64> {
    vec![20.0 + 2.0 * normal(rng), merit as f64 / brackets as f64 + 0.5 * normal(rng)]
}

/// Applicant `i` draws from stream `seed::rng(cfg.seed, i)`, so populations
/// are reproducible and can be generated in any order.
pub fn generate_population(cfg: &SynthConfig) -> Result<Population> {
    cfg.validate()?;
    let k = cfg.k;
    let sel = cfg.selectivity();
    let len = cfg.list_length.unwrap_or(k.min(3)).min(k);
    let weights = cfg.bracket_weights.clone().unwrap_or_else(|| vec![1.0; cfg.brackets as usize]);
    let total: f64 = weights.iter().sum();
    // Logistic noise has standard deviation π/√3.
    let taste_sd = std::f64::consts::PI / 3f64.sqrt();
    let corr = cfg.gain_taste_corr;
    let applicants = (0..cfg.n)
        .map(|i| {
            let mut rng = seed::rng(cfg.seed, i as u64);
            let mut u = rng.random::<f64>() * total;
            let mut bracket = 0;
            while bracket + 1 < weights.len() && u >= weights[bracket] {
                u -= weights[bracket];
                bracket += 1;
            }
            let merit = bracket as u32 + 1;
            let m = merit as f64 / cfg.brackets as f64;
            let taste: Vec<f64> = (0..k).map(|_| logistic(&mut rng)).collect();
            let utility: Vec<f64> = (0..k).map(|j| sel[j] * m + cfg.taste_scale * taste[j]).collect();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| utility[b].total_cmp(&utility[a]).then(a.cmp(&b)));
            order.truncate(len);
            let y0 = cfg.y0_sd * normal(&mut rng);
            let mut po = vec![y0];
            for j in 0..k {
                let idio = normal(&mut rng);
                let eta = corr * taste[j] / taste_sd + (1.0 - corr * corr).sqrt() * idio;
                let gain = if cfg.sigma_h == 0.0 { cfg.base_effects[j] } else { cfg.base_effects[j] + cfg.sigma_h * eta };
                po.push(y0 + gain);
            }
            let label = Some(label(&mut rng));
            let covariates = covariates(&mut rng, merit, cfg.brackets);
            Applicant { merit, prefs: order, po, label, covariates }
        })
        .collect();
    Population::new(k, applicants, COVARIATES.iter().map(|s| s.to_string()).collect())
}

/// `max(1, round(share · first-choice demand))` for every program.
pub fn capacities(pop: &Population, share: f64) -> Vec<usize> {
    let mut first = vec![0usize; pop.k];
    for a in &pop.applicants {
        if let Some(&p) = a.prefs.first() {
            first[p] += 1;
        }
    }
    first.iter().map(|&d| ((share * d as f64).round() as usize).max(1)).collect()
}

#[derive(Debug, Clone)]
pub struct ThreeProgramScenario {
    pub population: Population,
    pub capacities: Vec<usize>,
    /// β₂ from the closed form at the configured targets and effects.
    pub predicted_beta2: f64,
    /// Realized shares of 0→2 and 1→2 compliers in program 2's cutoff bracket.
    pub realized_shares: (f64, f64),
    pub effects: (f64, f64, f64),
}

/// Two programs plus the outside option, built by placing applicant types in
/// merit brackets:
///
/// - bracket 4: sure admits, split between the two programs;
/// - bracket 3 (program 2's cutoff): `[2]` types are 0→2 compliers, `[2,1]`
///   types are 1→2 compliers, `[1,2]` types always take program 1;
/// - bracket 2 (program 1's cutoff): `[1]` types, the 0→1 margin;
/// - bracket 1: `[1]` types that are always rejected.
///
/// Program 1's cutoff sits below program 2's, so the program-1 lottery never
/// moves anyone into program 2 (π₂₁ = 0).
pub fn scenario_three_program(cfg: &SynthConfig) -> Result<ThreeProgramScenario> {
    if cfg.k != 2 {
        return Err(Error::InvalidInput("the three-program scenario has two programs plus the outside option (k = 2)".into()));
    }
    cfg.validate()?;
    let (p02, p12) = cfg
        .complier_targets
        .ok_or_else(|| Error::InfeasibleComplierTargets("complier_targets must be set".into()))?;
    if !(p02 >= 0.0 && p12 >= 0.0) || p02 + p12 > 1.0 + 1e-12 || p02 + p12 <= 0.0 {
        return Err(Error::InfeasibleComplierTargets(format!(
            "need p02, p12 >= 0 with 0 < p02 + p12 <= 1, got ({p02}, {p12})"
        )));
    }
    let effects = cfg.scenario_effects.unwrap_or_else(|| {
        let (d1, d2) = (cfg.base_effects[0], cfg.base_effects[1]);
        (d2, d2 - d1, d1)
    });
    let (e20, e21, e10) = effects;
    let predicted_beta2 = three_program_beta2(p02, p12, e20, e21, e10)?;

    let n = cfg.n;
    let n_top = n / 10;
    let n_b3 = 3 * n / 10;
    let n_b2 = n / 2;
    let n_b1 = n - n_top - n_b3 - n_b2;
    let n02 = (p02 * n_b3 as f64).round() as usize;
    let n12 = ((p12 * n_b3 as f64).round() as usize).min(n_b3 - n02);
    let never = n_b3 - n02 - n12;
    if n02 + n12 < 2 || n_b2 < 4 || (p02 > 0.0 && n02 == 0) || (p12 > 0.0 && n12 == 0) {
        return Err(Error::InfeasibleComplierTargets(format!("population of {n} is too small for targets ({p02}, {p12})")));
    }

    let mut applicants = Vec::with_capacity(n);
    let mut push = |i: usize, merit: u32, prefs: Vec<usize>, kind: u8| {
        let mut rng = seed::rng(cfg.seed, i as u64);
        let y0 = cfg.y0_sd * normal(&mut rng);
        let mut noise = || if cfg.sigma_h > 0.0 { cfg.sigma_h * normal(&mut rng) } else { 0.0 };
        let (y1, y2) = match kind {
            // 0→2 compliers carry e20 on the direct margin.
            0 => (y0 + e10 + noise(), y0 + e20 + noise()),
            // everyone else is valued along 0 → 1 → 2
            _ => {
                let y1 = y0 + e10 + noise();
                (y1, y1 + e21 + noise())
            }
        };
        let label = Some(label(&mut rng));
        let covariates = covariates(&mut rng, merit, 4);
        applicants.push(Applicant { merit, prefs, po: vec![y0, y1, y2], label, covariates });
    };
    let mut i = 0;
    for t in 0..n_top {
        push(i, 4, if t % 2 == 0 { vec![1] } else { vec![0] }, 1);
        i += 1;
    }
    for _ in 0..n02 {
        push(i, 3, vec![1], 0);
        i += 1;
    }
    for _ in 0..n12 {
        push(i, 3, vec![1, 0], 1);
        i += 1;
    }
    for _ in 0..never {
        push(i, 3, vec![0, 1], 1);
        i += 1;
    }
    for _ in 0..n_b2 + n_b1 {
        let merit = if i < n_top + n_b3 + n_b2 { 2 } else { 1 };
        push(i, merit, vec![0], 1);
        i += 1;
    }
    let top2 = n_top.div_ceil(2);
    let top1 = n_top / 2;
    let capacities = vec![top1 + never + n12 + n_b2 / 4, top2 + (n02 + n12) / 2];
    let population = Population::new(2, applicants, COVARIATES.iter().map(|s| s.to_string()).collect())?;
    Ok(ThreeProgramScenario {
        population,
        capacities,
        predicted_beta2,
        realized_shares: (n02 as f64 / n_b3 as f64, n12 as f64 / n_b3 as f64),
        effects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_switch() {
        let cfg = SynthConfig::new(500, vec![0.2, -0.1, 0.05], 3);
        let pop = generate_population(&cfg).unwrap();
        for a in &pop.applicants {
            for j in 0..3 {
                assert!((a.po[j + 1] - a.po[0] - cfg.base_effects[j]).abs() < 1e-12);
            }
        }
        assert_eq!(pop, generate_population(&cfg).unwrap());
    }

    #[test]
    fn preferences_are_valid() {
        let mut cfg = SynthConfig::new(300, vec![0.1; 5], 9);
        cfg.list_length = Some(4);
        let pop = generate_population(&cfg).unwrap();
        assert!(pop.applicants.iter().all(|a| a.prefs.len() == 4));
        assert!(pop.applicants.iter().all(|a| (1..=30).contains(&a.merit)));
    }

    #[test]
    fn scenario_prediction_and_shares() {
        let mut cfg = SynthConfig::new(50_000, vec![0.4, 0.7], 1);
        cfg.complier_targets = Some((0.5, 0.5));
        cfg.scenario_effects = Some((1.0, 0.3, 0.4));
        let s = scenario_three_program(&cfg).unwrap();
        assert!((s.predicted_beta2 - 0.85).abs() < 1e-12);
        assert!((s.realized_shares.0 - 0.5).abs() <= 0.05 && (s.realized_shares.1 - 0.5).abs() <= 0.05);

        cfg.complier_targets = Some((0.3, 0.0));
        assert_eq!(scenario_three_program(&cfg).unwrap().predicted_beta2, 1.0);

        cfg.scenario_effects = None;
        cfg.complier_targets = Some((0.4, 0.4));
        assert!((scenario_three_program(&cfg).unwrap().predicted_beta2 - 0.7).abs() < 1e-12);

        cfg.complier_targets = Some((0.7, 0.6));
        assert!(matches!(scenario_three_program(&cfg), Err(Error::InfeasibleComplierTargets(_))));
    }
}
