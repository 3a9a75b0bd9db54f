//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a subset:
//! `cargo test --test acceptance -- 3 5`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cascade_iv::cascade::{
    cascade_solve, conditional_entrant_from_data, group_outcome_decomposition, neumann_solve, spectral_radius,
    three_program_beta2, two_program_closed_form, CascadeOptions, VacancyMatrix,
};
use cascade_iv::estimator::{estimate, fit_2sls, fit_first_stage, fit_reduced_form, FirstStage};
use cascade_iv::io::cli::{run, Command, Opts};
use cascade_iv::io::fixtures::fixture_report;
use cascade_iv::linalg::{Mat, Vector};
use cascade_iv::mechanism::{
    balance_check, blocking_pairs, lottery_draw, luck_variable, market_dataset, market_oracle, oracle_all,
    run_clearing, simulate_iv_dataset, Applicant, Consumer, MarketConfig, MechanismConfig, Population,
};
use cascade_iv::synth::{self, SynthConfig};
use cascade_iv::{Dataset, Error};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s(e: Error) -> String {
    format!("{} ({})", e, e.code())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Π with unit-scale diagonal and small off-diagonals, so (Πᵀ)⁻¹ is well conditioned.
fn random_pi(r: &mut ChaCha8Rng, k: usize, off: f64) -> Mat {
    Mat::from_fn(k, k, |i, j| if i == j { r.random_range(0.5..1.5) } else { r.random_range(-off..off) / k as f64 })
}

fn rel_err(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

// 1. T = (Πᵀ)⁻¹ RF recovers β when RF = Πᵀβ.
fn c1() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let k = r.random_range(1..=10);
        let pi = random_pi(&mut r, k, 0.8);
        let beta = Vector::from_fn(k, |_, _| r.random_range(-1.0..1.0));
        let rf = pi.transpose() * &beta;
        let fs = FirstStage::new(pi).map_err(e2s)?;
        let sol = cascade_solve(&fs, &rf, &CascadeOptions::default()).map_err(e2s)?;
        worst = worst.max(rel_err(&sol.t, &beta));
    }
    ensure(worst < 1e-10, || format!("max relative error {worst:.3e}"))?;
    Ok(format!("1000 instances, max relative error {worst:.2e}"))
}

/// Vacancy matrix with a target spectral radius, built on |M| then given random signs.
fn random_vacancy(r: &mut ChaCha8Rng, k: usize, rho: f64) -> Mat {
    let mut m = Mat::from_fn(k, k, |i, j| if i == j { 0.0 } else { r.random_range(0.0..1.0) });
    let cur = spectral_radius(&m, 10_000, 0);
    if cur > 0.0 {
        m *= rho / cur;
    }
    m.map(|v| if r.random_bool(0.5) { v } else { -v })
}

/// Π = D(I − Mᵀ) so that −D⁻¹Pᵀ = M for a chosen diagonal D.
fn pi_from_vacancy(r: &mut ChaCha8Rng, m: &Mat) -> Mat {
    let k = m.nrows();
    let d = Vector::from_fn(k, |_, _| r.random_range(0.5..1.5));
    Mat::from_fn(k, k, |row, col| if row == col { d[row] } else { -m[(col, row)] * d[col] })
}

// 2. Neumann rounds equal the direct solve below ρ = 1 and are refused above it.
fn c2() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0_f64;
    let mut max_rho = 0.0_f64;
    let mut done = 0;
    while done < 200 {
        let k = r.random_range(2..=8);
        let target = r.random_range(0.05..0.95);
        let m = random_vacancy(&mut r, k, target);
        let rho = spectral_radius(&m, 10_000, 0);
        if rho >= 0.95 {
            continue;
        }
        max_rho = max_rho.max(rho);
        let pi = pi_from_vacancy(&mut r, &m);
        let fs = FirstStage::new(pi).map_err(e2s)?;
        let vm = VacancyMatrix::from_first_stage(&fs).map_err(e2s)?;
        ensure((vm.matrix() - &m).amax() < 1e-12, || "vacancy matrix does not round-trip".into())?;
        let w = Vector::from_fn(k, |_, _| r.random_range(-1.0..1.0));
        let rf = fs.diag().component_mul(&w);
        let direct = cascade_solve(&fs, &rf, &CascadeOptions::default()).map_err(e2s)?;
        let series = neumann_solve(&vm, &w, 1e-13, 100_000).map_err(e2s)?;
        worst = worst.max((&direct.t - &series.t).amax());
        done += 1;
    }
    ensure(worst < 1e-8, || format!("Neumann vs direct gap {worst:.3e}"))?;

    let mut closed = 0.0_f64;
    for _ in 0..200 {
        let (r21, r12) = (r.random_range(-0.95..0.95), r.random_range(-0.95..0.95));
        let w = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let rho = r21 * r12;
        let t1 = (w[0] + r21 * w[1]) / (1.0 - rho);
        let t2 = (w[1] + r12 * w[0]) / (1.0 - rho);
        let cf = two_program_closed_form(w, r21, r12);
        let sol = neumann_solve(&VacancyMatrix::two_program(r21, r12), &Vector::from_row_slice(&w), 1e-15, 1_000_000).map_err(e2s)?;
        closed = closed.max((cf[0] - t1).abs()).max((cf[1] - t2).abs());
        ensure((sol.t[0] - t1).abs() < 1e-8, || format!("2x2 Neumann T1 {} vs {t1}", sol.t[0]))?;
    }
    ensure(closed < 1e-12, || format!("2x2 closed form gap {closed:.3e}"))?;

    let mut divergent = 0;
    for i in 0..50 {
        let k = 2 + i % 6;
        let target = 1.0 + r.random_range(0.0..1.0);
        let m = random_vacancy(&mut r, k, target);
        let w = Vector::from_element(k, 1.0);
        if let Err(Error::DivergentCascade { .. }) = neumann_solve(&VacancyMatrix::new(m).map_err(e2s)?, &w, 1e-10, 10_000) {
            divergent += 1;
        }
    }
    ensure(divergent == 50, || format!("only {divergent}/50 divergent instances refused"))?;
    Ok(format!("200 instances (max rho {max_rho:.3}) gap {worst:.2e}; 2x2 closed form {closed:.1e}; 50/50 divergent refused"))
}

struct Agreement {
    max_z: f64,
    checked: usize,
    detail: String,
}

/// Simulates `reps` lotteries and compares the oracle with 2SLS program by program.
fn oracle_vs_2sls(pop: &Population, caps: &[usize], reps: usize, seed: u64) -> Result<Agreement, String> {
    let mech = MechanismConfig::new(caps.to_vec(), seed);
    let sim = simulate_iv_dataset(pop, &mech, reps, seed).map_err(e2s)?;
    let est = estimate(&sim.data).map_err(e2s)?;
    let oracles = oracle_all(pop, &mech, reps, seed).map_err(e2s)?;
    let mut max_z = 0.0_f64;
    let mut checked = 0;
    let mut parts = Vec::new();
    for o in &oracles {
        if o.undersubscribed {
            continue;
        }
        let k = o.program;
        let se = (o.se.powi(2) + est.se_beta[k].powi(2)).sqrt();
        let z = (o.effect - est.beta[k]).abs() / se;
        max_z = max_z.max(z);
        checked += 1;
        parts.push(format!("{:.3}/{:.3}", o.effect, est.beta[k]));
    }
    Ok(Agreement { max_z, checked, detail: parts.join(" ") })
}

// 3. Oracle = 2SLS under heterogeneous effects.
fn c3() -> Outcome {
    let scenarios: [(Vec<f64>, f64, f64, f64); 5] = [
        (vec![0.3, -0.2], 0.5, 0.5, 1.0),
        (vec![0.2, 0.1, -0.15], 0.5, 0.5, 0.5),
        (vec![0.4, -0.1, 0.25], 1.0, 0.8, 2.0),
        (vec![0.1, 0.3, -0.2, 0.05, 0.15], 0.5, 0.5, 1.0),
        (vec![0.25, -0.05, 0.2, 0.1, -0.3], 1.0, -0.6, 0.3),
    ];
    let mut lines = Vec::new();
    for (s, (effects, sigma_h, corr, taste)) in scenarios.into_iter().enumerate() {
        let mut cfg = SynthConfig::new(50_000, effects, 300 + s as u64);
        cfg.sigma_h = sigma_h;
        cfg.gain_taste_corr = corr;
        cfg.taste_scale = taste;
        let pop = synth::generate_population(&cfg).map_err(e2s)?;
        let caps = synth::capacities(&pop, cfg.capacity_share);
        let a = oracle_vs_2sls(&pop, &caps, 200, 30 + s as u64)?;
        ensure(a.checked > 0, || format!("scenario {s}: no oversubscribed program"))?;
        ensure(a.max_z < 3.0, || format!("scenario {s} (K={}): max |z| {:.2} [{}]", cfg.k, a.max_z, a.detail))?;
        lines.push(format!("K={} max|z|={:.2}", cfg.k, a.max_z));
    }
    Ok(lines.join("; "))
}

/// Largest |π_jk| / π_kk over off-diagonal cells.
fn substitution_strength(fs: &FirstStage) -> f64 {
    let k = fs.k();
    let mut s = 0.0_f64;
    for j in 0..k {
        for c in 0..k {
            if j != c {
                s = s.max(fs.get(j, c).abs() / fs.get(c, c));
            }
        }
    }
    s
}

// 4. Homogeneous effects: oracle and β both equal Δ.
fn c4() -> Outcome {
    let delta = [0.2, -0.1, 0.05];
    let mut lines = Vec::new();
    // Single-program lists give no spillover; longer lists with little taste
    // noise send most rejected applicants to their next choice.
    for (s, (taste, list)) in [(1.0, 1), (5.0, 2), (1.0, 3), (0.1, 3)].into_iter().enumerate() {
        let mut cfg = SynthConfig::new(30_000, delta.to_vec(), 400 + s as u64);
        cfg.taste_scale = taste;
        cfg.list_length = Some(list);
        let pop = synth::generate_population(&cfg).map_err(e2s)?;
        let caps = synth::capacities(&pop, cfg.capacity_share);
        let mech = MechanismConfig::new(caps, 0);
        let sim = simulate_iv_dataset(&pop, &mech, 100, 40 + s as u64).map_err(e2s)?;
        let est = estimate(&sim.data).map_err(e2s)?;
        let oracles = oracle_all(&pop, &mech, 100, 40 + s as u64).map_err(e2s)?;
        let mut max_z = 0.0_f64;
        for o in oracles.iter().filter(|o| !o.undersubscribed) {
            let k = o.program;
            ensure((o.effect - delta[k]).abs() <= 3.0 * o.se + 1e-9, || format!("taste {taste}: oracle {} vs Δ {}", o.effect, delta[k]))?;
            let z = (est.beta[k] - delta[k]).abs() / est.se_beta[k];
            ensure(z < 3.0, || format!("taste {taste}: beta_{} = {} is {z:.2} SE from {}", k + 1, est.beta[k], delta[k]))?;
            max_z = max_z.max(z);
        }
        let strength = substitution_strength(est.first_stage.as_ref().expect("fitted"));
        lines.push(format!("offdiag {strength:.3} max|z| {max_z:.2}"));
    }
    Ok(lines.join("; "))
}

// 5. Closed-form β₂ in the two-program scenario.
fn c5() -> Outcome {
    let predicted = three_program_beta2(0.5, 0.5, 1.0, 0.3, 0.4).map_err(e2s)?;
    ensure((predicted - 0.85).abs() < 1e-12, || format!("closed form gives {predicted}"))?;
    let mut cfg = SynthConfig::new(50_000, vec![0.4, 1.0], 5);
    cfg.complier_targets = Some((0.5, 0.5));
    cfg.scenario_effects = Some((1.0, 0.3, 0.4));
    let sc = synth::scenario_three_program(&cfg).map_err(e2s)?;
    ensure((sc.predicted_beta2 - 0.85).abs() < 1e-12, || format!("scenario predicts {}", sc.predicted_beta2))?;
    let (r02, r12) = sc.realized_shares;
    ensure((r02 - 0.5).abs() <= 0.05 && (r12 - 0.5).abs() <= 0.05, || format!("realized shares ({r02}, {r12})"))?;
    let sim = simulate_iv_dataset(&sc.population, &MechanismConfig::new(sc.capacities.clone(), 0), 100, 55).map_err(e2s)?;
    let est = estimate(&sim.data).map_err(e2s)?;
    let z = (est.beta[1] - 0.85).abs() / est.se_beta[1];
    ensure(z < 3.0, || format!("beta_2 = {} ({z:.2} SE from 0.85)", est.beta[1]))?;
    let fs = est.first_stage.as_ref().expect("fitted");
    let (pi21, se21) = (fs.get(1, 0), est.se_first_stage[1][0]);
    ensure(pi21.abs() <= 3.0 * se21 + 1e-12, || format!("pi_21 = {pi21:.3e}, se {se21:.3e}"))?;
    Ok(format!("predicted 0.85, beta_2 = {:.4} ({z:.2} SE), pi_21 = {pi21:.1e}", est.beta[1]))
}

// 6. Published-table arithmetic.
fn c6() -> Outcome {
    let rep = fixture_report().map_err(e2s)?;
    let failures = rep.failures();
    ensure(failures.is_empty(), || failures.join(", "))?;
    ensure(rep.rho_abs < 1.0, || format!("rho {}", rep.rho_abs))?;
    Ok(format!("{} checks, rho(|M|) = {:.4}", rep.checks.len(), rep.rho_abs))
}

fn small_sim(seed: u64, n: usize, reps: usize, sigma_h: f64) -> Result<(Population, cascade_iv::mechanism::SimulatedDataset), String> {
    let mut cfg = SynthConfig::new(n, vec![0.2, -0.1, 0.05], seed);
    cfg.sigma_h = sigma_h;
    cfg.brackets = 10;
    let pop = synth::generate_population(&cfg).map_err(e2s)?;
    let caps = synth::capacities(&pop, cfg.capacity_share);
    let sim = simulate_iv_dataset(&pop, &MechanismConfig::new(caps, 0), reps, seed).map_err(e2s)?;
    Ok((pop, sim))
}

// 7. Group decomposition adds up to β.
fn c7() -> Outcome {
    let mut worst = 0.0_f64;
    for d in 0..20u64 {
        let (_, sim) = small_sim(700 + d, 5_000, 10, 0.7)?;
        let mut r = rng(70 + d);
        let levels_n = r.random_range(2..=4);
        let levels: Vec<String> = (0..levels_n).map(|l| format!("g{l}")).collect();
        let labels: Vec<String> = (0..sim.data.n()).map(|_| levels[r.random_range(0..levels_n)].clone()).collect();
        let beta = fit_2sls(&sim.data).map_err(e2s)?;
        let dec = group_outcome_decomposition(&sim.data, &labels, &levels).map_err(e2s)?;
        let total = Vector::from_vec(dec.total());
        worst = worst.max(rel_err(&total, &beta));
    }
    ensure(worst < 1e-10, || format!("max gap {worst:.3e}"))?;
    Ok(format!("20 datasets, max gap {worst:.2e}"))
}

/// Two programs. Program 2's cutoff bracket holds women who list [2, 1] and
/// men who list [2]; program 1's cutoff bracket sits below and holds [1]
/// types. A woman drawn into program 2 frees a program-1 seat that goes to a
/// bracket-1 applicant, so T^{|f} = 0.4 + 0.5 while T^{|m} = 0.3.
fn gender_population(r: &mut ChaCha8Rng) -> (Population, Vec<usize>) {
    let (n_women, n_men, n_low) = (200, 200, 400);
    let mut apps = Vec::new();
    let noise = |r: &mut ChaCha8Rng| r.random_range(-0.5..0.5);
    for i in 0..(n_women + n_men) {
        let woman = i < n_women;
        let y0 = noise(r);
        let (prefs, po) = if woman { (vec![1, 0], vec![y0, y0 + 0.5, y0 + 0.9]) } else { (vec![1], vec![y0, y0 + 0.5, y0 + 0.3]) };
        apps.push(Applicant { merit: 2, prefs, po, label: Some(if woman { "f" } else { "m" }.into()), covariates: vec![] });
    }
    for i in 0..n_low {
        let y0 = noise(r);
        let label = if i % 2 == 0 { "f" } else { "m" };
        apps.push(Applicant { merit: 1, prefs: vec![0], po: vec![y0, y0 + 0.5, y0 + 0.5], label: Some(label.into()), covariates: vec![] });
    }
    (Population::new(2, apps, vec![]).expect("valid"), vec![n_women / 2 + n_low / 2, (n_women + n_men) / 2])
}

// 8. Conditional-entrant effects.
fn c8() -> Outcome {
    // Degenerate grouping.
    let mut worst = 0.0_f64;
    for d in 0..5u64 {
        let (_, sim) = small_sim(800 + d, 5_000, 10, 0.7)?;
        let n = sim.data.n();
        let data = Dataset::new(
            sim.data.y().clone(),
            sim.data.a().clone(),
            sim.data.z().clone(),
            sim.data.x().clone(),
            sim.data.cluster().to_vec(),
            Some(vec!["all".to_string(); n]),
        )
        .map_err(e2s)?;
        let t_g = conditional_entrant_from_data(&data, "all").map_err(e2s)?;
        let fs = fit_first_stage(&data).map_err(e2s)?;
        let t = cascade_solve(&fs, &fit_reduced_form(&data).map_err(e2s)?, &CascadeOptions::default()).map_err(e2s)?.t;
        worst = worst.max(rel_err(&t_g, &t));
    }
    ensure(worst < 1e-10, || format!("degenerate grouping gap {worst:.3e}"))?;

    let mut r = rng(8);
    let mut right = 0;
    let mut diffs = Vec::new();
    for rep in 0..100u64 {
        let (pop, caps) = gender_population(&mut r);
        let sim = simulate_iv_dataset(&pop, &MechanismConfig::new(caps, 0), 10, 8_000 + rep).map_err(e2s)?;
        let f = conditional_entrant_from_data(&sim.data, "f").map_err(e2s)?;
        let m = conditional_entrant_from_data(&sim.data, "m").map_err(e2s)?;
        let diff = f[1] - m[1];
        diffs.push(diff);
        if diff > 0.0 {
            right += 1;
        }
    }
    diffs.sort_by(f64::total_cmp);
    ensure(right >= 95, || format!("constructed sign in {right}/100 replications"))?;
    Ok(format!("degenerate gap {worst:.1e}; T|f - T|m > 0 in {right}/100 (median {:.3})", diffs[50]))
}

// 9. Linear market: oracle = 2SLS.
fn c9() -> Outcome {
    let consumers = vec![
        Consumer { intercept: vec![10.0, 8.0], slope: vec![vec![-2.0, 0.5], vec![0.6, -1.5]], outcome: vec![1.0, 0.2] },
        Consumer { intercept: vec![6.0, 9.0], slope: vec![vec![-1.0, 0.3], vec![0.2, -2.5]], outcome: vec![0.4, 0.9] },
        Consumer { intercept: vec![7.0, 5.0], slope: vec![vec![-1.5, 0.8], vec![0.4, -1.0]], outcome: vec![-0.3, 0.5] },
    ];
    let mkt = MarketConfig { consumers, supply: vec![12.0, 10.0] };
    let beta = fit_2sls(&market_dataset(&mkt, 0.5).map_err(e2s)?).map_err(e2s)?;
    let mut worst = 0.0_f64;
    for k in 0..mkt.k() {
        let o = market_oracle(&mkt, k, 1.0).map_err(e2s)?;
        worst = worst.max((o.per_unit - beta[k]).abs());
    }
    ensure(worst < 1e-6, || format!("max gap {worst:.3e}"))?;
    Ok(format!("2 goods, max gap {worst:.2e}"))
}

// 10. Luck values and covariate balance.
fn c10() -> Outcome {
    for n in 1..=200usize {
        let mut luck = luck_variable(n);
        luck.sort_by(f64::total_cmp);
        let expect: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        ensure(luck == expect, || format!("luck values for n = {n}"))?;
    }
    let mut rejections = 0;
    let mut groups_checked = 0;
    for d in 0..200u64 {
        let (pop, sim) = small_sim(1_000 + d, 4_000, 10, 0.5)?;
        if d < 5 {
            let caps = synth::capacities(&pop, 0.6);
            let res = run_clearing(&pop, &MechanismConfig::new(caps, d)).map_err(e2s)?;
            for g in &res.pivotal_groups {
                let mut luck = g.luck.clone();
                luck.sort_by(f64::total_cmp);
                ensure(luck == luck_variable(g.size()).into_iter().rev().collect::<Vec<_>>(), || "pivotal-group luck".into())?;
                groups_checked += 1;
            }
        }
        let rep = balance_check(&sim.data, &sim.covariates(&pop)).map_err(e2s)?;
        if rep.p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 200.0;
    ensure((0.02..=0.09).contains(&rate), || format!("rejection rate {rate:.3}"))?;
    Ok(format!("luck exact (n <= 200, {groups_checked} simulated groups); rejection rate {rate:.3}"))
}

fn random_population(r: &mut ChaCha8Rng) -> (Population, Vec<usize>) {
    let n = r.random_range(50..=10_000);
    let k = r.random_range(1..=6);
    let brackets = r.random_range(1..=20);
    let apps = (0..n)
        .map(|_| {
            let mut prefs: Vec<usize> = (0..k).collect();
            prefs.shuffle(r);
            prefs.truncate(r.random_range(0..=k));
            Applicant { merit: r.random_range(1..=brackets), prefs, po: vec![0.0; k + 1], label: None, covariates: vec![] }
        })
        .collect();
    let caps = (0..k).map(|_| r.random_range(1..=n / k + 1)).collect();
    (Population::new(k, apps, vec![]).expect("valid"), caps)
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("read"))
        })
        .collect()
}

// 11. Stability, capacities and end-to-end determinism.
fn c11() -> Outcome {
    let mut r = rng(11);
    let mut pairs_checked = 0usize;
    for p in 0..100u64 {
        let (pop, caps) = random_population(&mut r);
        let cfg = MechanismConfig::new(caps.clone(), p);
        let res = run_clearing(&pop, &cfg).map_err(e2s)?;
        let mut count = vec![0usize; pop.k];
        for (i, s) in res.assignment.iter().enumerate() {
            if let Some(k) = *s {
                ensure(pop.applicants[i].prefs.contains(&k), || format!("population {p}: applicant {i} placed in unlisted program"))?;
                count[k] += 1;
            }
        }
        ensure(count == res.enrolled, || format!("population {p}: enrolled counts disagree"))?;
        for k in 0..pop.k {
            ensure(count[k] <= caps[k], || format!("population {p}: program {k} over capacity"))?;
        }
        // Every applicant against every program they prefer to their own seat.
        let key = |i: usize, k: usize| (pop.applicants[i].merit, lottery_draw(p, k, i));
        let mut worst: Vec<Option<(u32, u64)>> = vec![None; pop.k];
        for (i, s) in res.assignment.iter().enumerate() {
            if let Some(k) = *s {
                worst[k] = Some(worst[k].map_or(key(i, k), |w| w.min(key(i, k))));
            }
        }
        for (i, a) in pop.applicants.iter().enumerate() {
            for &k in &a.prefs {
                if res.assignment[i] == Some(k) {
                    break;
                }
                pairs_checked += 1;
                let blocks = count[k] < caps[k] || worst[k].is_some_and(|w| key(i, k) > w);
                ensure(!blocks, || format!("population {p}: applicant {i} blocks with program {k}"))?;
            }
        }
        ensure(blocking_pairs(&pop, &cfg, &res).is_empty(), || format!("population {p}: library reports blocking pairs"))?;
    }

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let mut sink = Vec::new();
        for (name, make) in [("sim", Command::Simulate as fn(Opts) -> Command), ("ver", Command::Verify)] {
            let out = tmp.path().join(format!("{name}{run_id}"));
            let opts = Opts { seed: Some(17), reps: Some(5), out: Some(out.clone()), ..Default::default() };
            run(&make(opts), &mut sink).map_err(e2s)?;
            outputs.push(read_dir_bytes(&out));
        }
        let est_out = tmp.path().join(format!("est{run_id}"));
        let opts = Opts {
            data: Some(tmp.path().join("sim0/dataset.csv")),
            seed: Some(3),
            bootstrap_reps: Some(20),
            out: Some(est_out.clone()),
            ..Default::default()
        };
        run(&Command::Estimate(opts), &mut sink).map_err(e2s)?;
        outputs.push(read_dir_bytes(&est_out));
    }
    ensure(outputs[0] == outputs[3] && outputs[1] == outputs[4] && outputs[2] == outputs[5], || "reruns differ".into())?;
    let files: usize = outputs[..3].iter().map(BTreeMap::len).sum();
    Ok(format!("100 populations, {pairs_checked} applicant-program pairs, no blocking pair; {files} output files byte-identical on rerun"))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 11] = [
        (1, "algebraic cascade identity", c1, Duration::from_secs(5)),
        (2, "Neumann equivalence", c2, Duration::from_secs(5)),
        (3, "simulator identity (heterogeneous)", c3, Duration::from_secs(600)),
        (4, "homogeneous collapse", c4, Duration::from_secs(180)),
        (5, "two-program closed form", c5, Duration::from_secs(120)),
        (6, "published-table arithmetic", c6, Duration::from_secs(1)),
        (7, "group decomposition", c7, Duration::from_secs(120)),
        (8, "conditional-entrant formula", c8, Duration::from_secs(120)),
        (9, "market variant", c9, Duration::from_secs(1)),
        (10, "balance and luck", c10, Duration::from_secs(300)),
        (11, "mechanism invariants", c11, Duration::from_secs(600)),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f, budget) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let res = f();
        let took = start.elapsed();
        let over = took > budget;
        let (tag, detail) = match (&res, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; exceeded {:.0?} budget", budget)),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("{tag} criterion {id:>2} {name} [{:.2}s]: {detail}", took.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
