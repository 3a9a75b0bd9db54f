use cascade_iv::cascade::{cascade_solve, neumann_solve, CascadeOptions, VacancyMatrix};
use cascade_iv::estimator::FirstStage;
use cascade_iv::linalg::{Mat, Vector};
use cascade_iv::mechanism::{blocking_pairs, luck_variable, run_clearing, Applicant, MechanismConfig, Population};
use cascade_iv::synth::{self, SynthConfig};
use proptest::prelude::*;

fn diag_dominant(k: usize) -> impl Strategy<Value = (Mat, Vec<f64>)> {
    (
        proptest::collection::vec(0.5f64..1.5, k),
        proptest::collection::vec(-0.3f64..0.3, k * k),
        proptest::collection::vec(-1.0f64..1.0, k),
    )
        .prop_map(move |(d, off, w)| {
            let pi = Mat::from_fn(k, k, |i, j| if i == j { d[i] } else { off[i * k + j] / k as f64 });
            (pi, w)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_minus_wald_is_delta((pi, w) in (1usize..7).prop_flat_map(diag_dominant)) {
        let k = pi.nrows();
        let fs = FirstStage::new(pi).unwrap();
        let rf = fs.diag().component_mul(&Vector::from_vec(w.clone()));
        let sol = cascade_solve(&fs, &rf, &CascadeOptions::default()).unwrap();
        for j in 0..k {
            prop_assert!((sol.t[j] - sol.w[j] - sol.delta[j]).abs() < 1e-12);
            prop_assert!((sol.w[j] - w[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn neumann_matches_direct((pi, w) in (1usize..7).prop_flat_map(diag_dominant)) {
        let fs = FirstStage::new(pi).unwrap();
        let w = Vector::from_vec(w);
        let vm = VacancyMatrix::from_first_stage(&fs).unwrap();
        let direct = cascade_solve(&fs, &fs.diag().component_mul(&w), &CascadeOptions::default()).unwrap();
        let series = neumann_solve(&vm, &w, 1e-13, 100_000).unwrap();
        prop_assert!((direct.t - series.t).amax() < 1e-9);
    }

    #[test]
    fn luck_is_evenly_spaced(n in 1usize..500) {
        let l = luck_variable(n);
        prop_assert_eq!(l.len(), n);
        for (r, v) in l.iter().enumerate() {
            prop_assert_eq!(*v, (n - r) as f64 / (n + 1) as f64);
        }
    }

    #[test]
    fn clearing_is_stable_and_within_capacity(
        merits in proptest::collection::vec(1u32..5, 1..120),
        k in 1usize..4,
        cap_seed in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let applicants: Vec<Applicant> = merits
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let prefs: Vec<usize> = (0..k).map(|j| (i + j) % k).take(1 + i % k).collect();
                Applicant { merit: m, prefs, po: vec![0.0; k + 1], label: None, covariates: vec![] }
            })
            .collect();
        let n = applicants.len();
        let pop = Population::new(k, applicants, vec![]).unwrap();
        let caps: Vec<usize> = (0..k).map(|j| 1 + ((cap_seed >> (8 * j)) as usize % n.max(1))).collect();
        let cfg = MechanismConfig::new(caps.clone(), seed);
        let res = run_clearing(&pop, &cfg).unwrap();
        for j in 0..k {
            prop_assert!(res.enrolled[j] <= caps[j]);
        }
        prop_assert!(blocking_pairs(&pop, &cfg, &res).is_empty());
        let again = run_clearing(&pop, &cfg).unwrap();
        prop_assert_eq!(res.assignment, again.assignment);
    }

    #[test]
    fn homogeneous_switch_is_exact(seed in any::<u64>(), k in 1usize..5) {
        let effects: Vec<f64> = (0..k).map(|j| 0.1 * j as f64 - 0.15).collect();
        let pop = synth::generate_population(&SynthConfig::new(200, effects.clone(), seed)).unwrap();
        for a in &pop.applicants {
            for j in 0..k {
                prop_assert!((a.po[j + 1] - a.po[0] - effects[j]).abs() < 1e-12);
            }
        }
    }
}
