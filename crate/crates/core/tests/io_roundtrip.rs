use cascade_iv::io::csv::{
    load_dataset_csv, load_matrix_csv, load_population_csv, parse_dataset_csv, provenance, write_dataset_csv,
    write_matrix_csv, write_population_csv,
};
use cascade_iv::mechanism::{simulate_iv_dataset, MechanismConfig};
use cascade_iv::synth::{self, SynthConfig};
use cascade_iv::Error;

fn simulated() -> (cascade_iv::mechanism::Population, cascade_iv::mechanism::SimulatedDataset) {
    let mut cfg = SynthConfig::new(3_000, vec![0.2, -0.1, 0.05], 9);
    cfg.sigma_h = 0.5;
    cfg.brackets = 10;
    let pop = synth::generate_population(&cfg).unwrap();
    let caps = synth::capacities(&pop, 0.6);
    let sim = simulate_iv_dataset(&pop, &MechanismConfig::new(caps, 0), 4, 1).unwrap();
    (pop, sim)
}

#[test]
fn dataset_round_trip() {
    let (_, sim) = simulated();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_dataset_csv(&path, &sim.data, &provenance("test", Some(1))).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# cascade-iv "));
    assert!(!text.contains('\r'));
    let back = load_dataset_csv(&path, "group").unwrap();
    assert_eq!((back.n(), back.k()), (sim.data.n(), sim.data.k()));
    assert!((back.y() - sim.data.y()).amax() < 1e-12);
    assert!((back.z() - sim.data.z()).amax() < 1e-12);
    assert!((back.a() - sim.data.a()).amax() == 0.0);
    assert_eq!(back.cluster(), sim.data.cluster());
    assert_eq!(back.group(), sim.data.group());
}

#[test]
fn population_and_matrix_round_trip() {
    let (pop, sim) = simulated();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pop.csv");
    write_population_csv(&p, &pop, &provenance("test", None)).unwrap();
    let back = load_population_csv(&p).unwrap();
    assert_eq!(back.k, pop.k);
    assert_eq!(back.applicants.len(), pop.applicants.len());
    for (a, b) in back.applicants.iter().zip(&pop.applicants) {
        assert_eq!((a.merit, &a.prefs, &a.label), (b.merit, &b.prefs, &b.label));
        assert!(a.po.iter().zip(&b.po).all(|(x, y)| (x - y).abs() < 1e-12));
    }
    let m = sim.covariates(&pop);
    let mp = dir.path().join("cov.csv");
    write_matrix_csv(&mp, &pop.covariate_names, &m, &provenance("test", None)).unwrap();
    let (names, mb) = load_matrix_csv(&mp).unwrap();
    assert_eq!(names, pop.covariate_names);
    assert!((mb - m).amax() < 1e-12);
}

#[test]
fn missing_file_names_the_path() {
    match load_dataset_csv(std::path::Path::new("/no/such/file.csv"), "group") {
        Err(e @ Error::Io(_)) => {
            assert!(e.to_string().contains("/no/such/file.csv"));
            assert_eq!(e.exit_code(), 3);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn continuous_treatments_are_accepted() {
    let text = "y,a_1,z_1,x_const,cluster\n1.5,0.3,1,1,c1\n2.0,0.7,0,1,c2\n0.1,1.2,1,1,c3\n";
    let d = parse_dataset_csv(text, "group").unwrap();
    assert_eq!(d.a()[(2, 0)], 1.2);
}

#[test]
fn unknown_column_is_schema_error() {
    let text = "y,a_1,z_1,x_const,cluster,weight\n1,0,1,1,c1,2\n";
    assert!(matches!(parse_dataset_csv(text, "group"), Err(Error::Schema(_))));
}
