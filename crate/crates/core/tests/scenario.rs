use std::path::PathBuf;

use cylflow::scenario::{self, Extraction, MatrixSpec, Scenario};
use cylflow::tracker::Phase;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Scenario {
    Scenario::load(&configs_dir().join(name)).unwrap()
}

#[test]
fn shipped_configs_parse() {
    let mut scenarios = 0;
    let mut matrices = 0;
    for e in std::fs::read_dir(configs_dir()).unwrap() {
        let p = e.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        if text.contains("[solver]") {
            Scenario::parse(&text).unwrap().validate().unwrap();
            scenarios += 1;
        } else {
            MatrixSpec::parse(&text).unwrap();
            matrices += 1;
        }
    }
    assert!(scenarios >= 3 && matrices >= 2);
}

#[test]
fn run_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = load("linear.toml");
    s.tau.end = 1.0;
    s.output.dir = dir.path().join("linear");
    let rep = scenario::run(&s).unwrap();
    assert!(rep.termination.is_none());
    assert_eq!(rep.phases.single_phase(), Some(Phase::Linear));
    for f in ["track.csv", "phases.json", "extraction.json", "final.bin", "scenario.toml", "report.json", "manifest.json"] {
        assert!(s.output.dir.join(f).exists(), "{f}");
    }
    let m = scenario::read_manifest(&s.output.dir).unwrap();
    assert_eq!(m.config_sha256, s.config_hash().unwrap());
    assert_eq!(m.constants_checksum, cylflow::taylor::constants_checksum());
    let csv = std::fs::read(s.output.dir.join("track.csv")).unwrap();
    assert_eq!(m.files.get("track.csv"), Some(&scenario::sha256_hex(&csv)));
    // the echoed scenario reproduces the run
    assert_eq!(Scenario::load(&s.output.dir.join("scenario.toml")).unwrap(), s);
}

#[test]
fn extraction_follows_the_phase() {
    let mut s = load("linear.toml");
    s.tau.end = 1.0;
    let out = scenario::execute(&s).unwrap();
    assert!(matches!(out.report.extraction, Extraction::Linear(_)));
    let mut s = load("constant.toml");
    s.tau.end = 0.5;
    let out = scenario::execute(&s).unwrap();
    assert_eq!(out.report.phases.single_phase(), Some(Phase::Constant));
}

#[test]
fn degeneration_is_reported_not_raised() {
    let out = scenario::execute(&load("quadratic.toml")).unwrap();
    let t = out.report.termination.clone().unwrap();
    assert!(t.contains("degeneration"), "{t}");
    assert_eq!(out.report.tau_reached, 0.0);
}

#[test]
fn noise_is_seeded() {
    let s = load("noisy-ancient.toml");
    let a = s.seed_modes().unwrap();
    let b = s.seed_modes().unwrap();
    assert_eq!(a, b);
    let mut s2 = s.clone();
    s2.rng_seed += 1;
    assert_ne!(s2.seed_modes().unwrap(), a);
}

#[test]
fn invalid_scenarios_are_rejected() {
    let text = std::fs::read_to_string(configs_dir().join("constant.toml")).unwrap();
    for (from, to) in [
        ("h = 0.05", "h = -0.05"),
        ("end = 2.0", "end = -1.0"),
        ("lambda = -1.5", "lambda = -1.3"),
        ("index = [0]", "index = [0, 0]"),
        ("scheme = \"imex\"", "scheme = \"euler\""),
    ] {
        let bad = text.replace(from, to);
        let r = Scenario::parse(&bad).and_then(|s| s.validate());
        assert!(r.is_err(), "{from} -> {to} accepted");
    }
}

#[test]
fn matrix_spec_sampling() {
    let m = MatrixSpec::parse("n = 3\nmatrix = [[-0.02, 0.0], [0.0, -0.01]]\ntau1 = -1e3\nsamples = 4").unwrap();
    let t = m.sample_times(-1.0);
    assert_eq!(t.len(), 4);
    assert!((t[3] + 1e3).abs() < 1e-9);
    assert!(t.windows(2).all(|w| w[1] < w[0]));
    assert!(MatrixSpec::parse("n = 3\nmatrix = [[0.0, 1.0], [0.0, 0.0]]").is_err());
}

#[test]
fn boundary_influence_is_below_threshold() {
    // doubling the domain must not move the tracked modes by 1e-6
    // the transported cutoff bump degenerates near the far boundary of the doubled
    // linear-mode domain at tau ~ 2.6, so spans stop at 2
    for (index, end) in [(0usize, 2.0), (1, 2.0), (2, 1.0)] {
        let amp = if index == 2 { 0.02 } else { 0.01 };
        let small = cylflow::verify::pde_scenario("b", index, amp, end, 0.05, 0.01);
        let mut big = small.clone();
        big.solver.r_dom *= 2.0;
        let a = scenario::execute(&small).unwrap();
        let b = scenario::execute(&big).unwrap();
        assert!(a.report.termination.is_none() && b.report.termination.is_none(), "{:?} {:?}", a.report.termination, b.report.termination);
        let worst = a
            .tracker
            .records
            .iter()
            .zip(&b.tracker.records)
            .map(|(x, y)| x.uplus.axpy(-1.0, &y.uplus).max_abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "mode {index}: {worst:e}");
    }
}
