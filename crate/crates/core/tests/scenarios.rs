use std::path::Path;

use scfo_core::rational::Rational;
use scfo_core::scenarios::config::InterferenceOptions;
use scfo_core::scenarios::golden::check_against;
use scfo_core::scenarios::{default_config, parse_config, run_scenario, validate, ScenarioError, ScenarioReport, SCENARIOS};

fn run(name: &str) -> ScenarioReport {
    run_scenario(name, &default_config(name).unwrap()).unwrap()
}

fn invalid_path(r: Result<impl std::fmt::Debug, ScenarioError>) -> String {
    match r {
        Err(ScenarioError::ConfigInvalid { path, .. }) => path,
        other => panic!("expected ConfigInvalid, got {other:?}"),
    }
}

#[test]
fn every_default_round_trips_through_toml() {
    for s in SCENARIOS {
        let cfg = default_config(s.name).unwrap();
        let back = parse_config(&cfg.to_toml()).unwrap_or_else(|e| panic!("{}: {e}", s.name));
        assert_eq!(back, cfg, "{}", s.name);
        validate(s.name, &back).unwrap();
    }
}

#[test]
fn tagged_interference_and_zone_survive_toml() {
    let cfg = default_config("zone1-vs-zone2-alias").unwrap();
    let text = cfg.to_toml();
    let back = parse_config(&text).unwrap();
    assert!(matches!(back.antennas[2].interference[2], InterferenceOptions::FixedRf { freq_hz, .. } if freq_hz == 1.07e6));
    assert_eq!(back.antennas[2].zone, cfg.antennas[2].zone);
    assert_ne!(back.antennas[0].zone, back.antennas[2].zone);
}

#[test]
fn unknown_scenario() {
    assert!(matches!(default_config("nope"), Err(ScenarioError::UnknownScenario(_))));
}

#[test]
fn errors_name_the_offending_field() {
    let mut cfg = default_config("timing").unwrap();
    cfg.scenario = Some("resources".into());
    assert_eq!(invalid_path(validate("timing", &cfg)), "scenario");

    let text = default_config("scfo-off").unwrap().to_toml().replace("seed = ", "bogus = 1\nseed = ");
    assert_eq!(invalid_path(parse_config(&text)), "bogus");

    let text = default_config("scfo-off").unwrap().to_toml().replacen("samples = 1000000", "samples = \"many\"", 1);
    assert_eq!(invalid_path(parse_config(&text)), "samples");

    let mut cfg = default_config("selfclock-washout").unwrap();
    cfg.antennas.truncate(1);
    invalid_path(validate("selfclock-washout", &cfg));

    let mut cfg = default_config("scfo-off").unwrap();
    cfg.f_c = "0".parse().unwrap();
    assert_eq!(invalid_path(validate("scfo-off", &cfg)), "f_c");
}

#[test]
fn offsets_out_of_range_are_rejected() {
    let mut cfg = default_config("scfo-off").unwrap();
    cfg.antennas[0].offset = Rational::new(1, 3).unwrap();
    assert_eq!(invalid_path(validate("scfo-off", &cfg)), "antennas[0].offset");
    cfg.antennas[0].offset = Rational::integer(2_000_000);
    assert_eq!(invalid_path(validate("scfo-off", &cfg)), "antennas[0].offset");
}

#[test]
fn deterministic_for_a_seed() {
    let mut cfg = default_config("scfo-off").unwrap();
    cfg.samples = 50_000;
    cfg.windows = 2;
    let a = run_scenario("scfo-off", &cfg).unwrap();
    let b = run_scenario("scfo-off", &cfg).unwrap();
    assert_eq!(a.files, b.files);
    cfg.seed += 1;
    let c = run_scenario("scfo-off", &cfg).unwrap();
    assert_ne!(a.files, c.files);
}

fn golden(name: &str) {
    let cfg = default_config(name).unwrap();
    let mut rep = run_scenario(name, &cfg).unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let n = check_against(&mut rep, &dir, &cfg.golden).unwrap();
    assert!(n > 0, "no golden files in {}", dir.display());
    assert!(rep.passed(), "{}", rep.summary());
}

#[test]
fn golden_timing() {
    golden("timing");
}

#[test]
fn golden_resources() {
    golden("resources");
}

#[test]
fn golden_filter_response() {
    golden("filter-response");
}

#[test]
fn golden_mismatch_is_a_failed_check() {
    let cfg = default_config("resources").unwrap();
    let mut rep = run_scenario("resources", &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = rep.file_contents("resources.csv").unwrap().replace("3648", "3649");
    std::fs::write(dir.path().join("resources.csv"), csv).unwrap();
    assert_eq!(check_against(&mut rep, dir.path(), &cfg.golden).unwrap(), 1);
    assert!(!rep.passed());
}

#[test]
fn skip_repeat_counts_one_event_per_thousand() {
    let mut cfg = default_config("skip-repeat").unwrap();
    cfg.skip_repeat.as_mut().unwrap().outputs = 100_000;
    let rep = run_scenario("skip-repeat", &cfg).unwrap();
    let c = rep.checks.iter().find(|c| c.name.starts_with("skip events")).unwrap();
    assert!((99.0..=100.0).contains(&c.measured), "{}", c.measured);
}

#[test]
fn scfo_off_short_run_passes() {
    let mut cfg = default_config("scfo-off").unwrap();
    cfg.samples = 200_000;
    cfg.windows = 2;
    let rep = run_scenario("scfo-off", &cfg).unwrap();
    assert!(rep.passed(), "{}", rep.summary());
    assert!(rep.file_contents("summary.txt").is_none());
    assert!(!rep.files.is_empty());
}

#[test]
fn resources_report_the_reference_configuration() {
    let rep = run("resources");
    assert!(rep.passed(), "{}", rep.summary());
}
