use std::path::Path;
use std::process::{Command, Output};

fn scfo(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scfo")).args(args).env("SCFO_OUT_DIR", out_dir).output().expect("spawn scfo")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_scenarios_names_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = scfo(&["list-scenarios"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    for name in ["selfclock-washout", "zone1-vs-zone2-alias", "requant-loss", "skip-repeat", "timing", "resources"] {
        assert!(s.contains(name), "{name} missing from {s}");
    }
}

#[test]
fn estimate_resources_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = scfo(&["estimate-resources"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("multipliers 3648"), "{s}");
    assert!(s.contains("m20k 1856"), "{s}");
    assert_eq!(s.matches("power not estimated").count(), 1);
    let real = stdout(&scfo(&["estimate-resources", "--real"], dir.path()));
    assert!(real.contains("multipliers 1856"), "{real}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(scfo(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(scfo(&["--jobs", "0", "list-scenarios"], dir.path()).status.code(), Some(2));
    assert_eq!(scfo(&["timing-sim"], dir.path()).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = scfo(&["run-scenario", "bogus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scenario"));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"x\"\n").unwrap();
    let o = scfo(&["run-scenario", "timing", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = scfo(&["run-scenario", "timing", "--print-config", "--seed", "7"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("seed = 7"));
    let path = dir.path().join("timing.toml");
    std::fs::write(&path, &text).unwrap();
    let o = scfo(&["run-scenario", "timing", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(dir.path().join("timing/ticks_fa.csv").exists());
    assert!(dir.path().join("timing/summary.txt").exists());
}

#[test]
fn failing_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = scfo(&["run-scenario", "skip-repeat"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL impacted fraction"));
    assert!(dir.path().join("skip-repeat/skip_events.csv").exists());
}

#[test]
fn design_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let bank = dir.path().join("b.txt");
    let o = scfo(&["design-filter", "--taps", "16", "--phases", "64", "--out", bank.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("b_response.csv").exists());
    let text = std::fs::read_to_string(&bank).unwrap();
    assert!(text.contains("taps 16") && text.contains("phases 64"));
    let o = scfo(&["analyze-response", "--bank", bank.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("response.csv").exists());
}

#[test]
fn verify_demux_passes() {
    let dir = tempfile::tempdir().unwrap();
    for extra in [&[][..], &["--fixed"][..]] {
        let mut args = vec!["verify-demux", "--samples", "20000", "--taps", "16", "--phases", "64"];
        args.extend_from_slice(extra);
        let o = scfo(&args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(stdout(&o).starts_with("PASS"));
    }
}

#[test]
fn timing_sim_writes_ticks() {
    let dir = tempfile::tempdir().unwrap();
    let o = scfo(&["timing-sim", "--f-a", "1000.5", "--ticks", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ticks.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("tick,"));
}
