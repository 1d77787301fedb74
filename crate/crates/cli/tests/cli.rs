use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spatial-hom"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn record(out: &Output) -> HashMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn num(rec: &HashMap<String, String>, key: &str) -> f64 {
    rec[key].parse().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn qfi_prints_bounds() {
    let out = run(&["qfi", "--sigma-k", "0.029", "--d", "335", "--n", "10000"]);
    assert!(out.status.success());
    let rec = record(&out);
    assert!((num(&rec, "qfi_rad2") / 1.888e8 - 1.0).abs() < 1e-3);
    assert!((num(&rec, "crb_variance_form_urad") - 0.728).abs() < 1e-3);
    assert!((num(&rec, "crb_half_width_form_urad") - 0.364).abs() < 1e-3);
}

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run(&["simulate", "--delta-theta", "1.01", "--n-events", "70000", "--seed", "7", "--out", path_str(p)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("event_index,delta_k_per_um,outcome\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 70_001);
}

#[test]
fn pattern_round_trip_recovers_deflection() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pattern.csv");
    let out = run(&["pattern", "--delta-theta", "0.52", "--nu", "0.85", "--seed", "3", "--out", path_str(&p)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = run(&["estimate", path_str(&p)]);
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    let rec = record(&est);
    assert_eq!(rec["kind"], "pattern");
    assert!((num(&rec, "delta_theta_mrad") / 0.52 - 1.0).abs() < 0.03, "{rec:?}");
}

#[test]
fn events_round_trip_recovers_deflection() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("events.csv");
    assert!(run(&["simulate", "--delta-theta", "0.96", "--n-events", "20000", "--seed", "1", "--out", path_str(&p)])
        .status
        .success());
    let rec = record(&run(&["estimate", path_str(&p)]));
    assert_eq!(rec["kind"], "events");
    let est = num(&rec, "delta_theta_mrad");
    let std_mrad = num(&rec, "std_urad") * 1e-3;
    assert!((est - 0.96).abs() < 4.0 * std_mrad, "{rec:?}");
}

#[test]
fn malformed_csv_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "event_index,delta_k_per_um,outcome\n0,0.01,1\n1,oops,2\n").unwrap();
    let out = run(&["estimate", path_str(&p)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.csv:3:"), "{err}");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[geometry]\nsigma_k_per_um = 0.058\nd_mm = 335\n[run]\nseed = 5\n").unwrap();
    let rec = record(&run(&["--config", path_str(&cfg), "qfi"]));
    assert!((num(&rec, "qfi_rad2") / (4.0 * 1.8876245e8) - 1.0).abs() < 1e-9);
    let rec = record(&run(&["--config", path_str(&cfg), "qfi", "--sigma-k", "0.029"]));
    assert!((num(&rec, "qfi_rad2") / 1.8876245e8 - 1.0).abs() < 1e-9);

    std::fs::write(&cfg, "[geometry]\nsigma = 1\n").unwrap();
    let out = run(&["--config", path_str(&cfg), "qfi"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn invalid_model_values_exit_with_config_code() {
    assert_eq!(run(&["qfi", "--gamma", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
}

#[test]
fn non_identifiable_estimate_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("events.csv");
    assert!(run(&["simulate", "--delta-theta", "1.0", "--n-events", "100", "--out", path_str(&p)]).status.success());
    assert_eq!(run(&["estimate", path_str(&p), "--nu", "0"]).status.code(), Some(3));
}

#[test]
fn fisher_and_surface_csv() {
    let out = run(&["fisher", "--from", "0.1", "--to", "2.0", "--points", "20"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta_theta_mrad,fisher_rad2"));
    for l in lines {
        let f: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!((f / 1.8876245e8 - 1.0).abs() < 1e-6);
    }
    let out = run(&["surface", "--delta-theta", "1.0", "--sigma-k-steps", "3", "--d-steps", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("sigma_k_per_um,d_mm,fisher_rad2\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn study_and_working_point() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("study.csv");
    let out = run(&["study", "--delta-theta", "1.01", "--trials", "30", "--n-events", "2000", "--seed", "2", "--out", path_str(&p)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec = record(&out);
    for key in ["n_trials", "n_events", "empirical_var", "crb_var", "ratio", "bias"] {
        assert!(rec.contains_key(key), "{key}");
    }
    assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 31);

    let rec = record(&run(&["working-point", "--gamma", "0.1", "--nu", "0.85"]));
    assert!((num(&rec, "delta_theta_mrad") - 0.1).abs() < 1e-6);
    assert_eq!(rec["at_boundary"], "true");
}
