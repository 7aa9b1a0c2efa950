use std::path::Path;
use std::process::{Command, Output};

use adacomp_cli::config::{bundled, parse_scenario, validate, Policy};
use adacomp_cli::run::{self, RunOptions};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adacomp"));
    c.env_remove("ADACOMP_OUTPUT_DIR").env("SOURCE_DATE_EPOCH", "0");
    c
}

fn scenario_path(name: &str) -> String {
    format!("{}/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> String {
    let text = std::fs::read_to_string(scenario_path("vB")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn bundled_va_loads() {
    let s = bundled("vA").unwrap();
    assert_eq!(s.model.prior_cov()[(0, 0)], 16.0);
    assert_eq!(s.model.prior_cov()[(1, 1)], 16.0);
    assert_eq!(s.model.prior_cov()[(0, 1)], 0.0);
    assert_eq!(s.actions.as_ref().unwrap().len(), 3);
}

#[test]
fn config_round_trips_with_stable_hash() {
    for name in ["vA", "vB", "roundrobin", "theorem5_demo"] {
        let s = bundled(name).unwrap();
        let again = parse_scenario(&s.config.to_json()).unwrap();
        assert_eq!(again, s.config);
        assert_eq!(again.hash(), s.config.hash());
        assert_eq!(s.config.hash().len(), 64);
    }
}

#[test]
fn unknown_field_is_rejected() {
    let mut text = std::fs::read_to_string(scenario_path("vB")).unwrap();
    text = text.replacen('{', "{\"extra\": 1,", 1);
    let err = parse_scenario(&text).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("extra"));
}

#[test]
fn indefinite_prior_is_config_error_naming_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "bad.json", |v| {
        v["model"]["prior_cov"] = serde_json::json!([[1.0, 0.0], [0.0, -1.0]]);
    });
    let out = bin().args(["run", &path]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("P0") || err.contains("prior"), "{err}");
}

#[test]
fn greedy_finite_on_va_matches_hand_computation() {
    let out = bin().args(["run", &scenario_path("vA")]).output().unwrap();
    assert!(out.status.success());
    let v = json(&out);
    let det = v["summary"]["det_pm"].as_f64().unwrap();
    assert!((det - 256.0 / 105.0).abs() < 1e-12);
    assert_eq!(v["stages"][0]["choice"], "I/2");
    assert_eq!(v["stages"][1]["choice"], "Diag(1,0)");
}

#[test]
fn waterfill_on_vb_attains_relaxed_bound() {
    let s = bundled("vB").unwrap();
    for seed in [None, Some(7)] {
        let opts = RunOptions { seed, ..RunOptions::default() };
        let out = run::execute(&s, Policy::Waterfill, &opts).unwrap();
        assert!((out.trace.net_gain - 0.5 * 12.8f64.ln()).abs() < 1e-10);
        assert!((out.refs.h_r.unwrap() - 0.5 * 12.8f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn stage_gains_sum_to_net_gain() {
    let s = bundled("roundrobin").unwrap();
    for bits in [false, true] {
        let opts = RunOptions { bits, ..RunOptions::default() };
        let r = run::run(&s, &opts).unwrap();
        let sum: f64 = r.stages.iter().map(|st| st.stage_gain).sum();
        assert_eq!(sum, r.summary.net_gain);
    }
}

#[test]
fn zero_horizon_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "m0.json", |v| v["m"] = 0.into());
    let out = bin().args(["run", &path, "--format", "csv"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "k,choice,stage_gain,cumulative_gain,det_p,entropy,units\n"
    );
    let out = bin().args(["run", &path]).output().unwrap();
    let v = json(&out);
    assert_eq!(v["stages"].as_array().unwrap().len(), 0);
    assert_eq!(v["summary"]["net_gain"].as_f64(), Some(0.0));
}

#[test]
fn runs_are_deterministic() {
    let run = || {
        let out = bin()
            .args(["compare", &scenario_path("vB"), "--policies", "greedy_scalar,waterfill,blockfill", "--seed", "3", "--jobs", "3"])
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn repro_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for (name, code) in [
        ("vA", 0),
        ("vB", 0),
        ("roundrobin", 0),
        ("theorem5_demo", 0),
        ("vA_alpha_sweep", 4),
    ] {
        let out = bin()
            .args(["repro", name, "--output-dir"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(code), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    // the sweep is written even though a golden check fails
    let sweep = std::fs::read_to_string(dir.path().join("vA_alpha_sweep.csv")).unwrap();
    assert!(sweep.starts_with("alpha,greedy_det,alternating_det,ratio\n"));
    assert_eq!(sweep.lines().count(), 62);
    assert!(dir.path().join("vB.json").exists());
}

#[test]
fn bits_flag_scales_by_ln2() {
    let nats = json(&bin().args(["run", &scenario_path("vB")]).output().unwrap());
    let bits = json(&bin().args(["run", &scenario_path("vB"), "--bits"]).output().unwrap());
    let n = nats["summary"]["net_gain"].as_f64().unwrap();
    let b = bits["summary"]["net_gain"].as_f64().unwrap();
    assert_eq!(bits["summary"]["units"], "bits");
    assert!((b * std::f64::consts::LN_2 - n).abs() < 1e-12);
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("ADACOMP_OUTPUT_DIR", dir.path())
        .args(["run", &scenario_path("vB"), "--format", "csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("vB-greedy_scalar.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn output_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("nested/out.json");
    let out = bin()
        .env("ADACOMP_OUTPUT_DIR", dir.path())
        .args(["run", &scenario_path("vA"), "--output"])
        .arg(&target)
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(target).unwrap()).unwrap();
    assert_eq!(v["policy"], "greedy_finite");
}

#[test]
fn several_configs_run_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", &scenario_path("vA"), &scenario_path("vB"), &scenario_path("roundrobin"), "--jobs", "3", "--output-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    for f in ["vA-greedy_finite.json", "vB-greedy_scalar.json", "roundrobin-greedy_scalar.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn compare_orders_policies() {
    let out = bin()
        .args(["compare", &scenario_path("vB"), "--policies", "greedy_scalar,oracle_grid,waterfill", "--grid-resolution", "2000"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v = json(&out);
    let gain = |i: usize| v["rows"][i]["net_gain"].as_f64().unwrap();
    assert!(gain(0) <= gain(1) + 1e-12);
    assert!(gain(1) <= gain(2) + 1e-12);
}

#[test]
fn grid_resolution_below_minimum_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "grid.json", |v| v["policy"] = "oracle_grid".into());
    let out = bin().args(["run", &path, "--grid-resolution", "10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exhaustive_over_budget_suggests_waterfill() {
    let mut config = bundled("vA").unwrap().config;
    config.policy = Policy::OracleExhaustive;
    config.m = 20;
    let err = validate(config).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("waterfill"));
}

#[test]
fn check_theorems_reports_both_conditions() {
    let out = bin().args(["check-theorems", &scenario_path("theorem5_demo")]).output().unwrap();
    assert!(out.status.success());
    let v = json(&out);
    let theorems = v["theorems"].as_array().unwrap();
    assert_eq!(theorems.len(), 2);
    assert!(theorems.iter().all(|t| t["holds"] == true));
    let s = &v["summary"];
    assert!((s["h_g"].as_f64().unwrap() - s["h_r"].as_f64().unwrap()).abs() < 1e-9);
}
