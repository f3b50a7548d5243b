use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn nuexp(args: &[&str], cfg: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nuexp")).args(args).arg("--config").arg(cfg).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn flagship_verifies_with_constants() {
    let out = nuexp(&["verify"], &config("flagship.toml"));
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let r = &v["report"];
    assert_eq!(r["passed"]["all"], true);
    let (alpha, c) = (r["alpha_exp"].as_f64().unwrap(), r["c"].as_f64().unwrap());
    assert!(alpha > 0.0 && alpha < 1.0 && c > 0.0);
    assert_eq!(v["gamma0"]["source"], "estimated");
}

#[test]
fn gross_contraction_exits_one() {
    let out = nuexp(&["verify"], &config("contracting.toml"));
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["report"]["passed"]["H3"], false);
    assert_eq!(v["report"]["passed"]["all"], false);
}

#[test]
fn linear_map_has_empty_v_and_exact_exponents() {
    let cfg = config("linear.toml");
    let out = nuexp(&["verify"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["report"]["V"]["nodes"], 0);

    let out = nuexp(&["lyapunov"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for seed in v["per_seed"].as_array().unwrap() {
        let e: Vec<f64> = seed["exponents"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!((e[0] - 4f64.ln()).abs() <= 1e-10 && (e[1] - 2f64.ln()).abs() <= 1e-10, "{e:?}");
    }
    assert_eq!(v["non_uniform_at_fixed_point"], false);
}

#[test]
fn full_shift_pressure_and_parry() {
    let out = nuexp(&["equilibrium"], &config("full_shift.toml"));
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["pressure"].as_f64().unwrap() - 2f64.ln()).abs() <= 1e-12);
    assert!(v["parry_max_entry_diff"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn zero_potential_on_the_induced_sft_is_parry() {
    let out = nuexp(&["equilibrium"], &config("flagship.toml"));
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["d"], 32);
    let htop = v["topological_entropy"].as_f64().unwrap();
    assert!((v["entropy"].as_f64().unwrap() - htop).abs() <= 1e-10);
    assert!((htop - 8f64.ln()).abs() <= 1e-12);
    assert!(v["parry_max_entry_diff"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn high_variation_warns_but_computes() {
    let out = nuexp(&["equilibrium"], &config("high_variation.toml"));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: potential fails"));
    let v = json(&out);
    assert_eq!(v["low_variation"], false);
    assert!(v["pressure"].as_f64().unwrap().is_finite());
}

#[test]
fn variational_gaps() {
    let out = nuexp(&["variational", "--format", "csv"], &config("golden_mean.toml"));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial,gap"));
    let gaps: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(gaps.len(), 1000);
    assert!(gaps.iter().all(|&g| g >= -1e-10));
}

#[test]
fn gibbs_scan_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nuexp"))
        .args(["gibbs", "--quiet", "--config"])
        .arg(config("golden_mean.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("gibbs.json")).unwrap()).unwrap();
    assert_eq!(v["within_bounds"], true);
    let rows = std::fs::read_to_string(dir.path().join("gibbs.csv")).unwrap();
    assert!(rows.starts_with("word,mu,s_n_phi,ratio\n0,"));
}

#[test]
fn doubling_map_has_every_hyperbolic_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[map]\neigenvalues = [2]\ndeformed = false\n\n[run]\nseeds = 2\nsteps = 5000\nc = 0.4\n");
    let out = nuexp(&["hyp-times"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    for s in json(&out)["per_seed"].as_array().unwrap() {
        assert_eq!(s["times"], 5000);
        assert_eq!(s["density"].as_f64(), Some(1.0));
    }
}

#[test]
fn failed_mean_condition_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // sup a = ln 2 is below c₂ = 1.5·c
    let cfg = write_config(dir.path(), "[map]\neigenvalues = [2]\ndeformed = false\n\n[run]\nseeds = 1\nsteps = 100\nc = 0.6\n");
    let out = nuexp(&["hyp-times"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["per_seed"][0]["error"].as_str().unwrap().contains("precondition"));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[map]\neigenvalues = [2, 4]\nnot_a_field = 1\n");
    assert_eq!(nuexp(&["verify"], &bad).status.code(), Some(2));
    assert_eq!(nuexp(&["verify"], &dir.path().join("missing.toml")).status.code(), Some(2));
    assert_eq!(nuexp(&["bogus"], &bad).status.code(), Some(2));
    let no_map = config("full_shift.toml");
    assert_eq!(nuexp(&["lyapunov"], &no_map).status.code(), Some(2));
}
