use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_simplemax"));
    c.env_remove("SIMPLEMAX_WORKERS");
    c
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_of(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn mechanism_eval_succeeds_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("m1_equilibrium.json");
    let out = |name: &str| {
        let p = dir.path().join(name);
        let o = run(&["mechanism-eval", "--scenario", sc.to_str().unwrap(), "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(&p).unwrap()
    };
    let a = out("a.json");
    assert_eq!(a, out("b.json"));
    let v: Value = serde_json::from_slice(&a).unwrap();
    let u: Vec<f64> = v["outputs"]["utilities"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(u.iter().all(|x| (0.0..=1.0).contains(x)));
    assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(dir.path().join("a.json.timing.json").exists());
}

#[test]
fn monte_carlo_is_worker_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("coin_monte_carlo.json");
    let go = |workers: &str, env: Option<&str>| {
        let p = dir.path().join("mc.json");
        let mut c = bin();
        c.args(["mechanism-eval", "--scenario", sc.to_str().unwrap(), "--trials", "30000", "--out", p.to_str().unwrap()]);
        if !workers.is_empty() {
            c.args(["--workers", workers]);
        }
        if let Some(e) = env {
            c.env("SIMPLEMAX_WORKERS", e);
        }
        let o = c.output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let timing = json_of(&dir.path().join("mc.json.timing.json"));
        (std::fs::read(&p).unwrap(), timing["workers"].as_u64().unwrap())
    };
    let (one, w1) = go("1", None);
    let (four, w4) = go("4", None);
    let (env, we) = go("", Some("3"));
    assert_eq!((w1, w4, we), (1, 4, 3));
    assert_eq!(one, four);
    assert_eq!(one, env);
}

#[test]
fn seed_flag_overrides_file() {
    let sc = scenario("coin_monte_carlo.json");
    let go = |seed: &str| run(&["mechanism-eval", "--scenario", sc.to_str().unwrap(), "--trials", "5000", "--seed", seed]).stdout;
    assert_eq!(go("5"), go("5"));
    assert_ne!(go("5"), go("6"));
}

#[test]
fn schema_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"kind\": \"coin\",\n  \"m\": 1,\n  \"bogus\": 3\n}\n").unwrap();
    let o = run(&["mechanism-eval", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bogus") && err.contains("line 4"), "{err}");

    std::fs::write(&bad, r#"{"kind": "coin", "m": 2, "n": 2, "p": 0.7, "strategies": [{"pure": [0.1, 0.2]}, {"pure": [0.5, 0.5]}]}"#).unwrap();
    assert_eq!(run(&["mechanism-eval", "--scenario", bad.to_str().unwrap()]).status.code(), Some(2));

    std::fs::write(&bad, r#"{"kind": "coin", "m": 2, "n": 2, "p": 0.3, "method": "monte_carlo", "strategies": [{"pure": [0.1, 0.2]}, {"pure": [0.5, 0.5]}]}"#).unwrap();
    let o = run(&["mechanism-eval", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    assert_eq!(run(&["no-such-verb"]).status.code(), Some(2));
    assert_eq!(run(&["figure2"]).status.code(), Some(2));
}

#[test]
fn failed_checks_exit_3_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m2.json");
    let o = run(&["equilibrium-verify", "--scenario", scenario("m2_equilibrium.json").to_str().unwrap(), "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let v = json_of(&p);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.iter().any(|c| c["passed"] == false));
    assert!(checks.iter().any(|c| c["passed"] == true));
}

#[test]
fn m1_equilibrium_verifies() {
    let o = run(&["equilibrium-verify", "--scenario", scenario("m1_equilibrium.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn figure1_csv_masses_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f1.csv");
    let o = run(&["figure1", "--scenario", scenario("figure1.json").to_str().unwrap(), "--format", "csv", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("strategy,bin_left,bin_right,mass"));
    let mut totals = std::collections::BTreeMap::<String, f64>::new();
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let mass: f64 = cols[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&mass));
        *totals.entry(cols[0].to_string()).or_default() += mass;
    }
    assert!(totals.len() >= 2);
    for (name, t) in totals {
        assert!((t - 1.0).abs() < 1e-9, "{name}: {t}");
    }
    assert_eq!(json_of(&dir.path().join("f1.csv.report.json"))["command"][0], "figure1");
}

#[test]
fn figure2_weights_sum_to_one() {
    let o = run(&["figure2", "--p", "0.4"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    for player in v["outputs"]["players"].as_array().unwrap() {
        let ws: Vec<f64> = player["support"].as_array().unwrap().iter().map(|s| s["weight"].as_f64().unwrap()).collect();
        assert!(ws.iter().all(|w| (0.0..=1.0).contains(w)));
        assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert_eq!(run(&["figure2", "--p", "0.7"]).status.code(), Some(2));
}

#[test]
fn hedging_refuses_infeasible_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("h.json");
    std::fs::write(&bad, r#"{"kind": "coin", "seed": 1, "trials": 100, "hedging": {"m": 32, "p": 0.1, "eps": 0.04}}"#).unwrap();
    assert_eq!(run(&["hedging-verify", "--scenario", bad.to_str().unwrap()]).status.code(), Some(2));
    let o = run(&["hedging-verify", "--scenario", scenario("hedging_illustrative.json").to_str().unwrap(), "--trials", "2000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gamma_sweep_and_certificate() {
    let o = run(&["gamma-sweep", "--scenario", scenario("gamma_sweep.json").to_str().unwrap(), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("m,sigma,gamma_theorem2,gamma_per_event"));
    assert_eq!(text.lines().count(), 10);

    let o = run(&["edgeworth-gamma", "--scenario", scenario("belief_lemma5.json").to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0) | Some(3)));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let out = &v["outputs"];
    for key in ["gamma_theorem2", "gamma_per_event", "delta_hat", "D", "D_hat_empirical"] {
        assert!(out.get(key).is_some(), "missing {key}");
    }
}
