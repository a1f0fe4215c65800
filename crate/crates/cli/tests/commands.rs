use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn matchctl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matchctl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("MATCHCTL_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Shipped configuration shortened to 6 s at a coarser step.
fn short_config(dir: &Path) -> String {
    let text = matchctl::config::DEFAULT_CONFIG_JSON
        .replace("\"duration_seconds\": 30", "\"duration_seconds\": 6")
        .replace("\"dt\": 0.001", "\"dt\": 0.005");
    assert_ne!(text, matchctl::config::DEFAULT_CONFIG_JSON);
    let path = dir.join("short.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest_outputs_exist(out: &Path) -> Value {
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["schema"], "matchctl.manifest/1");
    for p in m["outputs"].as_array().unwrap() {
        assert!(Path::new(p.as_str().unwrap()).exists(), "{p}");
    }
    m
}

#[test]
fn params_report_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = matchctl(&["params"], dir.path());
    assert_eq!(code(&o), 0);
    let m = manifest_outputs_exist(dir.path());
    assert_eq!(m["command"], "params");
    let report = read_json(&dir.path().join("params.json"));
    let row = |name: &str| {
        report["rows"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["name"] == name)
            .unwrap()
            .clone()
    };
    assert!(row("a3")["relative_discrepancy"].as_f64().unwrap() < 1e-4);
    assert!((row("a2")["derived"].as_f64().unwrap() - 0.0698).abs() < 1e-4);
    assert!(row("a2")["relative_discrepancy"].as_f64().unwrap() > 0.1);
    let a7 = row("a7")["derived"].as_f64().unwrap();
    assert!(a7.is_finite() && a7 > 0.0);
    assert!((report["scales"]["length"].as_f64().unwrap() - 0.01).abs() < 1e-15);
}

#[test]
fn linear_demo_small_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = matchctl(&["linear-demo", "--n", "2", "--seed", "1"], dir.path());
    assert_eq!(code(&o), 0);
    manifest_outputs_exist(dir.path());
    let r = read_json(&dir.path().join("linear_demo.json"));
    assert!(r["round_trip_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["closed_loop"]["g_hat"]["shape"], serde_json::json!([2, 2]));

    let o = matchctl(&["linear-demo", "--n", "1"], dir.path());
    assert_eq!(code(&o), 0);
    let r = read_json(&dir.path().join("linear_demo.json"));
    let g_hat = r["closed_loop"]["g_hat"]["data"][0].as_f64().unwrap();
    assert!(g_hat != 0.0);
    assert!(r["round_trip_error"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn linear_demo_seed_sweep_n6() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 1..=50 {
        let o = matchctl(&["linear-demo", "--n", "6", "--seed", &seed.to_string()], dir.path());
        assert_eq!(code(&o), 0, "seed {seed}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn linear_demo_rejects_large_n() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&matchctl(&["linear-demo", "--n", "7"], dir.path())), 1);
}

#[test]
fn lemma1_nilpotent_block() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    std::fs::write(&path, r#"{"shape":[3,3],"data":[0,1,0,0,0,1,0,0,0]}"#).unwrap();
    let o = matchctl(&["lemma1", "--matrix", path.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0);
    let r = read_json(&dir.path().join("lemma1.json"));
    assert_eq!(r["dimension"], 3);
    assert_eq!(r["jordan_dimension"], 3);
    assert!(r["residual"].as_f64().unwrap() < 1e-12);
    let m = manifest_outputs_exist(dir.path());
    assert_eq!(m["inputs"][0], path.to_str().unwrap());
}

#[test]
fn check_matching_default_family() {
    let dir = tempfile::tempdir().unwrap();
    let o = matchctl(&["check-matching"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    manifest_outputs_exist(dir.path());
    let r = read_json(&dir.path().join("residuals.json"));
    assert_eq!(r["report"]["points"].as_array().unwrap().len(), 441);
    for key in ["max_geodesic", "max_dissipative", "max_potential"] {
        assert!(r["report"][key].as_f64().unwrap() <= 1e-6, "{key}");
    }
    let p = &r["report"]["points"][0];
    for key in ["q", "qdot", "geodesic_norm", "dissipative_norm", "potential_norm"] {
        assert!(!p[key].is_null(), "{key}");
    }
}

#[test]
fn check_matching_open_as_closed() {
    let dir = tempfile::tempdir().unwrap();
    let o = matchctl(
        &["check-matching", "--closed", "open", "--grid", "s=5:38:5,theta=-0.4:0.4:5"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let r = read_json(&dir.path().join("residuals.json"));
    for key in ["max_geodesic", "max_dissipative", "max_potential"] {
        assert!(r["report"][key].as_f64().unwrap() <= 1e-12, "{key}");
    }
}

#[test]
fn check_matching_tight_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = matchctl(
        &["check-matching", "--grid", "s=5:38:3,theta=-0.4:0.4:3", "--pde-tolerance", "1e-14"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn check_matching_bad_grid_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = matchctl(&["check-matching", "--grid", "s=5:38"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn simulate_missing_config() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let o = matchctl(&["simulate", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));
}

#[test]
fn simulate_bad_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = matchctl::config::DEFAULT_CONFIG_JSON.replace("\"dt\": 0.001", "\"dt\": \"fast\"");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let o = matchctl(&["simulate", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sim.dt"));
}

#[test]
fn simulate_linearized_kick_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let o = matchctl(
        &[
            "simulate",
            "--controller",
            "linearized",
            "--initial-s",
            "22",
            "--initial-thetadot",
            "3.6",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let m = manifest_outputs_exist(dir.path());
    assert_eq!(m["summary"]["status"]["status"], "diverged");
}

#[test]
fn simulate_nonlinear_converges_from_the_right() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let o = matchctl(&["simulate", "--config", &cfg, "--initial-s", "30"], dir.path());
    assert_eq!(code(&o), 0);
    let m = manifest_outputs_exist(dir.path());
    assert_eq!(m["config"]["sim"]["initial"][0], 30.0);
    assert!(m["summary"]["settle_time_seconds"].as_f64().unwrap() < 6.0);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,s,theta,s_dot,theta_dot,u,v_in,H_hat,H_hat_rate,saturated\n"));
}

#[test]
fn simulate_gains_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = matchctl(&["simulate", "--controller", "gains-file"], dir.path());
    assert_eq!(code(&o), 1);

    let path = dir.path().join("gains.json");
    std::fs::write(
        &path,
        r#"{"v":{"shape":[2],"data":[0,0]},
            "a":{"shape":[2,2],"data":[0,0,0,0]},
            "b":{"shape":[2,2],"data":[0,0,0,0]}}"#,
    )
    .unwrap();
    let o = matchctl(
        &["simulate", "--controller", "gains-file", "--gains", path.to_str().unwrap()],
        dir.path(),
    );
    assert!(matches!(code(&o), 0 | 2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let run = || {
        let o = matchctl(&["simulate", "--config", &cfg, "--initial-s", "30"], dir.path());
        assert_eq!(code(&o), 0);
        (
            std::fs::read(dir.path().join("trajectory.csv")).unwrap(),
            std::fs::read(dir.path().join("manifest.json")).unwrap(),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn out_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_matchctl"))
        .args(["linear-demo", "--n", "2"])
        .env("MATCHCTL_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(out.join("manifest.json").exists());
}
