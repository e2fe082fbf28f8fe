use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use impact_hedge::scenario::{builtin, GridSpec, MonteCarloSpec, PATH_COLUMNS};

const GOLDEN_HEADER: &str = "t,xi,xi_hat,xi_hat_const,X_opt,X_const,X_myopic,u_opt,u_const,u_myopic";

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impact-hedge"))
        .args(args)
        .env_remove("IMPACT_HEDGE_OUT")
        .output()
        .expect("binary runs")
}

fn scenario_file(dir: &Path) -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/").to_string() + dir.to_str().unwrap()
}

/// A fig3 variant small enough for a test.
fn small_asian(dir: &Path) -> String {
    let mut s = builtin("fig3_asian").unwrap();
    s.name = "asian_small".into();
    s.grid = GridSpec::Steps(100);
    s.monte_carlo = Some(MonteCarloSpec { paths: 500, seed: 42 });
    s.oracle.tree_depth = 8;
    s.oracle.signal_checks = 3;
    let p = dir.join("asian_small.json");
    fs::write(&p, s.to_json().unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "json") && !p.ends_with("asian_small.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn csv_header_is_stable() {
    assert_eq!(PATH_COLUMNS.join(","), GOLDEN_HEADER);
    let out = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--config", "fig1_jump", "--out-dir", out.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.path().join("fig1_jump_paths.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(GOLDEN_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4001);
    let last = rows.last().unwrap();
    assert_eq!(last[0], "1.0");
    // Constrained position ends at the terminal target; the free optimum stops trading.
    assert_eq!(last[5].parse::<f64>().unwrap(), 0.0);
    assert_eq!(last[7].parse::<f64>().unwrap(), 0.0);
    for name in ["fig1_jump_costs.json", "fig1_jump_oracle.json"] {
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.path().join(name)).unwrap()).unwrap();
        assert_eq!(v["scenario"].as_str().or(v["deterministic"]["scenario"].as_str()), Some("fig1_jump"));
    }
}

#[test]
fn list_and_validate() {
    let o = cli(&["list-scenarios"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["fig1_jump", "fig2_singularity", "fig3_asian"]);

    for name in ["fig1_jump.json", "fig2_singularity.json", "fig3_asian.json"] {
        let o = cli(&["validate", "--config", &scenario_file(Path::new(name))]);
        assert!(o.status.success());
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["issues"].as_array().unwrap().len(), 0);
    }
    let o = cli(&["validate", "--config", &scenario_file(Path::new("fig1_jump_misaligned.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["issues"][0]["field"], "grid");
    assert!(v["issues"][0]["message"].as_str().unwrap().contains("0.5"));
}

#[test]
fn bad_configs_fail_with_a_field_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let text = builtin("fig1_jump").unwrap().to_json().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(&p, text.replace("\"kappa\": 1.0", "\"kappa\": -1.0")).unwrap();
    let o = cli(&["validate", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"kappa\""));

    fs::write(&p, text.replace("\"kappa\"", "\"kapa\"")).unwrap();
    let o = cli(&["run", "--config", p.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kapa") && err.contains("line"), "{err}");

    let o = cli(&["run", "--config", "no_such_scenario"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreachable_constraint_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["run", "--config", &scenario_file(Path::new("fig3_asian_unreachable.json")), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unreachable"));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = small_asian(cfg_dir.path());
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let out = tempfile::tempdir().unwrap();
        for c in [cfg.as_str(), "fig1_jump"] {
            let o = cli(&["run", "--config", c, "--out-dir", out.path().to_str().unwrap(), "--threads", threads]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
        runs.push(read_all(out.path()));
    }
    assert_eq!(runs[0].len(), 6);
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_override_and_env_out_dir() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = small_asian(cfg_dir.path());
    let a = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_impact-hedge"))
        .args(["run", "--config", &cfg, "--seed-override", "7"])
        .env("IMPACT_HEDGE_OUT", a.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = tempfile::tempdir().unwrap();
    assert!(cli(&["run", "--config", &cfg, "--out-dir", b.path().to_str().unwrap()]).status.success());
    let costs = |d: &Path| -> serde_json::Value { serde_json::from_slice(&fs::read(d.join("asian_small_costs.json")).unwrap()).unwrap() };
    let (ca, cb) = (costs(a.path()), costs(b.path()));
    assert_eq!(ca["seed"], 7);
    assert_eq!(cb["seed"], 42);
    assert_ne!(ca["optimal"]["mean"]["total"], cb["optimal"]["mean"]["total"]);
}
