use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const MESH: &str = r#""solver": {"mesh": {"r_min": 1e-3, "r_max": 20.0, "nodes_per_decade": 30, "l_max": 4}}"#;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ddform-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ddform"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn identity_builds_constant_z() {
    let dir = scratch("identity");
    let cfg = format!(r#"{{"family": {{"name": "identity"}}, {MESH}}}"#);
    let out = run(&dir, &cfg, &["build-z"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for row in rows(&dir.join("out/z_field.csv")) {
        assert!((row[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);
    }
    let s = summary(&dir);
    assert_eq!(s["command"], "build-z");
    assert_eq!(s["config_echo"]["solver"]["mesh"]["nodes_per_decade"], 30);
    assert_eq!(s["reproducibility"]["grid_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn k_family_matches_oracle_and_vanishes() {
    let dir = scratch("k");
    let cfg = format!(
        r#"{{"family": {{"name": "k", "kappa": 0.1, "s": 0.75}}, {MESH}, "experiments": ["compare-asymptotic", "corollary-scan"]}}"#
    );
    let out = run(&dir, &cfg, &["run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(&dir);
    assert_eq!(s["results"]["classification"], "vanishing");
    let oracle = s["checks"].as_array().unwrap().iter().find(|c| c["name"] == "asymptotic.oracle_deviation").unwrap();
    assert!(oracle["value"].as_f64().unwrap() < 1e-3);
    assert!(dir.join("out/criterion.csv").exists());
}

#[test]
fn non_dini_modulus_exits_with_admissibility_code() {
    let dir = scratch("inadmissible");
    let cfg = format!(r#"{{"family": {{"name": "k", "kappa": 0.1, "s": 0.4}}, {MESH}}}"#);
    let out = run(&dir, &cfg, &["check-omega"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Dini"));
    assert_eq!(summary(&dir)["checks"][0]["pass"], false);
}

#[test]
fn empty_suite_succeeds_with_no_checks() {
    let dir = scratch("empty");
    let out = run(&dir, r#"{"experiments": []}"#, &["run"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&dir)["checks"].as_array().unwrap().len(), 0);
}

#[test]
fn bad_configs_exit_with_config_code() {
    let dir = scratch("bad");
    for cfg in [r#"{"famly": {"name": "identity"}}"#, r#"{"n": 4}"#, "not json", r#"{"solver": {"p": 0.5}}"#] {
        let out = run(&dir, cfg, &["run"]);
        assert_eq!(out.status.code(), Some(2), "config {cfg}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = format!(r#"{{"family": {{"name": "angular", "amplitude_re": 0.05, "s": 0.75}}, {MESH}}}"#);
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    for dir in [&a, &b] {
        assert_eq!(run(dir, &cfg, &["build-z"]).status.code(), Some(0));
    }
    for file in ["z_field.csv", "profiles.csv", "zeta_table.csv"] {
        assert_eq!(fs::read(a.join("out").join(file)).unwrap(), fs::read(b.join("out").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn build_z_table_shapes() {
    let dir = scratch("shapes");
    let cfg = format!(r#"{{"family": {{"name": "g", "kappa": 0.05, "s": 0.75}}, {MESH}}}"#);
    assert_eq!(run(&dir, &cfg, &["build-z"]).status.code(), Some(0));
    let profiles = rows(&dir.join("out/profiles.csv"));
    let field = rows(&dir.join("out/z_field.csv"));
    assert_eq!(field.len() % profiles.len(), 0);
    assert!(field.len() > profiles.len());
    assert!(profiles.iter().all(|r| r.len() == 15));
    let tables = &summary(&dir)["tables"];
    for key in ["z_field", "profiles", "zeta_table"] {
        assert!(tables[key].is_string(), "{key}");
    }
}
