use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn starkmbl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starkmbl"))
        .args(args)
        .env_remove("STARKMBL_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, output: &str) -> PathBuf {
    let path = dir.join(name);
    let config = format!(
        r#"{{
  "sizes": [8, 6],
  "fields": [1.5, 0.5],
  "eps": [0.5, 0.3],
  "samples": {{"6": 6, "8": 4}},
  "master_seed": 42,
  "k_window": 8,
  "output": "{output}"
}}"#
    );
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn every_subcommand_has_help() {
    for sub in [&[][..], &["spectrum"], &["sweep"], &["collapse"], &["phase-diagram"]] {
        let mut args = sub.to_vec();
        args.push("--help");
        let o = starkmbl(&args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        assert!(stdout(&o).contains("Usage"));
    }
}

#[test]
fn two_site_spectrum() {
    let o = starkmbl(&["spectrum", "--L", "2", "--N", "1", "--W", "0", "--F", "0", "--k", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "level,energy,entropy");
    let energies: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(energies.len(), 2);
    assert!((energies[0] + 0.5).abs() < 1e-12);
    assert!((energies[1] - 0.5).abs() < 1e-12);
    for r in &rows[1..] {
        let s: f64 = r.split(',').nth(2).unwrap().parse().unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-12);
    }
}

#[test]
fn spectrum_is_deterministic_and_dumps_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("h.txt");
    let report = dir.path().join("report.txt");
    let args = [
        "spectrum", "--L", "10", "--F", "0.8", "--seed", "5", "--eps", "0.4", "--k", "20",
    ];
    let a = starkmbl(&args);
    let mut with_files = args.to_vec();
    with_files.extend(["--dump-matrix", dump.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    let b = starkmbl(&with_files);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(fs::read(&report).unwrap(), b.stdout);
    let text = fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("% symmetric 252 252"));
    assert!(stdout(&a).contains("# mean_r="));
}

#[test]
fn oversized_chain_is_a_resource_error() {
    let o = starkmbl(&["spectrum", "--L", "30"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("dimension"));
}

#[test]
fn invalid_parameters_exit_with_usage_code() {
    let o = starkmbl(&["spectrum", "--L", "4", "--N", "6"]);
    assert_eq!(o.status.code(), Some(2));
    let o = starkmbl(&["spectrum", "--L", "4", "--eps", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = write_config(dir.path(), "one.json", "one/results.csv");
    let many = write_config(dir.path(), "many.json", "many/results.csv");
    let o = starkmbl(&["--threads", "1", "sweep", "--config", one.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = starkmbl(&["--threads", "8", "sweep", "--config", many.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = fs::read(dir.path().join("one/results.csv")).unwrap();
    let b = fs::read(dir.path().join("many/results.csv")).unwrap();
    assert_eq!(a, b);

    let csv = String::from_utf8(a).unwrap();
    let hash = csv.lines().next().unwrap().strip_prefix("# config_sha256=").unwrap();
    assert_eq!(csv.lines().count(), 2 + 2 * 2 * 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("one/results.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config_hash"], hash);
    assert_eq!(manifest["master_seed"], 42);
    assert_eq!(manifest["command"], "sweep");
}

#[test]
fn interrupted_sweep_resumes_to_the_same_table() {
    let dir = tempfile::tempdir().unwrap();
    let fresh = write_config(dir.path(), "fresh.json", "fresh/results.csv");
    let resumed = write_config(dir.path(), "resumed.json", "resumed/results.csv");
    assert!(starkmbl(&["sweep", "--config", fresh.to_str().unwrap()]).status.success());

    let cfg = resumed.to_str().unwrap();
    let o = starkmbl(&["sweep", "--config", cfg, "--max-columns", "1"]);
    assert_eq!(o.status.code(), Some(6), "{}", stderr(&o));
    assert!(stderr(&o).contains("--resume"));
    assert_eq!(fs::read(dir.path().join("resumed/results.csv")).unwrap(), b"");
    let o = starkmbl(&["sweep", "--config", cfg, "--resume"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(dir.path().join("fresh/results.csv")).unwrap(),
        fs::read(dir.path().join("resumed/results.csv")).unwrap()
    );
}

#[test]
fn sweep_output_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", "elsewhere/results.csv");
    let target = dir.path().join("override");
    let o = Command::new(env!("CARGO_BIN_EXE_starkmbl"))
        .args(["sweep", "--config", cfg.to_str().unwrap()])
        .env("STARKMBL_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("results.csv").exists());
    assert!(!dir.path().join("elsewhere").exists());
}

#[test]
fn unwritable_output_fails_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let cfg = write_config(dir.path(), "c.json", "blocker/results.csv");
    let o = starkmbl(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"sizes":[8],"fields":[1.0],"master_seed":1,"output":"r.csv","k_window":2}"#).unwrap();
    let o = starkmbl(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k_window"), "{}", stderr(&o));
    let o = starkmbl(&["sweep", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn collapse_recovers_planted_critical_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = starkmbl(&[
        "collapse",
        "--results",
        fixture("planted_results.csv").to_str().unwrap(),
        "--eps",
        "0.5",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("collapse_eps0.5.json")).unwrap()).unwrap();
    let fc = report["field_c"].as_f64().unwrap();
    let nu = report["nu"].as_f64().unwrap();
    assert!((fc - 1.0).abs() < 0.02, "{fc}");
    assert!((nu - 0.8).abs() < 0.05, "{nu}");
    assert_eq!(report["unidentifiable"], false);
    assert_eq!(report["per_w"].as_array().unwrap().len(), 10);

    let curves = fs::read_to_string(dir.path().join("collapse_eps0.5_rescaled.csv")).unwrap();
    let rows: Vec<&str> = curves.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "x,y,L");
    assert_eq!(rows.len(), 1 + 4 * 19);
    assert!(dir.path().join("collapse_eps0.5.manifest.json").exists());
}

#[test]
fn collapse_flags_flat_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_starkmbl"))
        .args(["collapse", "--results", fixture("flat_results.csv").to_str().unwrap(), "--eps", "0.5"])
        .args(["--w-grid", "0.5,1.0"])
        .env("STARKMBL_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("collapse_eps0.5.json")).unwrap()).unwrap();
    assert_eq!(report["unidentifiable"], true);
}

#[test]
fn collapse_at_missing_energy_density_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = starkmbl(&[
        "collapse",
        "--results",
        fixture("planted_results.csv").to_str().unwrap(),
        "--eps",
        "0.7",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn phase_diagram_over_planted_edge() {
    let dir = tempfile::tempdir().unwrap();
    let o = starkmbl(&[
        "phase-diagram",
        "--results",
        fixture("planted_results.csv").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("phase_diagram.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("eps"))
        .map(|l| l.split(',').take(2).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!((rows[0][0] - 0.3).abs() < 1e-12 && (rows[0][1] - 0.8).abs() < 0.02, "{rows:?}");
    assert!((rows[1][0] - 0.5).abs() < 1e-12 && (rows[1][1] - 1.0).abs() < 0.02, "{rows:?}");
    let edge: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("phase_diagram.json")).unwrap()).unwrap();
    assert_eq!(edge["eps_at_max"], 0.5);
}
