use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clogsim::ScenarioConfig;

fn clogsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clogsim")).args(args).output().expect("spawn clogsim")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_table(dir: &Path) -> PathBuf {
    let out = dir.join("table.txt");
    let o = clogsim(&["build-table", "--r-min", "0.05", "--dr", "0.05", "--ntheta", "16", "--nrho", "4", "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

/// Uniform preset shrunk to a short run on a coarse grid.
fn small_config(dir: &Path) -> PathBuf {
    let mut cfg = clogsim::preset_uniform();
    cfg.grid.points = 11;
    cfg.grid.t_final = 0.02;
    cfg.output.snapshot_times = vec![0.01, 0.02];
    cfg.table.n_theta = 16;
    cfg.table.n_rho = 4;
    let path = dir.join("cfg.json");
    cfg.save(&path).unwrap();
    path
}

#[test]
fn preset_dump_round_trips() {
    let o = clogsim(&["preset", "--name", "bumps", "--dump"]);
    assert!(o.status.success());
    let cfg = ScenarioConfig::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg, clogsim::preset_bumps());

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("u.json");
    assert!(clogsim(&["preset", "--name", "uniform", "--dump", path_str(&file)]).status.success());
    assert_eq!(ScenarioConfig::load(&file).unwrap(), clogsim::preset_uniform());
}

#[test]
fn unknown_preset_is_config_error() {
    assert_eq!(clogsim(&["preset", "--name", "spiral"]).status.code(), Some(2));
}

#[test]
fn bad_arguments_are_config_error() {
    assert_eq!(clogsim(&["run", "--scheme", "magic"]).status.code(), Some(2));
}

#[test]
fn missing_config_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = clogsim(&["run", "--config", path_str(&missing), "--out-dir", path_str(dir.path())]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn invalid_config_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, "{\"name\": \"x\"}").unwrap();
    let o = clogsim(&["run", "--config", path_str(&cfg), "--out-dir", path_str(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unstable_time_step_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = clogsim::preset_uniform();
    cfg.grid.time_step = clogsim::scenario::TimeStep::Ratio { ratio: 0.5 };
    let path = dir.path().join("cfg.json");
    cfg.save(&path).unwrap();
    let table = small_table(dir.path());
    let o = clogsim(&["run", "--config", path_str(&path), "--table", path_str(&table), "--out-dir", path_str(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn table_validation() {
    let dir = tempfile::tempdir().unwrap();
    let table = small_table(dir.path());
    let o = clogsim(&["validate", "--table", path_str(&table)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok: 10 entries"));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "not a table\n").unwrap();
    assert_eq!(clogsim(&["validate", "--table", path_str(&bad)]).status.code(), Some(2));
    assert_eq!(clogsim(&["validate", "--table", path_str(&dir.path().join("absent"))]).status.code(), Some(4));
}

#[test]
fn mesh_mismatch_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let table = small_table(dir.path());
    let mut cfg = clogsim::preset_uniform();
    cfg.grid.points = 11;
    cfg.grid.t_final = 0.005;
    cfg.output.snapshot_times.clear();
    let path = dir.path().join("cfg.json");
    cfg.save(&path).unwrap();
    let o = clogsim(&["run", "--config", path_str(&path), "--table", path_str(&table), "--out-dir", path_str(&dir.path().join("o"))]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning: table mesh 16x4"));
}

fn run_once(dir: &Path, cfg: &Path, table: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["run", "--config", path_str(cfg), "--table", path_str(table), "--out-dir", path_str(&out)];
    args.extend_from_slice(extra);
    let o = clogsim(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let table = small_table(dir.path());
    let cfg = small_config(dir.path());
    let a = run_once(dir.path(), &cfg, &table, "a", &[]);
    let b = run_once(dir.path(), &cfg, &table, "b", &[]);
    let fa = csv_files(&a);
    assert!(fa.len() > 10);
    for f in &fa {
        let g = b.join(f.file_name().unwrap());
        assert_eq!(fs::read(f).unwrap(), fs::read(&g).unwrap(), "{} differs", f.display());
    }
    assert!(a.join("u1_t0.0200.svg").exists());
}

#[test]
fn picard_override_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let table = small_table(dir.path());
    let cfg = small_config(dir.path());
    let out = run_once(dir.path(), &cfg, &table, "p", &["--scheme", "picard", "--monitor", "abort"]);
    let effective = ScenarioConfig::load(&out.join("config.json")).unwrap();
    assert_eq!(effective.scheme, clogsim::Scheme::Picard);
    let diag = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let last = diag.lines().last().unwrap();
    assert!(!last.ends_with(','), "Picard iterations recorded: {last}");

    let svg = dir.path().join("r.svg");
    let o = clogsim(&["render", "--field-csv", path_str(&out.join("r_t0.0200.csv")), "--out", path_str(&svg), "--palette", "grayscale"]);
    assert!(o.status.success());
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "# nothing\n").unwrap();
    assert_eq!(clogsim(&["render", "--field-csv", path_str(&bad), "--out", path_str(&svg)]).status.code(), Some(2));
}
