use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn twistecho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twistecho")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = twistecho(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn read_json(p: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &str) -> Vec<Vec<f64>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').filter_map(|f| f.parse().ok()).collect())
        .collect()
}

#[test]
fn single_cell_landscape_is_standard_quantum_limit() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "cell.csv");
    ok(&["landscape", "--n", "8", "--mu1", "0:0:1", "--mu2", "0:0:1", "--out", &out]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("mu1,mu2,inv_dphi,"));
    let row = &csv_rows(&out)[0];
    assert!((row[2] - 8f64.sqrt()).abs() < 1e-6, "{row:?}");
    assert!(Path::new(&format!("{out}.manifest.json")).exists());
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let out = twistecho(&["landscape", "--n", "8", "--mu1", "0:0:1", "--mu2", "0:0:1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(twistecho(&["--help"]).status.code(), Some(0));
    assert_eq!(twistecho(&["qfi", "--n", "4", "--mu1", "1:0:3", "--out", "/dev/null"]).status.code(), Some(1));
}

#[test]
fn qfi_endpoints() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "qfi.csv");
    ok(&["qfi", "--n", "32", "--mu1", "0:pi:9", "--out", &out]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 9);
    assert!((rows[0][1] - 32.0).abs() < 1e-8);
    assert!((rows[8][1] - 1024.0).abs() < 1e-6);
}

#[test]
fn catalog_lists_ten_families() {
    let out = ok(&["catalog", "list"]);
    let names: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(names.len(), 10);
    assert!(names.iter().any(|n| n == "leibfried"));
    let regions = String::from_utf8(ok(&["catalog", "regions"]).stdout).unwrap();
    assert_eq!(regions.lines().count(), 9);
}

#[test]
fn ghz_signal_is_even() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "ghz.csv");
    let run = ok(&["signal", "--name", "leibfried", "--n", "8", "--mu1", "pi", "--out", &out]);
    let summary: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(summary["fourier"]["sine_norm"].as_f64().unwrap() < 1e-10);
    assert!((summary["sensitivity"]["inverse_delta_phi"].as_f64().unwrap() - 8.0).abs() < 1e-8);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 257);
}

#[test]
fn optimize_then_signal_round_trip() {
    let dir = TempDir::new().unwrap();
    let opt = path(&dir, "opt.json");
    ok(&["optimize", "--n", "16", "--mu1", "0.3", "--mu2", "-0.3", "--out", &opt]);
    let expected = read_json(&opt)["sensitivity"]["inverse_delta_phi"].as_f64().unwrap();
    let run = ok(&["signal", "--config", &opt, "--out", &path(&dir, "sig.csv")]);
    let summary: Value = serde_json::from_slice(&run.stdout).unwrap();
    let got = summary["sensitivity"]["inverse_delta_phi"].as_f64().unwrap();
    assert!((got - expected).abs() < 1e-10 * expected, "{got} vs {expected}");

    let emv = path(&dir, "emv.csv");
    ok(&["emv", "--config", &opt, "--widths", "1e-4:1e-4:1", "--out", &emv]);
    let text = fs::read_to_string(&emv).unwrap();
    assert!(text.starts_with("protocol_name,delta_phi_prior,eps_b,emv,emv_sqrt,hl_reference"));
    let line = text.lines().nth(1).unwrap();
    assert!(line.starts_with("opt,"));
    let emv_sqrt: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
    assert!((emv_sqrt * expected - 1.0).abs() < 1e-3, "{emv_sqrt} vs {}", 1.0 / expected);
}

#[test]
fn landscape_does_not_depend_on_workers_and_replays() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (path(&dir, "w1.csv"), path(&dir, "w4.csv"), path(&dir, "replay.csv"));
    let grid = ["--n", "6", "--mu1", "0:1.5:4", "--mu2", "-pi:pi:5"];
    ok(&[&["landscape"], &grid[..], &["--workers", "1", "--out", &a]].concat());
    ok(&[&["landscape"], &grid[..], &["--workers", "4", "--out", &b]].concat());
    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());

    let manifest = read_json(&format!("{a}.manifest.json"));
    assert_eq!(manifest["command"], "landscape");
    assert_eq!(manifest["seed"], 42);
    ok(&["replay", &format!("{a}.manifest.json"), "--out", &c, "--workers", "2"]);
    assert_eq!(first, fs::read(&c).unwrap());
}

#[test]
fn bad_config_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "bad.json");
    fs::write(&cfg, r#"{"n_particles": 4, "mu1": 9.0}"#).unwrap();
    let out = twistecho(&["signal", "--config", &cfg, "--out", &path(&dir, "s.csv")]);
    assert_eq!(out.status.code(), Some(1));
    let out = twistecho(&[
        "catalog",
        "build",
        "--name",
        "macri",
        "--n",
        "4",
        "--mu1",
        "0.3",
        "--mu2",
        "-1",
        "--out",
        &path(&dir, "m.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn degenerate_protocol_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "flat.json");
    // n along x leaves the y-measured signal identically zero.
    fs::write(
        &cfg,
        r#"{"n_particles": 6, "mu1": 0.3, "mu2": 0.0, "n_axis": [1, 0, 0], "k_axis": [0, 0, 1],
            "m_axis": [0, 1, 0], "symmetry_class": "anti_symmetric"}"#,
    )
    .unwrap();
    let out = twistecho(&["stability", "--config", &cfg, "--out", &path(&dir, "st.json")]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
