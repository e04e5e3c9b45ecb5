use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsnalloc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const SINGLE: &str = r#"
schema_version = 1
seed = 7

[network]
M = 1
N = 10
U = 3.0
Pt = 2.5
pfa = 0.1
signal_amplitude = 0.5
zeta = 0.1
sigma2_min = 1.0
sigma2_max = 1.0
channel_gain = 1.0
radius = 0.5
topology = "complete"
"#;

#[test]
fn missing_budget_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, SINGLE.replace("Pt = 2.5\n", "")).unwrap();
    let out = run(&["allocate", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Pt"), "{err}");
}

#[test]
fn out_of_range_value_names_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, SINGLE.replace("pfa = 0.1", "pfa = 1.5")).unwrap();
    let out = run(&["allocate", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("network.pfa") && err.contains("line 10"),
        "{err}"
    );
}

#[test]
fn missing_config_file_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["trace", "does/not/exist.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dual_ascent_failure_writes_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.cfg");
    fs::write(&path, format!("{SINGLE}\n[solver]\nouter_max_iter = 3\n")).unwrap();
    let out = run(&["trace", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let trace = dir.path().join("short_trace_failed.csv");
    assert_eq!(csv_rows(&trace).len(), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("short_trace_failed.csv"));
}

#[test]
fn single_sensor_takes_the_whole_budget() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.cfg");
    fs::write(&path, SINGLE).unwrap();
    let out = run(
        &["allocate", path.to_str().unwrap(), "--method", "central"],
        dir.path(),
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("one_allocation.csv"));
    assert_eq!(rows.len(), 1);
    let p: f64 = rows[0][4].parse().unwrap();
    assert!((p - 2.5).abs() < 1e-12, "{p}");
    assert_eq!(rows[0][5], "", "distributed column stays empty");
}

#[test]
fn one_trial_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["detect", &cfg("fig5.cfg"), "--sweep", "pt", "--trials", "1"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // 6 schemes over 9 budgets
    assert_eq!(csv_rows(&dir.path().join("fig5_detect_pt.csv")).len(), 54);
}

#[test]
fn sweep_without_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "detect",
            &cfg("fig1.cfg"),
            "--sweep",
            "pfa",
            "--trials",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("detect.pfa_grid"));
}

#[test]
fn roc_sweep_covers_both_window_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "detect",
            &cfg("fig4.cfg"),
            "--sweep",
            "pfa",
            "--trials",
            "2000",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("fig4_detect_pfa.csv"));
    for scheme in ["ED_opt_weights_opt_power", "MFD_opt_power"] {
        for n in ["10", "50"] {
            let curve: Vec<f64> = rows
                .iter()
                .filter(|r| r[0] == scheme && r[2] == n)
                .map(|r| r[6].parse().unwrap())
                .collect();
            assert_eq!(curve.len(), 9, "{scheme} N={n}");
            // common trials across thresholds make each curve monotone
            assert!(
                curve.windows(2).all(|w| w[1] >= w[0]),
                "{scheme} N={n}: {curve:?}"
            );
        }
    }
    assert!(dir.path().join("fig4_detect_pfa_diagnostics.csv").exists());
}

#[test]
fn trace_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert!(run(&["trace", &cfg("fig2.cfg")], dir.path())
            .status
            .success());
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("fig2_trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn identical_sensors_share_power_at_every_iteration() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["trace", &cfg("identical_sensors.cfg")], dir.path())
        .status
        .success());
    let rows = csv_rows(&dir.path().join("identical_sensors_trace.csv"));
    assert!(!rows.is_empty());
    let mut lambdas = Vec::new();
    for r in &rows {
        let p: Vec<&String> = r[2..8].iter().collect();
        assert!(p.iter().all(|x| *x == p[0]), "{r:?}");
        lambdas.push(r[1].parse::<f64>().unwrap());
    }
    // the multiplier may overshoot once, then moves in one direction
    let turns = lambdas
        .windows(3)
        .filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0)
        .count();
    assert!(turns <= 1, "{turns} direction changes");

    assert!(
        run(&["allocate", &cfg("identical_sensors.cfg")], dir.path())
            .status
            .success()
    );
    for r in csv_rows(&dir.path().join("identical_sensors_allocation.csv")) {
        let central: f64 = r[4].parse().unwrap();
        assert!((central - 0.2).abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn manifest_lists_written_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&["allocate", &cfg("fig1.cfg")], dir.path())
        .status
        .success());
    let text = fs::read_to_string(dir.path().join("fig1_allocate_manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(manifest["command"], "allocate");
    assert_eq!(manifest["scenario_digest"].as_str().unwrap().len(), 64);
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let len = fs::metadata(f.as_str().unwrap()).unwrap().len();
        assert!(len > 0);
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wsnalloc"))
        .args(["allocate", &cfg("fig1.cfg"), "--method", "central"])
        .env("WSNALLOC_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("fig1_allocation.csv").exists());
}
