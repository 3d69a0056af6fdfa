use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn encrl(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_encrl"));
    cmd.args(args);
    if let Some(out) = out {
        cmd.arg("--out").arg(out);
    }
    cmd.output().unwrap()
}

fn read_toml(path: &Path) -> toml::Table {
    fs::read_to_string(path).unwrap().parse().unwrap()
}

#[test]
fn noisy_sync_run_reports_its_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let out = encrl(
        &["run", "--algo", "vi-sync-noisy", "--eps", "0.01", "--seed", "3"],
        Some(tmp.path()),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_toml(&tmp.path().join("report.toml"));
    let bound = report["bound"].as_float().unwrap();
    assert!((bound - 0.1).abs() < 1e-12);
    assert_eq!(report["pass"].as_bool(), Some(true));
    assert!(report["observed"].as_float().unwrap() <= bound);
    for f in ["values.csv", "trace.csv", "manifest.toml"] {
        assert!(tmp.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn taylor_circuit_on_the_td_preset_is_rejected_up_front() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = encrl(&["run", "--algo", "z", "--preset", "paper-td0"], Some(&dir));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("depth budget of 3"), "{err}");
    assert!(!dir.exists());
}

#[test]
fn presets_are_listed() {
    let out = encrl(&["list-presets"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().filter(|r| r.starts_with("desk")).all(|r| r.contains("4096")));
    assert!(rows.iter().any(|r| r.starts_with("paper-td0") && r.contains("8192")));
    assert!(rows.iter().any(|r| r.starts_with("paper-z") && r.contains("16384")));
}

#[test]
fn plain_bench_has_no_client_phases() {
    let tmp = tempfile::tempdir().unwrap();
    let out = encrl(
        &["bench", "--algo", "td0", "--backend", "exact", "--updates", "100"],
        Some(tmp.path()),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bench = read_toml(&tmp.path().join("bench.toml"));
    for phase in ["encode", "encrypt", "decrypt"] {
        assert_eq!(bench[phase].as_float(), Some(0.0), "{phase}");
    }
    assert_eq!(bench["updates"].as_integer(), Some(100));
}

#[test]
fn manifest_reruns_to_the_same_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = encrl(
        &["run", "--algo", "sarsa", "--max-updates", "2000", "--seed", "9"],
        Some(&a),
    );
    assert!(first.status.success());
    let manifest = a.join("manifest.toml");
    let second = encrl(&["run", "--config", manifest.to_str().unwrap()], Some(&b));
    assert!(second.status.success(), "{}", String::from_utf8_lossy(&second.stderr));
    for f in ["values.csv", "trace.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_algorithm_is_a_usage_error() {
    let out = encrl(&["run", "--algo", "q-learning"], None);
    assert_eq!(out.status.code(), Some(2));
}
