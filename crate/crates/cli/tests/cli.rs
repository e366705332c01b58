use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hqfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqfl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn toy() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/toy.toml")
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn metrics_without_timing(dir: &Path) -> Vec<String> {
    let text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "duration_ms").unwrap();
    text.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        })
        .collect()
}

#[test]
fn run_writes_artifacts_and_repeats_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = hqfl(&["run", "--config", &toy(), "--rounds", "2", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("NOT cryptographically secure"));
        for f in ["metrics.csv", "summary.toml", "manifest.toml"] {
            assert!(out.join(f).is_file(), "missing {f}");
        }
    }
    let rows = metrics_without_timing(&a);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows, metrics_without_timing(&b));
    let manifest = fs::read_to_string(a.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 7"));
}

#[test]
fn config_error_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    let text = fs::read_to_string(toy()).unwrap().replace("tau = 0.5", "tau = -1.0");
    fs::write(&bad, text).unwrap();
    let o = hqfl(&["run", "--config", bad.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau"));
    assert!(!tmp.path().join("o").join("metrics.csv").exists());

    let o = hqfl(&["run", "--config", &toy(), "--clients", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_fails() {
    let o = hqfl(&["train-everything"]);
    assert!(!o.status.success());
}

#[test]
fn grad_check_reports_error() {
    let o = hqfl(&["grad-check", "--seed", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("max relative error"));
}

#[test]
fn partition_stats_lists_every_client() {
    let o = hqfl(&["partition-stats", "--config", &toy()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 4);
    assert!(text.contains("IID entropy"));
}

#[test]
fn he_bench_reports_small_error() {
    let o = hqfl(&["he-bench", "--config", &toy(), "--values", "10"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let err: f64 = text
        .lines()
        .find(|l| l.starts_with("max abs error"))
        .and_then(|l| l.split_whitespace().last())
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!(err < 1e-3);
}
