use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn example_configs() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn sqdist(config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqdist"))
        .arg("run")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stderr {text:?}: {e}"))
}

#[test]
fn example_configs_run_successfully_and_quickly() {
    let configs = example_configs();
    assert!(configs.len() >= 5);
    for c in configs {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let out = sqdist(&c, dir.path());
        let took = start.elapsed();
        assert_eq!(out.status.code(), Some(0), "{}: {}", c.display(), String::from_utf8_lossy(&out.stderr));
        assert!(took < Duration::from_secs(60), "{} took {took:?}", c.display());
        assert!(dir.path().join("summary.json").exists());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let c = configs_dir().join("gaussian_wkb.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(sqdist(&c, a.path()).status.code(), Some(0));
    assert_eq!(sqdist(&c, b.path()).status.code(), Some(0));
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn invalid_config_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"metric":{"catalog":{"name":"log1d"}},"base_point":[5.0],"study":{"kind":"local_series","order":4}}"#,
    )
    .unwrap();
    let out = sqdist(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let r = record(&out);
    assert_eq!(r["error"], "config_invalid");
    assert_eq!(r["path"], "base_point");
}

#[test]
fn unknown_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"metric":{"catalog":{"name":"log1d"}},"base_point":[0.3],"study":{"kind":"local_series","order":4},"colour":1}"#,
    )
    .unwrap();
    let out = sqdist(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(record(&out)["error"], "config_invalid");
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("deep.json");
    fs::write(
        &cfg,
        r#"{"metric":{"catalog":{"name":"log1d"}},"base_point":[0.3],"build":{"kind":"lp"},
            "norm":{"s":0,"p":2.0,"points_per_axis":101},"study":{"kind":"convergence","levels":[4]}}"#,
    )
    .unwrap();
    let out = sqdist(&cfg, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(3));
    let r = record(&out);
    assert_ne!(r["error"], "config_invalid");
    assert!(r["message"].as_str().is_some_and(|m| !m.is_empty()));
}
