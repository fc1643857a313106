use std::path::Path;
use std::process::{Command, Output};

use turbqkd_core::harness::RunConfig;

fn turbqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turbqkd")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn show_config_prints_parseable_defaults() {
    let out = turbqkd(&["show-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), RunConfig::default());
}

#[test]
fn show_config_merges_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "trials = 7\n[turbulence]\nd_over_r0 = 2.5\n");
    let out = turbqkd(&["show-config", "--config", &cfg, "--seed", "99"]);
    assert!(out.status.success());
    let parsed = RunConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!((parsed.trials, parsed.seed, parsed.turbulence.d_over_r0), (7, 99, 2.5));
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[ao]\ngain = 3.0\n");
    let out = turbqkd(&["fried", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[validation]"));

    let cfg = write_config(dir.path(), "[grid]\nunknown_key = 1\n");
    assert_eq!(turbqkd(&["show-config", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn missing_config_exits_with_io_code() {
    let out = turbqkd(&["show-config", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[io]"));
}

#[test]
fn fixed_seed_runs_write_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[fried]\nframes = 100\nn = 128\n");
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = turbqkd(&["fried", "--config", &cfg, "--seed", "5", "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for name in ["fried.csv", "fried_centroids.csv", "fried_summary.json"] {
        let bytes = std::fs::read(a.join(name)).unwrap();
        assert!(!bytes.is_empty());
        assert_eq!(bytes, std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}
