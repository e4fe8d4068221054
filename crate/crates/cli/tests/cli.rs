use std::path::Path;
use std::process::{Command, Output};

fn lookahead(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lookahead"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LOOKAHEAD_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--set", "datasets=2", "--set", "indices=2", "--set", "seeds=2", "--set", "outer_steps=5"];

#[test]
fn strongly_convex_preset_prints_hyperparameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = lookahead(
        dir.path(),
        &["presets", "--strongly-convex", "--set", "L=1", "--set", "mu=0.5", "--set", "alpha=0.5", "--set", "b=1", "--set", "n=100"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for line in ["eta=0.125", "k=8", "T=4"] {
        assert!(text.lines().any(|l| l == line), "missing {line} in {text}");
    }
    assert!(dir.path().join("resolved_config.toml").exists());
}

#[test]
fn presets_requires_a_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = lookahead(dir.path(), &["presets"]);
    assert!(!o.status.success());
}

#[test]
fn strict_preset_fails_outside_window() {
    let dir = tempfile::tempdir().unwrap();
    let o = lookahead(dir.path(), &["presets", "--strongly-convex", "--strict", "--set", "alpha=0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = lookahead(dir.path(), &["presets", "--strongly-convex", "--strict", "--set", "alpha=0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn property_suite_passes_for_each_model() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["least_squares", "ridge", "logistic"] {
        let o = lookahead(dir.path(), &["check-props", "--set", &format!("model={model}"), "--set", "probes=200"]);
        assert!(o.status.success(), "{model}: {}", stderr(&o));
        assert!(!stdout(&o).contains("VIOLATED"));
    }
}

#[test]
fn missing_settings_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lookahead(dir.path(), &["stability", "--spec", "no-such-settings.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no-such-settings.toml"));
}

#[test]
fn unknown_override_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = lookahead(dir.path(), &["stability", "--set", "no_such_key=3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no_such_key"));
}

#[test]
fn strict_stability_rejects_large_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["stability", "--strict", "--set", "eta_l=3"];
    args.extend_from_slice(SMALL);
    let o = lookahead(dir.path(), &args);
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("stability.csv").exists());
}

#[test]
fn resolved_config_reproduces_csv() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let mut args = vec!["stability", "--seed", "7", "--set", "alpha=[0.25,1.0]"];
    args.extend_from_slice(SMALL);
    let o = lookahead(first.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let resolved = first.path().join("resolved_config.toml");
    let o = lookahead(second.path(), &["stability", "--spec", resolved.to_str().unwrap(), "--workers", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = std::fs::read(first.path().join("stability.csv")).unwrap();
    let b = std::fs::read(second.path().join("stability.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);
}

#[test]
fn plot_writes_svg_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("series.csv");
    std::fs::write(&csv, "x,y\n1,0.5\n2,0.25\n4,0.125\n").unwrap();
    let o = lookahead(dir.path(), &["plot", "--csv", csv.to_str().unwrap(), "--x", "x", "--y", "y", "--log-x", "--log-y"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("series.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let o = lookahead(dir.path(), &["plot", "--csv", csv.to_str().unwrap(), "--x", "x", "--y", "missing"]);
    assert_eq!(o.status.code(), Some(1));
}
