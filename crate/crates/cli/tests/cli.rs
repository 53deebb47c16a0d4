use std::path::Path;
use std::process::{Command, Output};

fn inkdx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inkdx")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn end_to_end_on_synthetic_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = s(&out);
    ok(&inkdx(&["fixture", "--out", o, "--seed", "3"]));
    let manifest = out.join("dataset").join("manifest.json");
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert_eq!(text.matches("\"subject_id\"").count(), 72);

    ok(&inkdx(&["render", "--out", o]));
    for mode in ["linked", "velocity", "enhanced"] {
        let n = std::fs::read_dir(out.join("images").join(mode)).unwrap().count();
        assert_eq!(n, 72 * 8, "{mode}");
    }

    ok(&inkdx(&["extract", "--out", o, "--backend", "stub"]));
    let first = inkdx(&["evaluate", "--out", o, "--backend", "stub", "--experiments", "all", "--seed", "3"]);
    ok(&first);
    assert!(String::from_utf8_lossy(&first.stdout).contains("reusing"));
    let report = out.join("report");
    for f in ["report.csv", "report.md", "config.json", "selection_fold0.json", "selection_fold9.json"] {
        assert!(report.join(f).is_file(), "{f}");
    }
    let csv = std::fs::read(report.join("report.csv")).unwrap();
    let md = std::fs::read(report.join("report.md")).unwrap();

    ok(&inkdx(&["evaluate", "--out", o, "--experiments", "all", "--seed", "3"]));
    assert_eq!(std::fs::read(report.join("report.csv")).unwrap(), csv);
    assert_eq!(std::fs::read(report.join("report.md")).unwrap(), md);

    // a fresh output directory, one worker, and the echoed config
    let other = dir.path().join("again");
    let cfg = report.join("config.json");
    ok(&inkdx(&["evaluate", "--config", s(&cfg), "--dataset", s(&manifest), "--out", s(&other), "--jobs", "1"]));
    assert_eq!(std::fs::read(other.join("report").join("report.csv")).unwrap(), csv);
}

#[test]
fn missing_model_file_is_a_model_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.onnx");
    let out = inkdx(&["extract", "--out", s(dir.path()), "--backend", "onnx-file", "--model", s(&missing)]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: ModelFileMissing:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    let out = inkdx(&["fixture", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: ConfigError:"));

    let out = inkdx(&["evaluate", "--out", s(dir.path()), "--experiments", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = inkdx(&["render", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: InvalidManifest:"));
}
