use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn motorlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motorlab"))
        .args(args)
        .env_remove("MOTORLAB_OUT")
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"));
    v["error"].clone()
}

fn cfg(name: &str) -> String {
    configs().join(format!("{name}.toml")).display().to_string()
}

fn written(out: &Output) -> Vec<PathBuf> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(PathBuf::from)
        .collect()
}

#[test]
fn help_and_version_exit_zero() {
    let out = motorlab(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sweep"));
    assert_eq!(motorlab(&["sweep", "--help"]).status.code(), Some(0));
    assert_eq!(motorlab(&["--version"]).status.code(), Some(0));
}

#[test]
fn missing_config_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = motorlab(&[
        "limit",
        "--config",
        "/nonexistent/model.toml",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["kind"], "input");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn malformed_sigma_lists_are_rejected() {
    for list in ["0.01,0.02", "0.05,abc", "0.05,-0.01", ""] {
        let out = motorlab(&["sweep", "--config", &cfg("linear"), "--sigmas", list]);
        assert_eq!(out.status.code(), Some(2), "{list}");
        assert_eq!(error_json(&out)["kind"], "input");
    }
}

#[test]
fn bad_config_reports_details() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "schema_version = 1\n[model]\nregime = \"bounded\"\nbogus = 3\n",
    )
    .unwrap();
    let out = motorlab(&[
        "limit",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["kind"], "input");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = motorlab(&[
        "limit",
        "--config",
        &cfg("linear"),
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["kind"], "io");
}

#[test]
fn no_applicable_theorem_lists_assumptions() {
    let dir = tempfile::tempdir().unwrap();
    let out = motorlab(&[
        "limit",
        "--config",
        &cfg("flat"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert!(err["details"].is_object(), "{err}");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn linear_sweep_matches_exact_limit() {
    let dir = tempfile::tempdir().unwrap();
    let out = motorlab(&[
        "sweep",
        "--config",
        &cfg("linear"),
        "--sigmas",
        "0.05,0.02,0.01",
        "--grid",
        "512",
        "--format",
        "csv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let files = written(&out);
    assert_eq!(files.len(), 1);
    assert!(files[0].extension().is_some_and(|e| e == "csv"));
    let text = fs::read_to_string(&files[0]).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|c| *c == "max_error").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let e: f64 = r[col].parse().unwrap();
        assert!(e <= 1e-9, "{e}");
        assert_eq!(*r.last().unwrap(), "ok");
    }
}

#[test]
fn format_selects_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = motorlab(&[
        "solve",
        "--config",
        &cfg("cosine_pair"),
        "--sigma",
        "0.05",
        "--grid",
        "256",
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let files = written(&out);
    assert!(!files.is_empty());
    for f in &files {
        assert!(
            f.extension().is_some_and(|e| e == "json"),
            "{}",
            f.display()
        );
        let v: Value = serde_json::from_str(&fs::read_to_string(f).unwrap()).unwrap();
        assert!(v.is_object());
    }
}

#[test]
fn report_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = motorlab(&[
        "report",
        "--config",
        &cfg("demo"),
        "--sigma",
        "0.02",
        "--no-timestamp",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let exts: Vec<String> = written(&out)
        .iter()
        .map(|f| f.extension().unwrap().to_string_lossy().into_owned())
        .collect();
    for e in ["csv", "json", "svg"] {
        assert!(exts.iter().any(|x| x == e), "{exts:?}");
    }
    let svg = written(&out)
        .into_iter()
        .find(|f| f.extension().unwrap() == "svg")
        .unwrap();
    let svg = fs::read_to_string(svg).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(!svg.contains("generated"));
}
