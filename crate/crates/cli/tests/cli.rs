use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn flowlab(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flowlab"));
    if let Some(text) = config {
        let path = dir.join("run.cfg");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.args(args).arg("--out").arg(dir.join("out"));
    cmd.output().unwrap()
}

fn error_record(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

#[test]
fn successful_run_writes_hashed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowlab(
        &["defect", "--seed", "3", "--plots"],
        Some("pair = helix\nmethod = oracle\nsamples = 100\n[defect]\ns = 1, 2\nt = 1, 2\n"),
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let root = dir.path().join("out");
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("manifest.json")).unwrap())
            .unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    let csv = std::fs::read_to_string(root.join("defect.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# config_hash={hash}"));
    let svg = std::fs::read_to_string(root.join("defect.svg")).unwrap();
    assert!(svg.contains(&format!("<!-- config_hash={hash} -->")));
    let names: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"defect.csv") && names.contains(&"summary.json"));
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (vec!["defect", "--seed", "1"], "pair = nope\n"),
        (vec!["defect"], "samples = 10\n"),
        (vec!["ladder", "--seed", "1"], "experiment = defect\n"),
        (
            vec!["concentrate", "--seed", "1"],
            "[concentrate]\np0 = 2\np1 = 2\nq = 2\n",
        ),
        (vec!["stability", "--seed", "1"], "[stability]\ndelta = 0\n"),
        (vec!["defect", "--seed", "1"], "this is not a pair\n"),
        (
            vec!["trajectory", "--seed", "1"],
            "[escape]\ninner = 2\nouter = 1\n",
        ),
    ];
    for (args, text) in cases {
        let out = flowlab(&args, Some(text), dir.path());
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?} {text:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let rec = error_record(&out);
        assert_eq!(rec["error"]["kind"], "config");
        assert_eq!(rec["error"]["code"], 2);
    }
}

#[test]
fn numeric_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = "field = blowup\n[field blowup]\nv1 = x^2\n[trajectory]\nx0 = 2\nwindow = 0, 1\n";
    let out = flowlab(&["trajectory", "--seed", "1"], Some(text), dir.path());
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(error_record(&out)["error"]["kind"], "numeric");
}

#[test]
fn io_failure_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_flowlab"))
        .args(["catalog", "--config"])
        .arg(dir.path().join("missing.cfg"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_record(&out)["error"]["kind"], "io");
}

#[test]
fn catalog_needs_no_seed_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = flowlab(&["catalog"], None, dir.path());
    assert!(a.status.success());
    let first = std::fs::read(dir.path().join("out/catalog.csv")).unwrap();
    let b = flowlab(&["catalog", "--workers", "3"], None, dir.path());
    assert!(b.status.success());
    assert_eq!(
        first,
        std::fs::read(dir.path().join("out/catalog.csv")).unwrap()
    );
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("pair,helix,3"));
}

#[test]
fn help_lists_every_subcommand() {
    let out = Command::new(env!("CARGO_BIN_EXE_flowlab"))
        .arg("--help")
        .output()
        .unwrap();
    let help = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "defect",
        "ladder",
        "compress",
        "maximal",
        "sobolev",
        "concentrate",
        "stability",
        "catalog",
        "bracket",
        "trajectory",
    ] {
        assert!(help.contains(sub), "{sub}");
    }
}
