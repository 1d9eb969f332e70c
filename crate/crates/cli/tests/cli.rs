//! End-to-end checks of the `dropzone` binary on the bundled dataset.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/synthetic")
}

fn dropzone(args: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dropzone"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&Path]) -> String {
    let out = dropzone(args);
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(s: &str) -> &Path {
    Path::new(s)
}

/// Relative path to contents for every file below `root`, skipping names in `skip`.
fn tree(root: &Path, skip: &[&str]) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            if skip.contains(&name.as_str()) {
                continue;
            }
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn assert_same_tree(a: &Path, b: &Path, skip: &[&str]) {
    let (ta, tb) = (tree(a, skip), tree(b, skip));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(tb[k] == *v, "{} differs", k.display());
    }
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let path = entry.unwrap().path();
        let dest = to.join(path.file_name().unwrap());
        if path.is_dir() {
            copy_dir(&path, &dest);
        } else {
            fs::copy(&path, &dest).unwrap();
        }
    }
}

#[test]
fn synth_reproduces_the_bundled_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("synthetic");
    ok(&[p("synth"), &dir]);
    assert_same_tree(&dir, &bundled(), &[]);
}

#[test]
fn run_writes_per_batch_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let stdout = ok(&[p("run"), &bundled(), p("--out"), &out]);
    assert_eq!(stdout.lines().count(), 6, "{stdout}");
    for batch in ["batch_000", "batch_001", "batch_002"] {
        for run in 0..2 {
            let dir = out.join(batch).join(format!("run_{run}"));
            for f in ["manifest.json", "result.json", "final_mask.png", "overlay_final.png", "verdict.json"] {
                assert!(dir.join(f).is_file(), "{} missing", dir.join(f).display());
            }
        }
    }
    assert!(out.join("batch_000/run_0/ranked_on_overlay.png").is_file());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("batch_000/run_0/manifest.json")).unwrap()).unwrap();
    assert!(manifest["error"].is_null());
}

#[test]
fn recorded_fixtures_replay_to_identical_results() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    copy_dir(&bundled(), &ds);
    let (recorded, replayed) = (tmp.path().join("recorded"), tmp.path().join("replayed"));
    ok(&[p("record-fixtures"), &ds, p("--backend"), p("stub"), p("--out"), &recorded]);
    assert!(ds.join("fixtures/vlm/batch_000/agent1_run0.txt").is_file());
    ok(&[p("run"), &ds, p("--backend"), p("replay"), p("--out"), &replayed]);
    assert_same_tree(&recorded, &replayed, &["manifest.json"]);
}

#[test]
fn replay_without_fixtures_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    copy_dir(&bundled(), &ds);
    let run = |out: &str| dropzone(&[p("run"), &ds, p("--backend"), p("replay"), p("--out"), &tmp.path().join(out)]);

    let out = run("a");
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("replay fixtures not found"));

    // Present but empty: every batch fails on its first lookup.
    fs::create_dir_all(ds.join("fixtures/vlm")).unwrap();
    let out = run("b");
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let summary = stderr.lines().filter(|l| l.starts_with("batch_") && l.contains("missing fixture"));
    assert_eq!(summary.count(), 6, "{stderr}");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("b/batch_000/run_0/manifest.json")).unwrap())
            .unwrap();
    assert!(manifest["error"].as_str().unwrap().contains("missing fixture"));
}

#[test]
fn sweep_writes_curves_for_every_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    ok(&[p("run"), &bundled(), p("--out"), &out]);
    let table = ok(&[p("sweep"), &bundled(), p("--out"), &out]);
    assert!(table.contains("iou"), "{table}");
    for eta in ["0.95", "0.90", "0.85", "0.80"] {
        let roc = fs::read_to_string(out.join(format!("eval/roc_eta{eta}.csv"))).unwrap();
        assert!(roc.lines().nth(1).unwrap().starts_with("inf,"), "{roc}");
        assert!(out.join(format!("eval/pr_eta{eta}.csv")).is_file());
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["zones"].as_array().unwrap().len(), 4);
}

#[test]
fn missing_dataset_is_an_error() {
    let out = dropzone(&[p("run"), p("/nonexistent/dataset")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}
