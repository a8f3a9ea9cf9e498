use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_growthmix"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

/// Two groups of 20 subjects, far apart at every one of three time points.
fn toy_csv() -> String {
    let mut out = String::from("subject,time,y\n");
    for s in 0..40 {
        let centre = if s < 20 { 0.0 } else { 10.0 };
        for t in 1..=3 {
            // small deterministic jitter so variances are not degenerate
            let jitter = ((s * 7 + t * 3) % 11) as f64 / 10.0 - 0.5;
            let _ = writeln!(out, "s{s:02},{t},{}", centre + jitter);
        }
    }
    out
}

#[test]
fn fit_on_toy_data_finds_two_groups() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.csv"), toy_csv()).unwrap();
    let out = run(&["fit", "toy.csv", "--n-restarts", "5", "-o", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let labels = std::fs::read_to_string(dir.path().join("res/fit_labels.csv")).unwrap();
    let mut lines = labels.lines();
    assert_eq!(lines.next(), Some("subject_id,map_label,p1,p2"));
    let map: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(map.len(), 40);
    assert!(map[..20].iter().all(|l| *l == map[0]));
    assert!(map[20..].iter().all(|l| *l == map[20]));
    assert_ne!(map[0], map[20]);

    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("res/fit_model.json")).unwrap()).unwrap();
    assert_eq!(model["fit"]["k"], 2);
    assert_eq!(model["config"]["n_restarts"], 5);
}

#[test]
fn malformed_csv_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "subject,time,y\na,1,0.5\na,2,0.7\nb,1,0.1\n").unwrap();
    let out = run(&["fit", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("no observation at time 2"), "{err}");

    std::fs::write(dir.path().join("blank.csv"), "subject,time,y\na,1,0.5\na,2,\n").unwrap();
    assert_eq!(run(&["fit", "blank.csv"], dir.path()).status.code(), Some(2));
}

#[test]
fn evaluate_identical_and_relabelled_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "subject_id,label\nx,1\ny,1\nz,2\nw,3\n").unwrap();
    std::fs::write(dir.path().join("b.csv"), "subject_id,label\nw,1\nz,3\ny,2\nx,2\n").unwrap();
    for other in ["a.csv", "b.csv"] {
        let out = run(&["evaluate", "a.csv", other, "--out", "ari.json"], dir.path());
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["ari"], 1.0);
        assert!(dir.path().join("ari.json").exists());
    }
}

#[test]
fn evaluate_length_mismatch_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), "label\n1\n2\n").unwrap();
    std::fs::write(dir.path().join("b.csv"), "label\n1\n2\n2\n").unwrap();
    assert_eq!(run(&["evaluate", "a.csv", "b.csv"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_rejects_zero_reps_and_unknown_presets() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--reps", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--preset", "T9"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["bench", "--reps", "0"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_writes_one_full_dataset_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--preset", "T1", "--reps", "1", "--seed", "7", "-o", "sim"];
    assert!(run(&args, dir.path()).status.success());
    let first = std::fs::read(dir.path().join("sim/rep_000.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    // header plus 400 subjects times 20 time points
    assert_eq!(text.lines().count(), 1 + 400 * 20);
    let truth = std::fs::read_to_string(dir.path().join("sim/rep_000_truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 401);

    assert!(run(&args, dir.path()).status.success());
    assert_eq!(std::fs::read(dir.path().join("sim/rep_000.csv")).unwrap(), first);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sim/simulation.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 7);
    assert_eq!(manifest["design"], "T1");
}

#[test]
fn config_file_is_read_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.csv"), toy_csv()).unwrap();
    std::fs::write(dir.path().join("run.conf"), "k_range = 1..3\nn_restarts = 3\nseed = 11\n").unwrap();
    let out = run(
        &["select", "toy.csv", "--config", "run.conf", "--seed", "12", "-o", "r"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/selection.json")).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], 12);
    assert_eq!(v["config"]["n_restarts"], 3);
    assert_eq!(v["config"]["k_range"]["max"], 3);
    assert!(dir.path().join("r/labels_selected.csv").exists());
    assert!(dir.path().join("r/labels_full.csv").exists());

    std::fs::write(dir.path().join("broken.conf"), "colour = blue\n").unwrap();
    let out = run(&["select", "toy.csv", "--config", "broken.conf"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infinite_threshold_is_rejected_by_usage_check() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("toy.csv"), toy_csv()).unwrap();
    let out = run(&["select", "toy.csv", "--threshold", "inf"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
