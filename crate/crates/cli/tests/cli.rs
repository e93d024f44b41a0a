//! Integration tests against the compiled `floodwatch` binary.

use std::path::Path;
use std::process::{Command, Output};

fn floodwatch(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floodwatch"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Reduced scenario passed as --set overrides so the test stays fast.
const REDUCED: &[&str] = &[
    "--set",
    "scenario.duration_s=165.0",
    "--set",
    "scenario.attack_start_s=30.0",
    "--set",
    "scenario.attack_end_s=136.0",
    "--set",
    "scenario.flood_rate_pps=300.0",
    "--set",
    "train.max_epochs=40",
];

#[test]
fn pipeline_prints_overall_accuracy_as_last_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["pipeline", "--out-dir", "run", "--seed", "3"];
    args.extend_from_slice(REDUCED);
    let output = floodwatch(&args, dir.path());
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("overall_accuracy="), "last line `{last}`");
    let accuracy: f64 = last.trim_start_matches("overall_accuracy=").parse().unwrap();
    assert!(accuracy >= 0.95, "accuracy {accuracy}");
    for name in ["trace.csv", "dataset.csv", "model.txt", "history.csv", "report.txt", "report.csv"] {
        assert!(dir.path().join("run").join(name).exists(), "{name} missing");
    }
}

#[test]
fn staged_commands_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let base: Vec<&str> = REDUCED.to_vec();

    let mut args = vec!["simulate", "--out", "t.csv", "--seed", "5"];
    args.extend_from_slice(&base);
    assert!(floodwatch(&args, dir.path()).status.success());

    let mut args = vec!["extract", "--trace", "t.csv", "--out", "d.csv"];
    args.extend_from_slice(&base);
    let output = floodwatch(&args, dir.path());
    assert!(output.status.success());
    assert!(stdout(&output).contains("dataset_samples="));

    let mut args = vec![
        "train",
        "--dataset",
        "d.csv",
        "--model-out",
        "m.txt",
        "--history-out",
        "h.csv",
        "--seed",
        "5",
    ];
    args.extend_from_slice(&base);
    assert!(floodwatch(&args, dir.path()).status.success());

    let mut args = vec![
        "evaluate",
        "--dataset",
        "d.csv",
        "--model",
        "m.txt",
        "--report-txt",
        "r.txt",
        "--report-csv",
        "r.csv",
        "--seed",
        "5",
    ];
    args.extend_from_slice(&base);
    let output = floodwatch(&args, dir.path());
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.lines().last().unwrap().starts_with("overall_accuracy="));
    assert!(dir.path().join("r.csv").exists());
}

#[test]
fn config_file_and_seed_flag_reproduce_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.conf");
    std::fs::write(
        &config_path,
        "scenario.duration_s=165.0\n\
         scenario.attack_start_s=30.0\n\
         scenario.attack_end_s=136.0\n\
         scenario.flood_rate_pps=300.0\n\
         train.max_epochs=40\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        let output = floodwatch(
            &["--config", "exp.conf", "--seed", "9", "pipeline", "--out-dir", out],
            dir.path(),
        );
        assert!(output.status.success(), "stderr: {}", stderr(&output));
    }
    for name in ["trace.csv", "dataset.csv", "model.txt", "report.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn errors_are_single_line_and_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();

    let output = floodwatch(&["extract", "--trace", "missing.csv"], dir.path());
    assert!(!output.status.success());
    let err = stderr(&output);
    assert_eq!(err.trim_end().lines().count(), 1, "stderr: {err}");
    assert!(err.starts_with("error: "));
    assert!(err.contains("missing.csv"));

    let output = floodwatch(&["--set", "scenario.bogus=1", "pipeline"], dir.path());
    assert!(!output.status.success());
    assert!(stderr(&output).contains("scenario.bogus"));

    let output = floodwatch(
        &["--set", "scenario.flood_rate_pps=0", "simulate", "--out", "t.csv"],
        dir.path(),
    );
    assert!(!output.status.success());
    assert!(stderr(&output).contains("flood_rate_pps"));
}

#[test]
fn check_gradients_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let output = floodwatch(&["check-gradients", "--cases", "30", "--seed", "17"], dir.path());
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("gradient_failures=0"));
    assert!(text.lines().last().unwrap().ends_with("PASS"));
}

#[test]
fn commands_do_not_mutate_their_input_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--out", "t.csv", "--seed", "2"];
    args.extend_from_slice(REDUCED);
    assert!(floodwatch(&args, dir.path()).status.success());
    let before = std::fs::read(dir.path().join("t.csv")).unwrap();

    let mut args = vec!["extract", "--trace", "t.csv", "--out", "d.csv"];
    args.extend_from_slice(REDUCED);
    assert!(floodwatch(&args, dir.path()).status.success());
    let after = std::fs::read(dir.path().join("t.csv")).unwrap();
    assert_eq!(before, after);
}
