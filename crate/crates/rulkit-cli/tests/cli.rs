use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rulkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rulkit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_fleet(dir: &Path) {
    let output = rulkit(&[
        "synth-data",
        "--out",
        dir.to_str().unwrap(),
        "--train-engines",
        "8",
        "--test-engines",
        "3",
        "--min-cycles",
        "40",
        "--max-cycles",
        "80",
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
}

#[test]
fn synth_ingest_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_fleet(dir.path());
    for name in ["train_FD001.txt", "test_FD001.txt", "RUL_FD001.txt"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }

    let check = rulkit(&[
        "ingest-check",
        "--data-dir",
        dir.path().to_str().unwrap(),
        "--subset",
        "FD001",
    ]);
    assert!(check.status.success(), "{}", stderr(&check));
    let text = stdout(&check);
    assert!(text.contains("train: 8 engines"), "{text}");
    assert!(text.contains("3 true RUL values"), "{text}");
    assert!(text.contains("kept 14 of 21"), "{text}");

    let out_dir = dir.path().join("run");
    let eval = rulkit(&[
        "evaluate",
        "--data-dir",
        dir.path().to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--override-v",
        "10,2,70",
        "--reps",
        "2",
        "--epochs",
        "3",
        "--architecture",
        "6",
    ]);
    assert!(eval.status.success(), "{}", stderr(&eval));
    let text = stdout(&eval);
    assert!(text.contains("fixed parameters (10, 2, 70)"), "{text}");
    assert!(text.contains("wrote"), "{text}");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["subset"], "FD001");
    assert_eq!(report["repetitions"], 2);
    assert_eq!(report["data_params"]["n_w"], 10);
    assert_eq!(report["per_engine"].as_array().unwrap().len(), 3);
    assert!(report["optimization"].is_null());
}

#[test]
fn evaluate_writes_identical_artifacts_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    write_fleet(dir.path());
    let run = |out: &Path| {
        let eval = rulkit(&[
            "evaluate",
            "--data-dir",
            dir.path().to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--override-v",
            "10,2,70",
            "--reps",
            "2",
            "--epochs",
            "3",
            "--architecture",
            "6",
            "--seed",
            "99",
        ]);
        assert!(eval.status.success(), "{}", stderr(&eval));
    };
    let all = [
        "report.json",
        "per_engine.csv",
        "figure_rul.csv",
        "boxplot.csv",
        "model.txt",
    ];

    // Same configuration twice into the same directory: everything matches.
    let out_a = dir.path().join("a");
    run(&out_a);
    let first: Vec<Vec<u8>> = all
        .iter()
        .map(|n| fs::read(out_a.join(n)).unwrap())
        .collect();
    run(&out_a);
    for (name, before) in all.iter().zip(&first) {
        let after = fs::read(out_a.join(name)).unwrap();
        assert_eq!(&after, before, "{name} differs between identical runs");
    }

    // A different output directory is a different configuration, which shows
    // up only in the echoed config inside report.json; the scored artifacts
    // still match byte for byte.
    let out_b = dir.path().join("b");
    run(&out_b);
    for name in [
        "per_engine.csv",
        "figure_rul.csv",
        "boxplot.csv",
        "model.txt",
    ] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} depends on the output location");
    }
}

#[test]
fn config_file_sets_the_run_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    write_fleet(dir.path());
    let out_dir = dir.path().join("run");
    let config_path = dir.path().join("experiment.conf");
    fs::write(
        &config_path,
        format!(
            "data_dir = {}\nout_dir = {}\nparams = 10, 2, 70\nrepetitions = 5\n\
             epochs = 3\narchitecture = 6\nmaster_seed = 7\n",
            dir.path().display(),
            out_dir.display()
        ),
    )
    .unwrap();

    let eval = rulkit(&[
        "evaluate",
        "--config",
        config_path.to_str().unwrap(),
        "--reps",
        "2",
    ]);
    assert!(eval.status.success(), "{}", stderr(&eval));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    // The flag wins over the file; everything else comes from the file.
    assert_eq!(report["repetitions"], 2);
    assert_eq!(report["master_seed"], 7);
    assert_eq!(report["data_params"]["n_w"], 10);
}

#[test]
fn optimize_reports_the_best_point_and_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    write_fleet(dir.path());
    let trace_path = dir.path().join("trace.jsonl");
    let output = rulkit(&[
        "optimize",
        "--data-dir",
        dir.path().to_str().unwrap(),
        "--subset",
        "FD001",
        "--population",
        "4",
        "--generations",
        "2",
        "--epochs",
        "2",
        "--out",
        trace_path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("searched FD001: best ("), "{text}");
    assert!(text.contains("12 evaluations"), "{text}");
    let trace = fs::read_to_string(trace_path).unwrap();
    assert_eq!(trace.lines().count(), 3);
    for line in trace.lines() {
        let entry: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(entry["best_score"].is_number());
    }
}

#[test]
fn train_saves_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    write_fleet(dir.path());
    let model_path = dir.path().join("model.txt");
    let output = rulkit(&[
        "train",
        "--data-dir",
        dir.path().to_str().unwrap(),
        "--subset",
        "FD001",
        "--params",
        "10,2,70",
        "--architecture",
        "6",
        "--epochs",
        "3",
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = fs::read_to_string(model_path).unwrap();
    assert!(
        text.starts_with("mlp-regressor v1"),
        "unexpected header: {}",
        &text[..40]
    );
}

#[test]
fn exhaustive_refuses_to_run_without_acknowledgement() {
    let dir = tempfile::tempdir().unwrap();
    write_fleet(dir.path());
    let output = rulkit(&[
        "exhaustive",
        "--data-dir",
        dir.path().to_str().unwrap(),
        "--subset",
        "FD001",
        "--out",
        dir.path().join("table.csv").to_str().unwrap(),
    ]);
    assert!(!output.status.success());
    let text = stderr(&output);
    assert!(text.contains("--long-running"), "{text}");
    assert!(text.contains("8160"), "{text}");
    assert!(!dir.path().join("table.csv").exists());
}

#[test]
fn compare_arch_prints_one_row_per_preset() {
    let dir = tempfile::tempdir().unwrap();
    write_fleet(dir.path());
    let table_path = dir.path().join("arch.csv");
    let output = rulkit(&[
        "compare-arch",
        "--data-dir",
        dir.path().to_str().unwrap(),
        "--subset",
        "FD001",
        "--params",
        "10,2,70",
        "--reps",
        "2",
        "--epochs",
        "2",
        "--out",
        table_path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr(&output));
    let text = stdout(&output);
    // Header plus presets 1 through 6, plus the wrote line.
    assert_eq!(text.lines().count(), 8, "{text}");
    let table = fs::read_to_string(table_path).unwrap();
    assert_eq!(table.lines().count(), 7);
}

#[test]
fn missing_data_fails_with_a_clear_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = rulkit(&[
        "evaluate",
        "--data-dir",
        dir.path().join("nope").to_str().unwrap(),
        "--override-v",
        "10,2,70",
    ]);
    assert!(!output.status.success());
    assert!(stderr(&output).contains("ingest"), "{}", stderr(&output));
}

#[test]
fn malformed_params_are_rejected_at_parse_time() {
    let output = rulkit(&["evaluate", "--override-v", "10,2"]);
    assert!(!output.status.success());
    let text = stderr(&output);
    assert!(text.contains("override-v"), "{text}");
}
