//! End-to-end checks of the experiment runner against its reporting
//! contract, driven entirely by synthetic fleets.

use std::path::Path;

use rulkit::synth::{self, SynthConfig};
use rulkit::windowing::{build_training_windows, DataParams};
use rulkit::{ExperimentConfig, ParamChoice, SubsetId};
use tempfile::TempDir;

fn synth_fleet(seed: u64) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    synth::write_files(
        &SynthConfig {
            train_engines: 6,
            test_engines: 4,
            min_cycles: 60,
            max_cycles: 120,
            seed,
            ..SynthConfig::default()
        },
        dir.path(),
    )
    .unwrap();
    dir
}

fn quick_config(data_dir: &Path, out_dir: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(
        SubsetId::FD001,
        data_dir.to_path_buf(),
        out_dir.to_path_buf(),
    );
    config.params = ParamChoice::Fixed(DataParams::new(10, 2, 100));
    config.repetitions = 1;
    config.epochs = 1;
    config.batch_size = 128;
    config.architecture = 6;
    config
}

#[test]
fn report_averages_match_the_per_rep_mean() {
    let data = synth_fleet(21);
    let out = tempfile::tempdir().unwrap();
    let mut config = quick_config(data.path(), out.path());
    config.repetitions = 4;
    config.epochs = 2;

    let report = rulkit::run_experiment(&config).unwrap().report;
    assert_eq!(report.per_rep.len(), 4);

    let rmses: Vec<f64> = report.per_rep.iter().map(|r| r.rmse).collect();
    let rhses: Vec<f64> = report.per_rep.iter().map(|r| r.rhs).collect();
    for (scores, stats) in [(&rmses, &report.rmse), (&rhses, &report.rhs)] {
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        assert!(
            (stats.avg - mean).abs() <= 1e-12,
            "reported avg {} is not the mean {mean} of the per-rep scores",
            stats.avg
        );
        let variance =
            scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / scores.len() as f64;
        assert!((stats.std - variance.sqrt()).abs() <= 1e-12);
        assert_eq!(
            stats.min,
            scores.iter().cloned().fold(f64::INFINITY, f64::min)
        );
        assert_eq!(
            stats.max,
            scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        );
    }

    let best = &report.per_rep[report.best_rep];
    assert!(rmses.iter().all(|r| best.rmse <= *r));

    let mut max_abs = 0.0f64;
    for row in &report.per_engine {
        let expected = row.predicted_rul - f64::from(row.true_rul);
        assert!((row.error - expected).abs() <= 1e-12);
        max_abs = max_abs.max(row.error.abs());
    }
    assert_eq!(report.max_abs_error, max_abs);

    let q = &report.abs_error_quartiles;
    assert!(
        q.whisker_low <= q.q1 && q.q1 <= q.median && q.median <= q.q3 && q.q3 <= q.whisker_high
    );
}

#[test]
fn input_width_is_channel_count_times_window_length() {
    let data = synth_fleet(22);
    let (raw_train, _) = synth::generate_parsed(&SynthConfig {
        train_engines: 4,
        min_cycles: 60,
        max_cycles: 90,
        seed: 22,
        ..SynthConfig::default()
    })
    .unwrap();
    let train = rulkit::dataset::select_sensors(&raw_train);

    for (n_w, expected) in [(24u32, 336usize), (17, 238)] {
        let windows = build_training_windows(&train, &DataParams::new(n_w, 1, 125)).unwrap();
        assert_eq!(windows.width, expected);
    }

    let out = tempfile::tempdir().unwrap();
    let mut config = quick_config(data.path(), out.path());
    config.params = ParamChoice::Fixed(DataParams::new(24, 1, 125));
    config.architecture = 1;

    let report = rulkit::run_experiment(&config).unwrap().report;
    assert_eq!(report.input_width, 336);
    assert_eq!(report.parameter_count, 7181);
    assert!(
        report.optimization.is_none(),
        "fixed params must not trigger a search"
    );
}

#[test]
fn capping_flag_caps_scored_rul() {
    let data = synth_fleet(23);
    let plateau = 5;

    let out_raw = tempfile::tempdir().unwrap();
    let mut config = quick_config(data.path(), out_raw.path());
    config.params = ParamChoice::Fixed(DataParams::new(10, 2, plateau));
    let uncapped = rulkit::run_experiment(&config).unwrap().report;

    let out_capped = tempfile::tempdir().unwrap();
    config.out_dir = out_capped.path().to_path_buf();
    config.cap_test_rul = true;
    let capped = rulkit::run_experiment(&config).unwrap().report;

    assert_eq!(uncapped.per_engine.len(), capped.per_engine.len());
    let mut saw_cap = false;
    for (raw, cap) in uncapped.per_engine.iter().zip(&capped.per_engine) {
        assert_eq!(raw.engine_id, cap.engine_id);
        assert_eq!(
            raw.predicted_rul, cap.predicted_rul,
            "capping must not change predictions"
        );
        assert_eq!(cap.true_rul, raw.true_rul.min(plateau));
        if raw.true_rul > plateau {
            saw_cap = true;
        }
    }
    assert!(
        saw_cap,
        "fleet produced no RUL above the plateau, so the flag went unexercised"
    );
}

#[test]
fn failed_window_stage_leaves_the_output_directory_empty() {
    let data = synth_fleet(24);
    let out = tempfile::tempdir().unwrap();
    let mut config = quick_config(data.path(), out.path());
    config.params = ParamChoice::Fixed(DataParams::new(400, 1, 100));

    let err = rulkit::run_experiment(&config).unwrap_err();
    assert!(
        err.to_string().contains("windows"),
        "unexpected error: {err}"
    );
    assert_eq!(
        std::fs::read_dir(out.path()).unwrap().count(),
        0,
        "a failed run must not leave partial artifacts"
    );
}

#[test]
fn the_report_echoes_the_run_configuration() {
    let data = synth_fleet(25);
    let out = tempfile::tempdir().unwrap();
    let mut config = quick_config(data.path(), out.path());
    config.master_seed = 9;

    rulkit::run_experiment(&config).unwrap();

    let text = std::fs::read_to_string(out.path().join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();

    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["subset"], "FD001");
    assert_eq!(json["master_seed"], 9);
    assert_eq!(json["data_params"]["n_w"], 10);
    assert_eq!(json["config"]["epochs"], 1);
    assert_eq!(json["config"]["architecture"], 6);
    assert_eq!(json["config"]["cap_test_rul"], false);
    assert_eq!(
        json["config"]["out_dir"],
        out.path().to_string_lossy().as_ref()
    );
}
