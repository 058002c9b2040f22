//! End-to-end experiment runner.
//!
//! One run is: load and prepare a subset, choose data parameters (by
//! evolutionary search or from the config), build windows, train the
//! regressor several times from different seeds, score every repetition on
//! the test set, and write the report artifacts. All randomness fans out
//! from the master seed, so a run is reproducible byte for byte.

use std::io::Write;

use log::warn;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ParamChoice};
use crate::dataset::{self, PreparedSubset, SubsetId, TrajectorySet};
use crate::de::{self, DeResult, SearchBounds};
use crate::error::{Error, Result};
use crate::fitness::FitnessEvaluator;
use crate::metrics;
use crate::mlp::{self, LayerSpec, MlpModel, OptimizerKind, TrainConfig};
use crate::report::{DeSummary, EngineRow, EvalReport, RepScore, ScoreStats, SCHEMA_VERSION};
use crate::seeds::derive_seed;
use crate::windowing::{build_test_features, build_training_windows, DataParams, WindowedDataset};

/// A finished run: the report plus the files it wrote.
#[derive(Debug)]
pub struct ExperimentRun {
    pub report: EvalReport,
    pub written: Vec<std::path::PathBuf>,
}

struct RepOutcome {
    rep: usize,
    model_seed: u64,
    shuffle_seed: u64,
    rmse: f64,
    rhs: f64,
    errors: Vec<f64>,
    predictions: Vec<f64>,
    model: MlpModel,
}

/// Runs one experiment as configured. Every stage failure is wrapped with
/// the stage name; nothing is written until the run has succeeded end to
/// end.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate().map_err(|e| e.in_stage("configure"))?;
    if config.max_workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.max_workers)
            .build()
            .map_err(|e| {
                Error::InvalidExperiment(format!("worker pool: {e}")).in_stage("configure")
            })?;
        pool.install(|| run_inner(config))
    } else {
        run_inner(config)
    }
}

fn run_inner(config: &ExperimentConfig) -> Result<ExperimentRun> {
    let target = dataset::load_and_prepare(&config.data_dir, config.subset)
        .map_err(|e| e.in_stage("ingest"))?;

    let layers = mlp::preset_layers(config.architecture, config.l1, config.l2)
        .map_err(|e| e.in_stage("configure"))?;

    let (params, optimization) = match config.params {
        ParamChoice::Fixed(params) => (params, None),
        ParamChoice::Optimize => {
            let (result, searched) =
                optimize_params(config, &target, &layers).map_err(|e| e.in_stage("optimize"))?;
            (result.best, Some((result, searched)))
        }
    };
    if params.n_w > config.subset.window_bound() {
        warn!(
            "window length {} exceeds the {} bound {}; short test engines will be padded",
            params.n_w,
            config.subset,
            config.subset.window_bound()
        );
    }

    let train_windows =
        build_training_windows(&target.train, &params).map_err(|e| e.in_stage("windows"))?;
    if train_windows.is_empty() {
        return Err(Error::InvalidExperiment(format!(
            "no training engine produces a window at {params}"
        ))
        .in_stage("windows"));
    }
    if !train_windows.skipped_engines.is_empty() {
        warn!(
            "{} training engines are shorter than the window and were skipped",
            train_windows.skipped_engines.len()
        );
    }
    let test_rows = build_test_features(&target.test, &params, config.cap_test_rul)
        .map_err(|e| e.in_stage("windows"))?;

    let reps = run_repetitions(config, &layers, &train_windows, &test_rows)
        .map_err(|e| e.in_stage("train"))?;

    let report = assemble_report(
        config,
        params,
        &train_windows,
        &test_rows,
        &reps,
        &optimization,
    )
    .map_err(|e| e.in_stage("evaluate"))?;

    let best = &reps[report.best_rep];
    let trace = optimization
        .as_ref()
        .map(|(result, _)| result.trace.as_slice());
    let written = crate::report::write_outputs(&report, &best.model, trace, &config.out_dir)
        .map_err(|e| e.in_stage("report"))?;

    Ok(ExperimentRun { report, written })
}

/// Chooses the subset to search on (FD003/FD004 reuse their cheaper proxy
/// unless re-optimization is forced), runs the search, and returns its
/// result.
fn optimize_params(
    config: &ExperimentConfig,
    target: &PreparedSubset,
    layers: &[LayerSpec],
) -> Result<(DeResult, SubsetId)> {
    let searched = if config.force_reoptimize {
        config.subset
    } else {
        config.subset.optimization_proxy()
    };
    let proxy_owned: PreparedSubset;
    let proxy: &PreparedSubset = if searched == config.subset {
        target
    } else {
        proxy_owned = dataset::load_and_prepare(&config.data_dir, searched)?;
        &proxy_owned
    };

    let evaluator = FitnessEvaluator::new(
        &proxy.train,
        layers.to_vec(),
        derive_seed(config.master_seed, "fitness", 0),
    )
    .with_epochs(config.de.train_epochs_per_eval)
    .with_batch_size(config.batch_size);

    let bounds = SearchBounds::for_subset(searched);
    let mut de_config = config.de.clone();
    de_config.seed = derive_seed(config.master_seed, "de", 0);
    let result = de::optimize(|v| evaluator.evaluate(v).rmse, &bounds, &de_config)?;
    Ok((result, searched))
}

fn run_repetitions(
    config: &ExperimentConfig,
    layers: &[LayerSpec],
    train_windows: &WindowedDataset,
    test_rows: &WindowedDataset,
) -> Result<Vec<RepOutcome>> {
    (0..config.repetitions)
        .into_par_iter()
        .map(|rep| -> Result<RepOutcome> {
            let model_seed = derive_seed(config.master_seed, "model-init", rep as u64);
            let shuffle_seed = derive_seed(config.master_seed, "shuffle", rep as u64);
            let model = MlpModel::build(train_windows.width, layers.to_vec(), model_seed)?;
            let outcome = mlp::train(&model, train_windows, &config.train_config(shuffle_seed))?;
            let predictions = outcome.model.forward(&test_rows.features)?;
            let errors: Vec<f64> = predictions
                .iter()
                .zip(&test_rows.labels)
                .map(|(p, &y)| p - f64::from(y))
                .collect();
            let rmse = metrics::rmse(&errors)?;
            let rhs = config.rhs_variant.compute(&errors)?;
            Ok(RepOutcome {
                rep,
                model_seed,
                shuffle_seed,
                rmse,
                rhs,
                errors,
                predictions,
                model: outcome.model,
            })
        })
        .collect()
}

fn assemble_report(
    config: &ExperimentConfig,
    params: DataParams,
    train_windows: &WindowedDataset,
    test_rows: &WindowedDataset,
    reps: &[RepOutcome],
    optimization: &Option<(DeResult, SubsetId)>,
) -> Result<EvalReport> {
    let per_rep: Vec<RepScore> = reps
        .iter()
        .map(|r| RepScore {
            rep: r.rep,
            model_seed: r.model_seed,
            shuffle_seed: r.shuffle_seed,
            rmse: r.rmse,
            rhs: r.rhs,
        })
        .collect();
    let rmses: Vec<f64> = reps.iter().map(|r| r.rmse).collect();
    let rhss: Vec<f64> = reps.iter().map(|r| r.rhs).collect();

    let best_rep = rmses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("at least one repetition");

    let best = &reps[best_rep];
    let abs_errors: Vec<f64> = best.errors.iter().map(|e| e.abs()).collect();
    let max_abs_error = abs_errors.iter().cloned().fold(0.0, f64::max);
    let abs_error_quartiles = metrics::quartile_summary(&abs_errors)?;

    let per_engine: Vec<EngineRow> = test_rows
        .engine_index
        .iter()
        .zip(&test_rows.labels)
        .zip(best.predictions.iter().zip(&best.errors))
        .map(
            |((&engine_id, &true_rul), (&predicted_rul, &error))| EngineRow {
                engine_id,
                true_rul,
                predicted_rul,
                error,
            },
        )
        .collect();

    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        subset: config.subset,
        data_params: params,
        input_width: train_windows.width,
        parameter_count: best.model.parameter_count(),
        repetitions: config.repetitions,
        master_seed: config.master_seed,
        cap_test_rul: config.cap_test_rul,
        rhs_variant: config.rhs_variant,
        optimization: optimization.as_ref().map(|(result, searched)| DeSummary {
            best: result.best,
            best_rmse: result.best_score,
            evaluations: result.evaluations,
            unique_evaluations: result.unique_evaluations,
            searched_subset: *searched,
        }),
        skipped_train_engines: train_windows.skipped_engines.clone(),
        per_rep,
        best_rep,
        rmse: ScoreStats::from_values(&rmses),
        rhs: ScoreStats::from_values(&rhss),
        max_abs_error,
        abs_error_quartiles,
        per_engine,
        config: config.clone(),
    })
}

/// Settings for a side-by-side architecture comparison.
#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub architectures: Vec<u8>,
    pub params: DataParams,
    pub l1: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Engines held out to score each architecture; test labels stay out of
    /// model selection.
    pub validation_fraction: f64,
    pub repetitions: usize,
    pub master_seed: u64,
}

impl CompareConfig {
    pub fn new(params: DataParams) -> CompareConfig {
        CompareConfig {
            architectures: vec![1, 2, 3, 4, 5, 6],
            params,
            l1: 0.1,
            l2: 0.2,
            epochs: 100,
            batch_size: 512,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            validation_fraction: 0.1,
            repetitions: 10,
            master_seed: 42,
        }
    }
}

/// Validation scores of one architecture across repetitions. Diverged
/// repetitions are counted and excluded from the stats; an architecture
/// whose every repetition diverged reports `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchScore {
    pub architecture: u8,
    pub parameter_count: usize,
    pub repetitions: usize,
    pub diverged: usize,
    pub rmse: Option<ScoreStats>,
    pub rhs: Option<ScoreStats>,
}

/// Trains every architecture preset on the same window split and scores it
/// on the held-out engines.
pub fn compare_architectures(
    train: &TrajectorySet,
    config: &CompareConfig,
) -> Result<Vec<ArchScore>> {
    if config.repetitions == 0 {
        return Err(Error::InvalidExperiment(
            "repetitions must be at least 1".into(),
        ));
    }
    let windows = build_training_windows(train, &config.params)?;
    let (train_part, val_part) = mlp::split_by_engine(&windows, config.validation_fraction)?;
    if train_part.is_empty() || val_part.is_empty() {
        return Err(Error::InvalidExperiment(
            "architecture comparison needs both training and validation rows".into(),
        ));
    }
    let val_labels = val_part.labels_f64();

    let mut scores = Vec::with_capacity(config.architectures.len());
    for &arch in &config.architectures {
        let layers = mlp::preset_layers(arch, config.l1, config.l2)?;
        let results: Vec<Result<Option<(f64, f64)>>> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| -> Result<Option<(f64, f64)>> {
                let stream = (u64::from(arch) << 32) | rep as u64;
                let model = MlpModel::build(
                    windows.width,
                    layers.clone(),
                    derive_seed(config.master_seed, "compare-model", stream),
                )?;
                let train_config = TrainConfig {
                    epochs: config.epochs,
                    batch_size: config.batch_size,
                    learning_rate: config.learning_rate,
                    optimizer: config.optimizer,
                    shuffle_seed: derive_seed(config.master_seed, "compare-shuffle", stream),
                    validation_fraction: 0.0,
                };
                let outcome =
                    match mlp::train_with_validation(&model, &train_part, None, &train_config) {
                        Ok(o) => o,
                        Err(Error::Diverged { .. }) => return Ok(None),
                        Err(err) => return Err(err),
                    };
                let predictions = outcome.model.forward(&val_part.features)?;
                let errors: Vec<f64> = predictions
                    .iter()
                    .zip(&val_labels)
                    .map(|(p, y)| p - y)
                    .collect();
                Ok(Some((
                    metrics::rmse(&errors)?,
                    metrics::rhs(&errors).unwrap_or(f64::INFINITY),
                )))
            })
            .collect();

        let mut rmses = Vec::new();
        let mut rhss = Vec::new();
        let mut diverged = 0usize;
        for result in results {
            match result? {
                Some((rmse, rhs)) => {
                    rmses.push(rmse);
                    rhss.push(rhs);
                }
                None => diverged += 1,
            }
        }
        let parameter_count = MlpModel::build(windows.width, layers.clone(), 0)?.parameter_count();
        scores.push(ArchScore {
            architecture: arch,
            parameter_count,
            repetitions: config.repetitions,
            diverged,
            rmse: if rmses.is_empty() {
                None
            } else {
                Some(ScoreStats::from_values(&rmses))
            },
            rhs: if rhss.is_empty() {
                None
            } else {
                Some(ScoreStats::from_values(&rhss))
            },
        });
    }
    Ok(scores)
}

/// Writes the architecture comparison as CSV.
pub fn write_arch_table<W: Write>(scores: &[ArchScore], mut out: W) -> Result<()> {
    writeln!(
        out,
        "architecture,parameters,repetitions,diverged,rmse_min,rmse_max,rmse_avg,rmse_std,rhs_min,rhs_max,rhs_avg,rhs_std"
    )?;
    for s in scores {
        let stats = |v: &Option<ScoreStats>| match v {
            Some(s) => format!("{},{},{},{}", s.min, s.max, s.avg, s.std),
            None => ",,,".to_string(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.architecture,
            s.parameter_count,
            s.repetitions,
            s.diverged,
            stats(&s.rmse),
            stats(&s.rhs)
        )?;
    }
    Ok(())
}
