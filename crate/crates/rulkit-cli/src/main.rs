use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rulkit::config::{ExperimentConfig, ParamChoice};
use rulkit::dataset::{self, SubsetId, EXPECTED_TEST_ENGINES, EXPECTED_TRAIN_ENGINES};
use rulkit::de::{self, DeConfig, SearchBounds};
use rulkit::experiment::{self, CompareConfig};
use rulkit::fitness::FitnessEvaluator;
use rulkit::grid::{self, GridSpec};
use rulkit::mlp::{self, MlpModel};
use rulkit::report;
use rulkit::seeds::derive_seed;
use rulkit::synth::{self, SynthConfig};
use rulkit::windowing::{build_training_windows, DataParams};

#[derive(Parser)]
#[command(name = "rulkit", version)]
#[command(about = "Remaining-useful-life experiments on turbofan trajectory data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a subset and report what was loaded.
    IngestCheck {
        /// Directory holding the trajectory text files.
        #[arg(long)]
        data_dir: PathBuf,
        /// Subset to load (FD001..FD004).
        #[arg(long)]
        subset: SubsetId,
    },
    /// Write a small synthetic fleet in the trajectory file format.
    SynthData {
        /// Directory the three files are written to.
        #[arg(long)]
        out: PathBuf,
        /// Subset name used in the file names.
        #[arg(long, default_value = "FD001")]
        subset: SubsetId,
        #[arg(long, default_value_t = 20)]
        train_engines: u32,
        #[arg(long, default_value_t = 10)]
        test_engines: u32,
        /// Shortest failure time an engine may have.
        #[arg(long, default_value_t = 120)]
        min_cycles: u32,
        #[arg(long, default_value_t = 300)]
        max_cycles: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Search window length, stride, and RUL plateau with differential
    /// evolution.
    Optimize {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        subset: SubsetId,
        /// Master seed; the search and every fitness evaluation derive from
        /// it.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        population: usize,
        #[arg(long, default_value_t = 30)]
        generations: usize,
        /// Training epochs per fitness evaluation.
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        /// Optional path for a per-generation JSONL trace.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model with fixed data parameters and save it.
    Train {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        subset: SubsetId,
        /// Data parameters as "n_w,n_s,r_e".
        #[arg(long, value_name = "N_W,N_S,R_E")]
        params: DataParams,
        /// Where the trained model is saved.
        #[arg(long, default_value = "model.txt")]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Network preset (1..=6).
        #[arg(long, default_value_t = 1)]
        architecture: u8,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 512)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
    },
    /// Run the full protocol: prepare, search (or take fixed parameters),
    /// train repeatedly, score, and write report artifacts.
    Evaluate {
        /// Subset to evaluate; defaults to FD001 unless the config file says
        /// otherwise.
        #[arg(long)]
        subset: Option<SubsetId>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Key = value configuration file applied before the flags.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory the artifacts are written to.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of training repetitions.
        #[arg(long)]
        reps: Option<usize>,
        /// Skip the search and use these data parameters ("n_w,n_s,r_e").
        #[arg(long, value_name = "N_W,N_S,R_E")]
        override_v: Option<DataParams>,
        /// Clamp test labels at the plateau instead of using the file values.
        #[arg(long)]
        cap_test_rul: bool,
        /// Network preset (1..=6).
        #[arg(long)]
        architecture: Option<u8>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score every point of the parameter lattice and write the table.
    Exhaustive {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        subset: SubsetId,
        /// CSV file the score table is written to.
        #[arg(long)]
        out: PathBuf,
        /// Step the plateau in tens instead of ones (16x fewer points).
        #[arg(long)]
        coarse: bool,
        /// Required acknowledgement: a full sweep trains thousands of
        /// models.
        #[arg(long)]
        long_running: bool,
        /// Training epochs per lattice point.
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train every network preset on the same split and compare scores.
    CompareArch {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        subset: SubsetId,
        /// Data parameters as "n_w,n_s,r_e".
        #[arg(long, value_name = "N_W,N_S,R_E")]
        params: DataParams,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        /// Optional CSV file for the comparison table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::IngestCheck { data_dir, subset } => ingest_check(&data_dir, subset),
        Command::SynthData {
            out,
            subset,
            train_engines,
            test_engines,
            min_cycles,
            max_cycles,
            seed,
        } => synth_data(
            out,
            subset,
            train_engines,
            test_engines,
            min_cycles,
            max_cycles,
            seed,
        ),
        Command::Optimize {
            data_dir,
            subset,
            seed,
            population,
            generations,
            epochs,
            out,
        } => optimize(
            &data_dir,
            subset,
            seed,
            population,
            generations,
            epochs,
            out,
        ),
        Command::Train {
            data_dir,
            subset,
            params,
            out,
            seed,
            architecture,
            epochs,
            batch_size,
            learning_rate,
        } => train(
            &data_dir,
            subset,
            params,
            &out,
            seed,
            architecture,
            epochs,
            batch_size,
            learning_rate,
        ),
        Command::Evaluate {
            subset,
            data_dir,
            config,
            out,
            seed,
            reps,
            override_v,
            cap_test_rul,
            architecture,
            epochs,
        } => evaluate(
            subset,
            data_dir,
            config,
            out,
            seed,
            reps,
            override_v,
            cap_test_rul,
            architecture,
            epochs,
        ),
        Command::Exhaustive {
            data_dir,
            subset,
            out,
            coarse,
            long_running,
            epochs,
            seed,
        } => exhaustive(&data_dir, subset, &out, coarse, long_running, epochs, seed),
        Command::CompareArch {
            data_dir,
            subset,
            params,
            reps,
            seed,
            epochs,
            out,
        } => compare_arch(&data_dir, subset, params, reps, seed, epochs, out),
    }
}

fn ingest_check(data_dir: &std::path::Path, subset: SubsetId) -> Result<()> {
    let (train, test) = dataset::load_subset(data_dir, subset)
        .with_context(|| format!("loading {subset} from {}", data_dir.display()))?;
    let idx = subset.index();
    println!(
        "{subset} train: {} engines ({} expected), {} cycles",
        train.engine_count(),
        EXPECTED_TRAIN_ENGINES[idx],
        train.total_cycles()
    );
    println!(
        "{subset} test:  {} engines ({} expected), {} cycles, {} true RUL values",
        test.engine_count(),
        EXPECTED_TEST_ENGINES[idx],
        test.total_cycles(),
        test.true_rul.as_ref().map_or(0, Vec::len)
    );
    let prepared = dataset::prepare(&train, &test)?;
    let constant = prepared
        .stats
        .mins
        .iter()
        .zip(&prepared.stats.maxs)
        .filter(|(lo, hi)| lo == hi)
        .count();
    println!(
        "kept {} of {} sensor channels; {} constant on this subset",
        prepared.train.sensor_count(),
        train.sensor_count(),
        constant
    );
    Ok(())
}

fn synth_data(
    out: PathBuf,
    subset: SubsetId,
    train_engines: u32,
    test_engines: u32,
    min_cycles: u32,
    max_cycles: u32,
    seed: u64,
) -> Result<()> {
    let config = SynthConfig {
        subset,
        train_engines,
        test_engines,
        min_cycles,
        max_cycles,
        seed,
        ..SynthConfig::default()
    };
    let paths = synth::write_files(&config, &out)?;
    for path in paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn optimize(
    data_dir: &std::path::Path,
    subset: SubsetId,
    seed: u64,
    population: usize,
    generations: usize,
    epochs: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    let prepared = dataset::load_and_prepare(data_dir, subset)?;
    let evaluator = FitnessEvaluator::new(
        &prepared.train,
        mlp::default_layers(),
        derive_seed(seed, "fitness", 0),
    )
    .with_epochs(epochs);
    let de_config = DeConfig {
        population_size: population,
        generations,
        seed: derive_seed(seed, "de", 0),
        train_epochs_per_eval: epochs,
        ..DeConfig::default()
    };
    let bounds = SearchBounds::for_subset(subset);
    let result = de::optimize(|v| evaluator.evaluate(v).rmse, &bounds, &de_config)?;
    println!(
        "searched {subset}: best {} with rmse {:.3}",
        result.best, result.best_score
    );
    println!(
        "{} evaluations ({} unique) over {} generations",
        result.evaluations,
        result.unique_evaluations,
        result.trace.len()
    );
    if let Some(path) = out {
        report::write_de_trace(&result.trace, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    data_dir: &std::path::Path,
    subset: SubsetId,
    params: DataParams,
    out: &std::path::Path,
    seed: u64,
    architecture: u8,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
) -> Result<()> {
    let prepared = dataset::load_and_prepare(data_dir, subset)?;
    let windows = build_training_windows(&prepared.train, &params)?;
    if windows.is_empty() {
        bail!("no training engine produces a window at {params}");
    }
    let layers = mlp::preset_layers(architecture, mlp::DEFAULT_L1, mlp::DEFAULT_L2)?;
    let model = MlpModel::build(windows.width, layers, derive_seed(seed, "model-init", 0))?;
    let config = rulkit::mlp::TrainConfig {
        epochs,
        batch_size,
        learning_rate,
        shuffle_seed: derive_seed(seed, "shuffle", 0),
        ..rulkit::mlp::TrainConfig::default()
    };
    let outcome = mlp::train(&model, &windows, &config)?;
    let last = outcome.history.last().expect("at least one epoch");
    println!(
        "trained preset {architecture} ({} parameters) on {} windows of width {}",
        outcome.model.parameter_count(),
        windows.rows(),
        windows.width
    );
    println!("final epoch training loss {:.4}", last.train_loss);
    outcome.model.save(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    subset: Option<SubsetId>,
    data_dir: Option<PathBuf>,
    config_file: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    reps: Option<usize>,
    override_v: Option<DataParams>,
    cap_test_rul: bool,
    architecture: Option<u8>,
    epochs: Option<usize>,
) -> Result<()> {
    let mut config = ExperimentConfig::new(
        SubsetId::FD001,
        PathBuf::from("."),
        PathBuf::from("rulkit-out"),
    );
    if let Some(path) = &config_file {
        config
            .apply_file(path)
            .with_context(|| format!("reading {}", path.display()))?;
    }
    if let Some(subset) = subset {
        config.subset = subset;
    }
    if let Some(data_dir) = data_dir {
        config.data_dir = data_dir;
    }
    if let Some(out) = out {
        config.out_dir = out;
    }
    if let Some(seed) = seed {
        config.master_seed = seed;
    }
    if let Some(reps) = reps {
        config.repetitions = reps;
    }
    if let Some(params) = override_v {
        config.params = ParamChoice::Fixed(params);
    }
    if cap_test_rul {
        config.cap_test_rul = true;
    }
    if let Some(architecture) = architecture {
        config.architecture = architecture;
    }
    if let Some(epochs) = epochs {
        config.epochs = epochs;
    }

    let run = experiment::run_experiment(&config)?;
    let report = &run.report;
    match &report.optimization {
        Some(s) => println!(
            "{}: {} from a search on {} (best rmse {:.3}, {} evaluations)",
            report.subset, report.data_params, s.searched_subset, s.best_rmse, s.evaluations
        ),
        None => println!("{}: fixed parameters {}", report.subset, report.data_params),
    }
    println!(
        "{} repetitions of preset {} ({} parameters) on windows of width {}",
        report.repetitions, report.config.architecture, report.parameter_count, report.input_width
    );
    println!(
        "test rmse  min {:.3}  avg {:.3}  max {:.3}  std {:.3}",
        report.rmse.min, report.rmse.avg, report.rmse.max, report.rmse.std
    );
    println!(
        "health score  min {:.3}  avg {:.3}  max {:.3}  std {:.3}",
        report.rhs.min, report.rhs.avg, report.rhs.max, report.rhs.std
    );
    println!(
        "best repetition {}: rmse {:.3}, max |error| {:.2} over {} engines",
        report.best_rep,
        report.per_rep[report.best_rep].rmse,
        report.max_abs_error,
        report.per_engine.len()
    );
    for path in &run.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn exhaustive(
    data_dir: &std::path::Path,
    subset: SubsetId,
    out: &std::path::Path,
    coarse: bool,
    long_running: bool,
    epochs: usize,
    seed: u64,
) -> Result<()> {
    let spec = if coarse {
        GridSpec::coarse(subset)
    } else {
        GridSpec::standard(subset)
    };
    if !long_running {
        bail!(
            "an exhaustive sweep of {subset} trains {} models; pass --long-running to confirm",
            spec.cardinality()
        );
    }
    let prepared = dataset::load_and_prepare(data_dir, subset)?;
    let evaluator = FitnessEvaluator::new(
        &prepared.train,
        mlp::default_layers(),
        derive_seed(seed, "fitness", 0),
    )
    .with_epochs(epochs);
    let result = grid::sweep(|v| evaluator.evaluate(v), &spec)?;
    println!(
        "swept {} points: best {} with rmse {:.3}, worst {} with rmse {:.3}",
        result.evaluations,
        result.argmin.params,
        result.argmin.rmse,
        result.argmax.params,
        result.argmax.rmse
    );
    let file = fs::File::create(out)?;
    grid::write_score_table(&result.points, std::io::BufWriter::new(file))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn compare_arch(
    data_dir: &std::path::Path,
    subset: SubsetId,
    params: DataParams,
    reps: usize,
    seed: u64,
    epochs: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    let prepared = dataset::load_and_prepare(data_dir, subset)?;
    let mut config = CompareConfig::new(params);
    config.repetitions = reps;
    config.master_seed = seed;
    config.epochs = epochs;
    let scores = experiment::compare_architectures(&prepared.train, &config)?;
    println!("architecture  parameters  diverged  rmse avg (std)    score avg");
    for s in &scores {
        match (&s.rmse, &s.rhs) {
            (Some(rmse), Some(rhs)) => println!(
                "{:>12}  {:>10}  {:>8}  {:>8.3} ({:.3})  {:>9.3}",
                s.architecture, s.parameter_count, s.diverged, rmse.avg, rmse.std, rhs.avg
            ),
            _ => println!(
                "{:>12}  {:>10}  {:>8}  every repetition diverged",
                s.architecture, s.parameter_count, s.diverged
            ),
        }
    }
    if let Some(path) = out {
        let file = fs::File::create(&path)?;
        experiment::write_arch_table(&scores, std::io::BufWriter::new(file))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
