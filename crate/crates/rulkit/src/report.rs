//! Evaluation report and its on-disk artifacts.
//!
//! `report.json` is the machine-readable record of a run: config echo,
//! per-repetition scores, aggregates, and per-engine predictions of the best
//! repetition. The CSV companions carry the same numbers shaped for plotting.
//! Nothing here includes timestamps or host details, so identical runs write
//! identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset::SubsetId;
use crate::de::GenerationTrace;
use crate::error::Result;
use crate::metrics::{QuartileSummary, RhsVariant};
use crate::mlp::MlpModel;
use crate::windowing::DataParams;

/// Min/max/average/standard deviation over repetitions. The deviation is the
/// population form (divide by n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
    pub std: f64,
}

impl ScoreStats {
    pub fn from_values(values: &[f64]) -> ScoreStats {
        assert!(!values.is_empty(), "stats need at least one value");
        let n = values.len() as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let avg = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - avg) * (v - avg)).sum::<f64>() / n;
        ScoreStats {
            min,
            max,
            avg,
            std: var.sqrt(),
        }
    }
}

/// Scores of one repetition, with the seeds that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepScore {
    pub rep: usize,
    pub model_seed: u64,
    pub shuffle_seed: u64,
    pub rmse: f64,
    pub rhs: f64,
}

/// One test engine's prediction from the best repetition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineRow {
    pub engine_id: u32,
    pub true_rul: u32,
    pub predicted_rul: f64,
    pub error: f64,
}

/// Summary of the evolutionary search that chose the data parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeSummary {
    pub best: DataParams,
    pub best_rmse: f64,
    pub evaluations: u64,
    pub unique_evaluations: u64,
    /// Subset the search actually ran on (a cheaper proxy for FD003/FD004).
    pub searched_subset: SubsetId,
}

/// The complete record of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub subset: SubsetId,
    pub data_params: DataParams,
    /// Feature width fed to the regressor: sensor count times `n_w`.
    pub input_width: usize,
    pub parameter_count: usize,
    pub repetitions: usize,
    pub master_seed: u64,
    pub cap_test_rul: bool,
    pub rhs_variant: RhsVariant,
    /// Present when the parameters came from the evolutionary search.
    pub optimization: Option<DeSummary>,
    /// Training engines too short for even one window at these parameters.
    pub skipped_train_engines: Vec<u32>,
    pub per_rep: Vec<RepScore>,
    /// Repetition with the lowest test RMSE; its predictions fill
    /// `per_engine` and its model is the one persisted.
    pub best_rep: usize,
    pub rmse: ScoreStats,
    pub rhs: ScoreStats,
    pub max_abs_error: f64,
    pub abs_error_quartiles: QuartileSummary,
    pub per_engine: Vec<EngineRow>,
    pub config: ExperimentConfig,
}

pub const SCHEMA_VERSION: u32 = 1;

fn write_report_json(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_per_engine_csv(rows: &[EngineRow], path: &Path) -> Result<()> {
    let mut out = String::from("engine_id,true_rul,predicted_rul,error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.engine_id, r.true_rul, r.predicted_rul, r.error
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Engines sorted by id, the x-axis of true-versus-predicted plots.
fn write_figure_csv(rows: &[EngineRow], path: &Path) -> Result<()> {
    let mut sorted: Vec<&EngineRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.engine_id);
    let mut out = String::from("engine_id,true_rul,predicted_rul,error\n");
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.engine_id, r.true_rul, r.predicted_rul, r.error
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_boxplot_csv(report: &EvalReport, path: &Path) -> Result<()> {
    let q = &report.abs_error_quartiles;
    let out = format!(
        "q1,median,q3,whisker_low,whisker_high,max_abs_error\n{},{},{},{},{},{}\n",
        q.q1, q.median, q.q3, q.whisker_low, q.whisker_high, report.max_abs_error
    );
    fs::write(path, out)?;
    Ok(())
}

/// Writes one JSON object per generation, one line each.
pub fn write_de_trace(trace: &[GenerationTrace], path: &Path) -> Result<()> {
    let mut out = String::new();
    for entry in trace {
        out.push_str(&serde_json::to_string(entry)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes every artifact of a run into `out_dir`: `report.json`,
/// `per_engine.csv`, `figure_rul.csv`, `boxplot.csv`, `model.txt`, and
/// `de_trace.jsonl` when a search ran. Returns the written paths; on failure
/// any files already written by this call are removed so a failed run leaves
/// no partial output behind.
pub fn write_outputs(
    report: &EvalReport,
    model: &MlpModel,
    trace: Option<&[GenerationTrace]>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> Result<()> {
        let path = out_dir.join("report.json");
        write_report_json(report, &path)?;
        written.push(path);

        let path = out_dir.join("per_engine.csv");
        write_per_engine_csv(&report.per_engine, &path)?;
        written.push(path);

        let path = out_dir.join("figure_rul.csv");
        write_figure_csv(&report.per_engine, &path)?;
        written.push(path);

        let path = out_dir.join("boxplot.csv");
        write_boxplot_csv(report, &path)?;
        written.push(path);

        let path = out_dir.join("model.txt");
        model.save(&path)?;
        written.push(path);

        if let Some(trace) = trace {
            let path = out_dir.join("de_trace.jsonl");
            write_de_trace(trace, &path)?;
            written.push(path);
        }
        Ok(())
    })();

    match result {
        Ok(()) => Ok(written),
        Err(err) => {
            for path in &written {
                let _ = fs::remove_file(path);
            }
            Err(err)
        }
    }
}
