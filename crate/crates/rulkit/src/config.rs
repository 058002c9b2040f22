//! Experiment configuration and its flat key-value file format.
//!
//! A config file is `key = value` per line with `#` comments. Keys mirror
//! [`ExperimentConfig`] fields; evolutionary-search settings are prefixed
//! with `de_`. Values from a file override the defaults, and command-line
//! flags override the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::SubsetId;
use crate::de::{DeConfig, Mutation};
use crate::error::{Error, Result};
use crate::metrics::RhsVariant;
use crate::mlp::{preset_layers, OptimizerKind, TrainConfig};
use crate::windowing::DataParams;

/// Where the data parameters come from: evolutionary search or a fixed
/// triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamChoice {
    Optimize,
    Fixed(DataParams),
}

/// Everything one experiment run depends on. Serialized verbatim into the
/// report so results stay interpretable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub subset: SubsetId,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub params: ParamChoice,
    pub repetitions: usize,
    pub master_seed: u64,
    /// Architecture preset, 1..=6.
    pub architecture: u8,
    pub l1: f64,
    pub l2: f64,
    /// Final-training settings (the search uses its own short schedule).
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Validation engines held out during final training. Zero trains on
    /// everything, which is the standard setting.
    pub validation_fraction: f64,
    pub de: DeConfig,
    /// Cap test labels at the plateau like training labels.
    pub cap_test_rul: bool,
    pub rhs_variant: RhsVariant,
    /// Search on this subset itself even when a cheaper proxy exists.
    pub force_reoptimize: bool,
    /// Worker threads for repetitions and search evaluations; 0 uses the
    /// rayon default.
    pub max_workers: usize,
}

impl ExperimentConfig {
    pub fn new(subset: SubsetId, data_dir: PathBuf, out_dir: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            subset,
            data_dir,
            out_dir,
            params: ParamChoice::Optimize,
            repetitions: 10,
            master_seed: 42,
            architecture: 1,
            l1: 0.1,
            l2: 0.2,
            epochs: 200,
            batch_size: 512,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            validation_fraction: 0.0,
            de: DeConfig::default(),
            cap_test_rul: false,
            rhs_variant: RhsVariant::Mean,
            force_reoptimize: false,
            max_workers: 0,
        }
    }

    /// The final-training schedule as a [`TrainConfig`]; the shuffle seed is
    /// derived per repetition at run time.
    pub fn train_config(&self, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            shuffle_seed,
            validation_fraction: self.validation_fraction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidExperiment(
                "repetitions must be at least 1".into(),
            ));
        }
        preset_layers(self.architecture, self.l1, self.l2).map_err(|_| {
            Error::InvalidExperiment(format!(
                "architecture preset {} does not exist",
                self.architecture
            ))
        })?;
        if self.l1 < 0.0 || self.l2 < 0.0 {
            return Err(Error::InvalidExperiment(
                "penalty coefficients must be non-negative".into(),
            ));
        }
        self.train_config(0)
            .validate()
            .map_err(|e| Error::InvalidExperiment(e.to_string()))?;
        self.de
            .validate()
            .map_err(|e| Error::InvalidExperiment(e.to_string()))?;
        if let ParamChoice::Fixed(params) = self.params {
            if params.n_w == 0 || params.n_s == 0 {
                return Err(Error::InvalidExperiment(format!(
                    "fixed data parameters {params} are invalid"
                )));
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines from a config file over this config.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    /// Applies config text. Unknown keys are rejected so typos surface
    /// instead of silently keeping a default.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::ConfigParse {
                line,
                message: format!("expected `key = value`, got `{trimmed}`"),
            })?;
            self.apply_entry(key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    fn apply_entry(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let bad = |message: String| Error::ConfigParse { line, message };
        let parse = |what: &str| -> Error { bad(format!("cannot parse {what} from `{value}`")) };
        match key {
            "subset" => self.subset = value.parse().map_err(|_| parse("subset"))?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "params" => {
                self.params = if value.eq_ignore_ascii_case("optimize") {
                    ParamChoice::Optimize
                } else {
                    ParamChoice::Fixed(value.parse().map_err(|_| parse("data parameters"))?)
                }
            }
            "repetitions" => self.repetitions = value.parse().map_err(|_| parse("repetitions"))?,
            "master_seed" => self.master_seed = value.parse().map_err(|_| parse("master_seed"))?,
            "architecture" => {
                self.architecture = value.parse().map_err(|_| parse("architecture"))?
            }
            "l1" => self.l1 = value.parse().map_err(|_| parse("l1"))?,
            "l2" => self.l2 = value.parse().map_err(|_| parse("l2"))?,
            "epochs" => self.epochs = value.parse().map_err(|_| parse("epochs"))?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| parse("batch_size"))?,
            "learning_rate" => {
                self.learning_rate = value.parse().map_err(|_| parse("learning_rate"))?
            }
            "optimizer" => self.optimizer = value.parse().map_err(|_| parse("optimizer"))?,
            "validation_fraction" => {
                self.validation_fraction =
                    value.parse().map_err(|_| parse("validation_fraction"))?
            }
            "cap_test_rul" => self.cap_test_rul = parse_bool(value).ok_or_else(|| parse("bool"))?,
            "rhs_variant" => {
                self.rhs_variant = match value.to_ascii_lowercase().as_str() {
                    "mean" => RhsVariant::Mean,
                    "sum" => RhsVariant::Sum,
                    _ => return Err(parse("rhs_variant (mean or sum)")),
                }
            }
            "force_reoptimize" => {
                self.force_reoptimize = parse_bool(value).ok_or_else(|| parse("bool"))?
            }
            "max_workers" => self.max_workers = value.parse().map_err(|_| parse("max_workers"))?,
            "de_population_size" => {
                self.de.population_size = value.parse().map_err(|_| parse("de_population_size"))?
            }
            "de_generations" => {
                self.de.generations = value.parse().map_err(|_| parse("de_generations"))?
            }
            "de_mutation" => {
                self.de.mutation = if let Some((low, high)) = value.split_once(':') {
                    Mutation::Dither {
                        low: low.trim().parse().map_err(|_| parse("de_mutation"))?,
                        high: high.trim().parse().map_err(|_| parse("de_mutation"))?,
                    }
                } else {
                    Mutation::Fixed(value.parse().map_err(|_| parse("de_mutation"))?)
                }
            }
            "de_crossover" => {
                self.de.crossover = value.parse().map_err(|_| parse("de_crossover"))?
            }
            "de_train_epochs" => {
                self.de.train_epochs_per_eval =
                    value.parse().map_err(|_| parse("de_train_epochs"))?
            }
            other => {
                return Err(bad(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}
