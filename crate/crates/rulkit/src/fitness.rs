//! Fitness of a data-parameter triple: train briefly, score on held-out
//! engines.
//!
//! The optimizer compares triples `(n_w, n_s, r_e)` by building windows for
//! each candidate, training the regressor for a small number of epochs, and
//! reading RMSE on a validation split of held-out engines. All seeds are
//! fixed per evaluator, so the fitness surface is a deterministic function of
//! the candidate and repeated queries can be served from a cache.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataset::TrajectorySet;
use crate::de::SearchBounds;
use crate::error::{Error, Result};
use crate::metrics;
use crate::mlp::{self, LayerSpec, MlpModel, OptimizerKind, TrainConfig};
use crate::seeds::derive_seed;
use crate::windowing::{build_training_windows, DataParams};

/// Why a fitness value is (or is not) usable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitnessStatus {
    Ok,
    /// The candidate produced no training or validation rows.
    NoWindows,
    /// Training diverged before finishing.
    Diverged,
}

impl std::fmt::Display for FitnessStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            FitnessStatus::Ok => "ok",
            FitnessStatus::NoWindows => "no_windows",
            FitnessStatus::Diverged => "diverged",
        };
        f.write_str(name)
    }
}

/// Validation scores of one candidate. Degenerate candidates carry infinite
/// scores so that minimization pushes away from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessScores {
    pub rmse: f64,
    pub rhs: f64,
    pub status: FitnessStatus,
}

impl FitnessScores {
    fn sentinel(status: FitnessStatus) -> FitnessScores {
        FitnessScores {
            rmse: f64::INFINITY,
            rhs: f64::INFINITY,
            status,
        }
    }
}

/// Scores data-parameter candidates on a prepared (selected, normalized)
/// training set.
#[derive(Debug, Clone)]
pub struct FitnessEvaluator<'a> {
    train: &'a TrajectorySet,
    layers: Vec<LayerSpec>,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    optimizer: OptimizerKind,
    validation_fraction: f64,
    seed: u64,
}

impl<'a> FitnessEvaluator<'a> {
    /// Evaluator with the standard short-training settings: 20 epochs,
    /// batches of 512, Adam at its default rate, one tenth of the engines
    /// held out.
    pub fn new(
        train: &'a TrajectorySet,
        layers: Vec<LayerSpec>,
        seed: u64,
    ) -> FitnessEvaluator<'a> {
        FitnessEvaluator {
            train,
            layers,
            epochs: 20,
            batch_size: 512,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            validation_fraction: 0.1,
            seed,
        }
    }

    /// Overrides the per-evaluation training length.
    pub fn with_epochs(mut self, epochs: usize) -> FitnessEvaluator<'a> {
        self.epochs = epochs;
        self
    }

    /// Overrides the mini-batch size.
    pub fn with_batch_size(mut self, batch_size: usize) -> FitnessEvaluator<'a> {
        self.batch_size = batch_size;
        self
    }

    /// Scores a candidate. Degenerate candidates (no training rows, no
    /// validation engines, diverged training) yield infinite scores with a
    /// logged warning rather than an error, so searches can continue past
    /// them.
    pub fn evaluate(&self, params: DataParams) -> FitnessScores {
        let windows = match build_training_windows(self.train, &params) {
            Ok(w) => w,
            Err(err) => {
                warn!("fitness of {params}: window construction failed: {err}");
                return FitnessScores::sentinel(FitnessStatus::NoWindows);
            }
        };
        if windows.is_empty() {
            warn!("fitness of {params}: no engine is long enough for a window");
            return FitnessScores::sentinel(FitnessStatus::NoWindows);
        }
        let (train_part, val_part) = match mlp::split_by_engine(&windows, self.validation_fraction)
        {
            Ok(parts) => parts,
            Err(err) => {
                warn!("fitness of {params}: validation split failed: {err}");
                return FitnessScores::sentinel(FitnessStatus::NoWindows);
            }
        };
        if train_part.is_empty() || val_part.is_empty() {
            warn!("fitness of {params}: split left an empty side");
            return FitnessScores::sentinel(FitnessStatus::NoWindows);
        }

        let model = match MlpModel::build(
            windows.width,
            self.layers.clone(),
            derive_seed(self.seed, "fitness-model", 0),
        ) {
            Ok(m) => m,
            Err(err) => {
                warn!("fitness of {params}: model construction failed: {err}");
                return FitnessScores::sentinel(FitnessStatus::NoWindows);
            }
        };
        let config = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            shuffle_seed: derive_seed(self.seed, "fitness-shuffle", 0),
            validation_fraction: 0.0,
        };
        let outcome = match mlp::train_with_validation(&model, &train_part, None, &config) {
            Ok(o) => o,
            Err(Error::Diverged { epoch, loss }) => {
                warn!("fitness of {params}: diverged at epoch {epoch} (loss {loss})");
                return FitnessScores::sentinel(FitnessStatus::Diverged);
            }
            Err(err) => {
                warn!("fitness of {params}: training failed: {err}");
                return FitnessScores::sentinel(FitnessStatus::Diverged);
            }
        };

        let predictions = match outcome.model.forward(&val_part.features) {
            Ok(p) => p,
            Err(err) => {
                warn!("fitness of {params}: validation forward failed: {err}");
                return FitnessScores::sentinel(FitnessStatus::Diverged);
            }
        };
        let errors: Vec<f64> = predictions
            .iter()
            .zip(&val_part.labels)
            .map(|(p, &y)| p - f64::from(y))
            .collect();
        let rmse = match metrics::rmse(&errors) {
            Ok(v) if v.is_finite() => v,
            _ => {
                warn!("fitness of {params}: validation RMSE is not finite");
                return FitnessScores::sentinel(FitnessStatus::Diverged);
            }
        };
        let rhs = metrics::rhs(&errors).unwrap_or(f64::INFINITY);
        FitnessScores {
            rmse,
            rhs,
            status: FitnessStatus::Ok,
        }
    }

    /// Like [`FitnessEvaluator::evaluate`], but rejects candidates outside
    /// `bounds` instead of scoring them.
    pub fn evaluate_bounded(
        &self,
        params: DataParams,
        bounds: &SearchBounds,
    ) -> Result<FitnessScores> {
        if !bounds.contains(params) {
            return Err(Error::OutOfBounds { candidate: params });
        }
        Ok(self.evaluate(params))
    }
}
