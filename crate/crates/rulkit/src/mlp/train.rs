//! Mini-batch training with Adam or plain SGD.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::mlp::{Gradients, MlpModel};
use crate::windowing::WindowedDataset;

/// Parameter update rule. Adam is the default; SGD is kept for comparison
/// runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::default()),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::InvalidTrainConfig(format!(
                "unknown optimizer `{other}` (expected adam or sgd)"
            ))),
        }
    }
}

/// Knobs of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Seed for the per-epoch row shuffle.
    pub shuffle_seed: u64,
    /// Fraction of engines (not rows) held out for validation when
    /// [`train`] splits internally. Zero disables validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 512,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            shuffle_seed: 0,
            validation_fraction: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidTrainConfig(
                "epochs must be at least 1".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidTrainConfig(
                "batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidTrainConfig(
                "learning rate must be positive and finite".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidTrainConfig(
                "validation fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Loss and validation trajectory of one epoch. The training loss is the
/// mean over batch losses, each of which includes the full penalty term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_rmse: Option<f64>,
}

/// A trained model plus its per-epoch history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: Vec<EpochStats>,
}

fn filter_rows(data: &WindowedDataset, keep: impl Fn(usize) -> bool) -> WindowedDataset {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut engine_index = Vec::new();
    for i in 0..data.rows() {
        if keep(i) {
            features.extend_from_slice(data.row(i));
            labels.push(data.labels[i]);
            engine_index.push(data.engine_index[i]);
        }
    }
    WindowedDataset {
        width: data.width,
        features,
        labels,
        engine_index,
        skipped_engines: data.skipped_engines.clone(),
    }
}

/// Splits windowed rows into train and validation parts by engine, so no
/// engine contributes rows to both sides. The last `fraction` of engines (in
/// dataset order, at least one when the fraction is positive) form the
/// validation part.
pub fn split_by_engine(
    data: &WindowedDataset,
    fraction: f64,
) -> Result<(WindowedDataset, WindowedDataset)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidTrainConfig(
            "validation fraction must lie in [0, 1)".into(),
        ));
    }
    let mut engine_order: Vec<u32> = Vec::new();
    for &id in &data.engine_index {
        if engine_order.last() != Some(&id) && !engine_order.contains(&id) {
            engine_order.push(id);
        }
    }
    let engine_total = engine_order.len();
    let val_engines = if fraction == 0.0 {
        0
    } else {
        ((engine_total as f64 * fraction).floor() as usize).max(1)
    };
    if val_engines >= engine_total && fraction > 0.0 {
        return Err(Error::InvalidTrainConfig(format!(
            "validation split of {fraction} leaves no training engines (have {engine_total})"
        )));
    }
    let val_set: std::collections::HashSet<u32> = engine_order[engine_total - val_engines..]
        .iter()
        .copied()
        .collect();
    let train = filter_rows(data, |i| !val_set.contains(&data.engine_index[i]));
    let val = filter_rows(data, |i| val_set.contains(&data.engine_index[i]));
    Ok((train, val))
}

struct AdamState {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    fn new(model: &MlpModel) -> AdamState {
        AdamState {
            m_w: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            step: 0,
        }
    }
}

#[derive(Clone, Copy)]
struct AdamStep {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bc1: f64,
    bc2: f64,
}

fn adam_update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], s: AdamStep) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
        let m_hat = m[i] / s.bc1;
        let v_hat = v[i] / s.bc2;
        params[i] -= s.lr * m_hat / (v_hat.sqrt() + s.epsilon);
    }
}

fn apply_step(
    model: &mut MlpModel,
    grads: &Gradients,
    config: &TrainConfig,
    adam: &mut Option<AdamState>,
) {
    match (config.optimizer, adam) {
        (
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            },
            Some(state),
        ) => {
            state.step += 1;
            let step = AdamStep {
                lr: config.learning_rate,
                beta1,
                beta2,
                epsilon,
                bc1: 1.0 - beta1.powi(state.step as i32),
                bc2: 1.0 - beta2.powi(state.step as i32),
            };
            for l in 0..model.weights.len() {
                adam_update(
                    &mut model.weights[l],
                    &grads.weights[l],
                    &mut state.m_w[l],
                    &mut state.v_w[l],
                    step,
                );
                adam_update(
                    &mut model.biases[l],
                    &grads.biases[l],
                    &mut state.m_b[l],
                    &mut state.v_b[l],
                    step,
                );
            }
        }
        (OptimizerKind::Sgd, _) => {
            for l in 0..model.weights.len() {
                for (w, g) in model.weights[l].iter_mut().zip(&grads.weights[l]) {
                    *w -= config.learning_rate * g;
                }
                for (b, g) in model.biases[l].iter_mut().zip(&grads.biases[l]) {
                    *b -= config.learning_rate * g;
                }
            }
        }
        (OptimizerKind::Adam { .. }, None) => unreachable!("adam state initialized before loop"),
    }
}

/// Trains a copy of `model` on `data`, splitting off a validation part per
/// `config.validation_fraction` first.
pub fn train(
    model: &MlpModel,
    data: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if config.validation_fraction > 0.0 {
        let (train_part, val_part) = split_by_engine(data, config.validation_fraction)?;
        train_with_validation(model, &train_part, Some(&val_part), config)
    } else {
        train_with_validation(model, data, None, config)
    }
}

/// Trains a copy of `model` on `train_data`, optionally tracking RMSE on an
/// explicit validation set after each epoch. The input model is left
/// untouched; the returned copy holds the trained parameters.
pub fn train_with_validation(
    model: &MlpModel,
    train_data: &WindowedDataset,
    validation: Option<&WindowedDataset>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::InvalidTrainConfig("training set has no rows".into()));
    }
    if train_data.width != model.input_width() {
        return Err(Error::WidthMismatch {
            expected: model.input_width(),
            got: train_data.width,
        });
    }

    let mut model = model.clone();
    let labels = train_data.labels_f64();
    let width = train_data.width;
    let rows = train_data.rows();

    let mut adam = match config.optimizer {
        OptimizerKind::Adam { .. } => Some(AdamState::new(&model)),
        OptimizerKind::Sgd => None,
    };

    let mut order: Vec<usize> = (0..rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut history = Vec::with_capacity(config.epochs);

    let mut batch_features = Vec::with_capacity(config.batch_size * width);
    let mut batch_labels = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            batch_features.clear();
            batch_labels.clear();
            for &i in chunk {
                batch_features.extend_from_slice(train_data.row(i));
                batch_labels.push(labels[i]);
            }
            let activations = model.forward_full(&batch_features, chunk.len());
            let predictions = activations.last().expect("at least one layer");
            let batch_loss = MlpModel::mse(predictions, &batch_labels) + model.penalty();
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: batch_loss,
                });
            }
            loss_sum += batch_loss;
            batches += 1;
            let grads = model.backward(&batch_features, chunk.len(), &activations, &batch_labels);
            apply_step(&mut model, &grads, config, &mut adam);
        }

        let val_rmse = match validation {
            Some(val) if !val.is_empty() => {
                let predictions = model.forward(&val.features)?;
                let errors: Vec<f64> = predictions
                    .iter()
                    .zip(&val.labels)
                    .map(|(p, &y)| p - f64::from(y))
                    .collect();
                Some(metrics::rmse(&errors)?)
            }
            _ => None,
        };

        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_rmse,
        });
    }

    Ok(TrainOutcome { model, history })
}
