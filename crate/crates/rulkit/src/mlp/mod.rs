//! From-scratch fully-connected regressor.
//!
//! Dense layers with ReLU or linear activations, trained by mini-batch
//! gradient descent on mean squared error plus per-layer L1/L2 penalties.
//! Everything is `f64` and plain `Vec` floats; there is no external linear
//! algebra dependency, which keeps the arithmetic bit-reproducible across
//! runs with equal seeds.

mod check;
mod io;
mod train;

pub use check::{gradient_check, GradientCheckReport};
pub use train::{
    split_by_engine, train, train_with_validation, EpochStats, OptimizerKind, TrainConfig,
    TrainOutcome,
};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation applied elementwise after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed in terms of the activation output. For ReLU the
    /// subgradient at zero is taken as zero.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

/// One dense layer: output width, activation, and penalty coefficients
/// applied to this layer's weights and biases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    pub l1: f64,
    pub l2: f64,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation, l1: f64, l2: f64) -> LayerSpec {
        LayerSpec {
            width,
            activation,
            l1,
            l2,
        }
    }
}

/// Default penalty coefficients used by the built-in presets.
pub const DEFAULT_L1: f64 = 0.1;
pub const DEFAULT_L2: f64 = 0.2;

/// The preset used when no architecture is chosen explicitly.
pub const DEFAULT_PRESET: u8 = 1;

/// Hidden widths of the six built-in presets. Every preset ends in a linear
/// output of width 1.
const PRESET_HIDDEN: [&[usize]; 6] = [&[20, 20], &[50, 20], &[100, 50], &[250, 50], &[20], &[10]];

/// Layer specs of built-in preset `preset` (1..=6) with the given penalties.
pub fn preset_layers(preset: u8, l1: f64, l2: f64) -> Result<Vec<LayerSpec>> {
    if preset < 1 || preset as usize > PRESET_HIDDEN.len() {
        return Err(Error::UnknownArchitecture(preset));
    }
    let mut layers: Vec<LayerSpec> = PRESET_HIDDEN[preset as usize - 1]
        .iter()
        .map(|&w| LayerSpec::new(w, Activation::Relu, l1, l2))
        .collect();
    layers.push(LayerSpec::new(1, Activation::Linear, l1, l2));
    Ok(layers)
}

/// The default regressor: two ReLU layers of 20 units and a linear output.
pub fn default_layers() -> Vec<LayerSpec> {
    preset_layers(DEFAULT_PRESET, DEFAULT_L1, DEFAULT_L2).expect("preset 1 exists")
}

/// Per-layer parameter gradients, same shapes as the model's weights and
/// biases.
#[derive(Debug, Clone)]
pub(crate) struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// A fully-connected regressor. Weights of layer `l` are stored row-major as
/// `w[input * width + output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) input_width: usize,
    pub(crate) specs: Vec<LayerSpec>,
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
    pub(crate) seed: u64,
}

impl MlpModel {
    /// Builds a model with scaled-uniform weight initialization: layer
    /// weights are drawn from `±sqrt(6 / (fan_in + fan_out))`, biases start
    /// at zero. The same seed always yields the same parameters.
    pub fn build(input_width: usize, specs: Vec<LayerSpec>, seed: u64) -> Result<MlpModel> {
        if input_width == 0 {
            return Err(Error::InvalidLayer("input width must be positive".into()));
        }
        if specs.is_empty() {
            return Err(Error::InvalidLayer("at least one layer is required".into()));
        }
        for (l, spec) in specs.iter().enumerate() {
            if spec.width == 0 {
                return Err(Error::InvalidLayer(format!("layer {l} has width 0")));
            }
            if spec.l1 < 0.0 || spec.l2 < 0.0 {
                return Err(Error::InvalidLayer(format!(
                    "layer {l} has a negative penalty coefficient"
                )));
            }
        }
        let last = specs.last().expect("non-empty");
        if last.width != 1 || last.activation != Activation::Linear {
            return Err(Error::InvalidLayer(
                "output layer must be linear with width 1".into(),
            ));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(specs.len());
        let mut biases = Vec::with_capacity(specs.len());
        let mut fan_in = input_width;
        for spec in &specs {
            let bound = (6.0 / (fan_in + spec.width) as f64).sqrt();
            let layer: Vec<f64> = (0..fan_in * spec.width)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            weights.push(layer);
            biases.push(vec![0.0; spec.width]);
            fan_in = spec.width;
        }

        Ok(MlpModel {
            input_width,
            specs,
            weights,
            biases,
            seed,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn layer_specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Seed the parameters were initialized from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn fan_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_width
        } else {
            self.specs[layer - 1].width
        }
    }

    fn check_features(&self, features: &[f64]) -> Result<usize> {
        if self.input_width == 0 || !features.len().is_multiple_of(self.input_width) {
            return Err(Error::WidthMismatch {
                expected: self.input_width,
                got: features.len(),
            });
        }
        Ok(features.len() / self.input_width)
    }

    /// Runs the batch through every layer, returning post-activation values
    /// per layer. The last entry holds the predictions.
    pub(crate) fn forward_full(&self, features: &[f64], rows: usize) -> Vec<Vec<f64>> {
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.specs.len());
        for (l, spec) in self.specs.iter().enumerate() {
            let input: &[f64] = if l == 0 {
                features
            } else {
                &activations[l - 1]
            };
            let fan_in = self.fan_in(l);
            let width = spec.width;
            let weights = &self.weights[l];
            let biases = &self.biases[l];
            let mut out = vec![0.0; rows * width];
            for r in 0..rows {
                let in_row = &input[r * fan_in..(r + 1) * fan_in];
                let out_row = &mut out[r * width..(r + 1) * width];
                out_row.copy_from_slice(biases);
                for (i, &x) in in_row.iter().enumerate() {
                    let w_row = &weights[i * width..(i + 1) * width];
                    for (o, &w) in out_row.iter_mut().zip(w_row) {
                        *o += x * w;
                    }
                }
                if spec.activation != Activation::Linear {
                    for o in out_row.iter_mut() {
                        *o = spec.activation.apply(*o);
                    }
                }
            }
            activations.push(out);
        }
        activations
    }

    /// Predicts one output per feature row. Each row is processed
    /// independently, so predictions do not depend on how rows are batched.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        let rows = self.check_features(features)?;
        if rows == 0 {
            return Ok(Vec::new());
        }
        let mut activations = self.forward_full(features, rows);
        Ok(activations.pop().expect("at least one layer"))
    }

    /// Sum of the per-layer penalties: `l1 * (sum|w| + sum|b|) +
    /// l2 * (sum w^2 + sum b^2)`. Added once per loss evaluation, not scaled
    /// by batch size.
    pub(crate) fn penalty(&self) -> f64 {
        let mut total = 0.0;
        for (l, spec) in self.specs.iter().enumerate() {
            let mut abs = 0.0;
            let mut sq = 0.0;
            for &w in &self.weights[l] {
                abs += w.abs();
                sq += w * w;
            }
            for &b in &self.biases[l] {
                abs += b.abs();
                sq += b * b;
            }
            total += spec.l1 * abs + spec.l2 * sq;
        }
        total
    }

    /// Training objective on a batch: mean squared error plus penalties.
    pub fn loss(&self, features: &[f64], labels: &[f64]) -> Result<f64> {
        let rows = self.check_features(features)?;
        if rows == 0 {
            return Err(Error::EmptyMetricInput);
        }
        if labels.len() != rows {
            return Err(Error::WidthMismatch {
                expected: rows,
                got: labels.len(),
            });
        }
        let activations = self.forward_full(features, rows);
        let predictions = activations.last().expect("at least one layer");
        Ok(Self::mse(predictions, labels) + self.penalty())
    }

    pub(crate) fn mse(predictions: &[f64], labels: &[f64]) -> f64 {
        let m = labels.len() as f64;
        predictions
            .iter()
            .zip(labels)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / m
    }

    /// Backpropagation for the loss in [`MlpModel::loss`], reusing the
    /// activations from [`MlpModel::forward_full`] on the same batch.
    pub(crate) fn backward(
        &self,
        features: &[f64],
        rows: usize,
        activations: &[Vec<f64>],
        labels: &[f64],
    ) -> Gradients {
        let layer_count = self.specs.len();
        let m = rows as f64;

        let predictions = activations.last().expect("at least one layer");
        let mut delta: Vec<f64> = predictions
            .iter()
            .zip(labels)
            .map(|(p, y)| 2.0 * (p - y) / m)
            .collect();

        let mut grad_w: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();

        for l in (0..layer_count).rev() {
            let spec = &self.specs[l];
            let width = spec.width;
            let fan_in = self.fan_in(l);
            let below: &[f64] = if l == 0 {
                features
            } else {
                &activations[l - 1]
            };

            let dw = &mut grad_w[l];
            let db = &mut grad_b[l];
            for r in 0..rows {
                let d_row = &delta[r * width..(r + 1) * width];
                let in_row = &below[r * fan_in..(r + 1) * fan_in];
                for (i, &x) in in_row.iter().enumerate() {
                    let dw_row = &mut dw[i * width..(i + 1) * width];
                    for (g, &d) in dw_row.iter_mut().zip(d_row) {
                        *g += x * d;
                    }
                }
                for (g, &d) in db.iter_mut().zip(d_row) {
                    *g += d;
                }
            }
            for (g, &w) in dw.iter_mut().zip(&self.weights[l]) {
                *g += spec.l1 * sign(w) + 2.0 * spec.l2 * w;
            }
            for (g, &b) in db.iter_mut().zip(&self.biases[l]) {
                *g += spec.l1 * sign(b) + 2.0 * spec.l2 * b;
            }

            if l > 0 {
                let weights = &self.weights[l];
                let prev_activation = self.specs[l - 1].activation;
                let mut prev_delta = vec![0.0; rows * fan_in];
                for r in 0..rows {
                    let d_row = &delta[r * width..(r + 1) * width];
                    let a_row = &below[r * fan_in..(r + 1) * fan_in];
                    let out_row = &mut prev_delta[r * fan_in..(r + 1) * fan_in];
                    for i in 0..fan_in {
                        let w_row = &weights[i * width..(i + 1) * width];
                        let mut sum = 0.0;
                        for (&w, &d) in w_row.iter().zip(d_row) {
                            sum += w * d;
                        }
                        out_row[i] = sum * prev_activation.derivative_from_output(a_row[i]);
                    }
                }
                delta = prev_delta;
            }
        }

        Gradients {
            weights: grad_w,
            biases: grad_b,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// A 2-input single-layer model with hand-set parameters:
    /// prediction = 0.5 * x0 - 1.0 * x1 + 2.0.
    fn hand_model(l1: f64, l2: f64) -> MlpModel {
        let mut model =
            MlpModel::build(2, vec![LayerSpec::new(1, Activation::Linear, l1, l2)], 0).unwrap();
        model.weights[0] = vec![0.5, -1.0];
        model.biases[0] = vec![2.0];
        model
    }

    #[test]
    fn forward_matches_hand_computation() {
        let model = hand_model(0.0, 0.0);
        let out = model.forward(&[3.0, 4.0, 1.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.5 * 3.0 - 4.0 + 2.0, 0.5 + 2.0]);
    }

    #[test]
    fn relu_zeroes_negative_preactivations() {
        let mut model = MlpModel::build(
            1,
            vec![
                LayerSpec::new(2, Activation::Relu, 0.0, 0.0),
                LayerSpec::new(1, Activation::Linear, 0.0, 0.0),
            ],
            0,
        )
        .unwrap();
        model.weights[0] = vec![1.0, -1.0];
        model.biases[0] = vec![0.0, 0.0];
        model.weights[1] = vec![1.0, 1.0];
        model.biases[1] = vec![0.0];
        // x = 2: hidden = [2, max(0,-2)=0], output 2. x = -3: hidden = [0, 3].
        assert_eq!(model.forward(&[2.0]).unwrap(), vec![2.0]);
        assert_eq!(model.forward(&[-3.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn loss_adds_penalties_once_per_evaluation() {
        let model = hand_model(0.1, 0.2);
        // Perfect prediction at x = (0, 0): pred = 2, label = 2, mse = 0.
        // l1: 0.1 * (0.5 + 1 + 2) = 0.35; l2: 0.2 * (0.25 + 1 + 4) = 1.05.
        let loss = model.loss(&[0.0, 0.0], &[2.0]).unwrap();
        assert!((loss - 1.4).abs() < 1e-12);
        // The penalty does not scale with batch size.
        let loss2 = model.loss(&[0.0, 0.0, 0.0, 0.0], &[2.0, 2.0]).unwrap();
        assert!((loss2 - 1.4).abs() < 1e-12);
    }

    #[test]
    fn parameter_count_sums_layer_shapes() {
        let model = MlpModel::build(336, default_layers(), 0).unwrap();
        // 336*20+20 + 20*20+20 + 20*1+1
        assert_eq!(model.parameter_count(), 7181);
        let small = MlpModel::build(4, preset_layers(5, 0.1, 0.2).unwrap(), 0).unwrap();
        // 4*20+20 + 20*1+1
        assert_eq!(small.parameter_count(), 121);
    }

    #[test]
    fn presets_cover_six_architectures_and_end_linear() {
        for preset in 1..=6u8 {
            let layers = preset_layers(preset, 0.1, 0.2).unwrap();
            let last = layers.last().unwrap();
            assert_eq!(last.width, 1);
            assert_eq!(last.activation, Activation::Linear);
            for hidden in &layers[..layers.len() - 1] {
                assert_eq!(hidden.activation, Activation::Relu);
            }
        }
        assert!(matches!(
            preset_layers(0, 0.1, 0.2),
            Err(Error::UnknownArchitecture(0))
        ));
        assert!(matches!(
            preset_layers(7, 0.1, 0.2),
            Err(Error::UnknownArchitecture(7))
        ));
        assert_eq!(default_layers(), preset_layers(1, 0.1, 0.2).unwrap());
    }

    #[test]
    fn build_rejects_malformed_specs() {
        let linear_out = LayerSpec::new(1, Activation::Linear, 0.1, 0.2);
        assert!(MlpModel::build(0, vec![linear_out], 0).is_err());
        assert!(MlpModel::build(4, vec![], 0).is_err());
        assert!(MlpModel::build(
            4,
            vec![LayerSpec::new(0, Activation::Relu, 0.1, 0.2), linear_out],
            0
        )
        .is_err());
        assert!(
            MlpModel::build(4, vec![LayerSpec::new(2, Activation::Linear, 0.1, 0.2)], 0).is_err()
        );
        assert!(
            MlpModel::build(4, vec![LayerSpec::new(1, Activation::Relu, 0.1, 0.2)], 0).is_err()
        );
        assert!(
            MlpModel::build(4, vec![LayerSpec::new(1, Activation::Linear, -0.1, 0.2)], 0).is_err()
        );
    }

    #[test]
    fn initialization_is_seeded_and_bounded() {
        let layers = default_layers();
        let a = MlpModel::build(10, layers.clone(), 42).unwrap();
        let b = MlpModel::build(10, layers.clone(), 42).unwrap();
        let c = MlpModel::build(10, layers, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let bound0 = (6.0_f64 / (10.0 + 20.0)).sqrt();
        assert!(a.weights[0].iter().all(|w| w.abs() < bound0));
        assert!(a.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn forward_rejects_mismatched_width() {
        let model = hand_model(0.0, 0.0);
        assert!(matches!(
            model.forward(&[1.0, 2.0, 3.0]),
            Err(Error::WidthMismatch {
                expected: 2,
                got: 3
            })
        ));
        assert!(model.loss(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn forward_of_empty_batch_is_empty() {
        let model = hand_model(0.0, 0.0);
        assert!(model.forward(&[]).unwrap().is_empty());
        assert!(model.loss(&[], &[]).is_err());
    }

    proptest! {
        /// Predictions are computed row by row, so batching cannot change
        /// them.
        #[test]
        fn forward_is_invariant_to_batch_partitioning(
            seed in 0u64..50,
            rows in 1usize..12,
            values in proptest::collection::vec(-3.0f64..3.0, 12 * 5)
        ) {
            let model = MlpModel::build(5, default_layers(), seed).unwrap();
            let features = &values[..rows * 5];
            let all = model.forward(features).unwrap();
            for r in 0..rows {
                let one = model.forward(&features[r * 5..(r + 1) * 5]).unwrap();
                prop_assert_eq!(one[0], all[r]);
            }
        }
    }
}
