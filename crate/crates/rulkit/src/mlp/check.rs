//! Finite-difference verification of the analytic gradient.

use crate::error::Result;
use crate::mlp::MlpModel;

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradientCheckReport {
    /// Worst relative disagreement over every parameter.
    pub max_relative_error: f64,
    /// Number of parameters compared.
    pub checked: usize,
}

fn relative_error(numeric: f64, analytic: f64) -> f64 {
    let denom = (numeric.abs() + analytic.abs()).max(1e-8);
    (numeric - analytic).abs() / denom
}

/// Compares the backpropagated gradient of the training loss against central
/// finite differences, parameter by parameter, on the given batch.
///
/// ReLU and the L1 penalty are only piecewise differentiable, so parameters
/// within `10 * epsilon` of zero are first nudged to that magnitude; the
/// check then runs at the perturbed point, where both loss evaluations sit on
/// the same side of the kink.
pub fn gradient_check(
    model: &MlpModel,
    features: &[f64],
    labels: &[f64],
    epsilon: f64,
) -> Result<GradientCheckReport> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut model = model.clone();
    let floor = 10.0 * epsilon;
    for layer in model.weights.iter_mut().chain(model.biases.iter_mut()) {
        for value in layer.iter_mut() {
            if value.abs() < floor {
                *value = if *value < 0.0 { -floor } else { floor };
            }
        }
    }

    let rows = features.len() / model.input_width();
    let activations = model.forward_full(features, rows);
    let analytic = model.backward(features, rows, &activations, labels);

    let mut max_relative_error: f64 = 0.0;
    let mut checked = 0;
    let layer_count = model.specs.len();
    for l in 0..layer_count {
        for (is_bias, count) in [
            (false, model.weights[l].len()),
            (true, model.biases[l].len()),
        ] {
            for k in 0..count {
                let read = |m: &MlpModel| {
                    if is_bias {
                        m.biases[l][k]
                    } else {
                        m.weights[l][k]
                    }
                };
                let original = read(&model);

                let write = |m: &mut MlpModel, v: f64| {
                    if is_bias {
                        m.biases[l][k] = v;
                    } else {
                        m.weights[l][k] = v;
                    }
                };
                write(&mut model, original + epsilon);
                let loss_plus = model.loss(features, labels)?;
                write(&mut model, original - epsilon);
                let loss_minus = model.loss(features, labels)?;
                write(&mut model, original);

                let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
                let reference = if is_bias {
                    analytic.biases[l][k]
                } else {
                    analytic.weights[l][k]
                };
                max_relative_error = max_relative_error.max(relative_error(numeric, reference));
                checked += 1;
            }
        }
    }

    Ok(GradientCheckReport {
        max_relative_error,
        checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{preset_layers, Activation, LayerSpec, MlpModel};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(input_width: usize, rows: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<f64> = (0..rows * input_width)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let labels: Vec<f64> = (0..rows).map(|_| rng.gen_range(0.0..130.0)).collect();
        (features, labels)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let layers = vec![
            LayerSpec::new(6, Activation::Relu, 0.1, 0.2),
            LayerSpec::new(1, Activation::Linear, 0.1, 0.2),
        ];
        let model = MlpModel::build(4, layers, 9).unwrap();
        let (features, labels) = random_batch(4, 8, 10);
        let report = gradient_check(&model, &features, &labels, 1e-5).unwrap();
        assert_eq!(report.checked, model.parameter_count());
        assert!(
            report.max_relative_error < 1e-5,
            "relative error {}",
            report.max_relative_error
        );
    }

    #[test]
    fn all_zero_parameters_are_nudged_off_the_kink() {
        let mut model = MlpModel::build(3, preset_layers(6, 0.1, 0.2).unwrap(), 0).unwrap();
        for layer in model.weights.iter_mut().chain(model.biases.iter_mut()) {
            layer.iter_mut().for_each(|w| *w = 0.0);
        }
        let (features, labels) = random_batch(3, 5, 2);
        let report = gradient_check(&model, &features, &labels, 1e-5).unwrap();
        assert!(
            report.max_relative_error < 1e-4,
            "relative error {}",
            report.max_relative_error
        );
    }

    #[test]
    fn deeper_nets_check_out_too() {
        let model = MlpModel::build(10, preset_layers(1, 0.1, 0.2).unwrap(), 4).unwrap();
        let (features, labels) = random_batch(10, 6, 5);
        let report = gradient_check(&model, &features, &labels, 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-5);
    }
}
