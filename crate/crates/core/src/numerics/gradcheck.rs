//! Finite-difference gradient oracle and the layer-kind check suite.
//!
//! The oracle perturbs each parameter in turn and evaluates the loss twice,
//! so it shares no code with the reverse-mode sweep it validates.

use super::layer::{LayerSpec, Padding};
use super::loss::{mse_loss, mse_loss_grad};
use super::model::{conv_spec, Gradients, Model, Phase};
use super::tensor::Tensor;
use super::NumericsError;
use crate::rng::{derive_seed, rng_from_seed};
use rand::Rng as _;

/// Central finite differences of a scalar function, elementwise:
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)`.
pub fn finite_difference_gradient<F>(
    mut f: F,
    x: &Tensor,
    eps: f64,
) -> Result<Tensor, NumericsError>
where
    F: FnMut(&Tensor) -> Result<f64, NumericsError>,
{
    let mut grad = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * eps);
    }
    Ok(grad)
}

/// Relative error used by every gradient check: `|a - b| / max(|a|, |b|, 1)`.
/// The unit clamp turns the comparison into an absolute check for gradients
/// below 1 in magnitude, where central-difference noise dominates.
pub fn gradient_relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Outcome of one backprop-vs-finite-differences comparison.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (layer index, worst relative error in that layer)
    pub per_layer: Vec<(usize, f64)>,
}

/// Loss of a model on a single (input, target) pair under the given phase.
pub fn model_loss(
    model: &Model,
    input: &Tensor,
    target: &Tensor,
    phase: Phase,
) -> Result<f64, NumericsError> {
    let acts = model.forward(input, phase)?;
    mse_loss(acts.output(), target)
}

/// Backprop gradients of the model loss for a single pair.
pub fn model_gradients(
    model: &Model,
    input: &Tensor,
    target: &Tensor,
    phase: Phase,
) -> Result<(f64, Gradients), NumericsError> {
    let acts = model.forward(input, phase)?;
    let (loss, grad_out) = mse_loss_grad(acts.output(), target)?;
    let (grads, _) = model.backward(&acts, &grad_out)?;
    Ok((loss, grads))
}

/// Compares reverse-mode gradients against central finite differences over
/// every parameter of the model.
///
/// The phase must make the loss deterministic: either `Infer`, or `Train`
/// with a fixed dropout seed (the mask is then identical on every
/// evaluation, which is exactly what makes dropout checkable).
pub fn gradient_check(
    model: &Model,
    input: &Tensor,
    target: &Tensor,
    phase: Phase,
    eps: f64,
) -> Result<GradCheckReport, NumericsError> {
    let (_, analytic) = model_gradients(model, input, target, phase)?;
    let mut probe = model.clone();
    let mut per_layer = Vec::new();
    let mut max_rel = 0.0f64;

    for idx in 0..model.layers.len() {
        let Some(layer_grads) = analytic.per_layer[idx].as_ref() else {
            continue;
        };
        let mut layer_worst = 0.0f64;
        for part in 0..2 {
            let n = if part == 0 {
                model.layers[idx].weights.len()
            } else {
                model.layers[idx].bias.len()
            };
            for i in 0..n {
                let read = |m: &Model| {
                    if part == 0 {
                        m.layers[idx].weights.data()[i]
                    } else {
                        m.layers[idx].bias.data()[i]
                    }
                };
                let orig = read(&probe);
                set_param(&mut probe, idx, part, i, orig + eps);
                let plus = model_loss(&probe, input, target, phase)?;
                set_param(&mut probe, idx, part, i, orig - eps);
                let minus = model_loss(&probe, input, target, phase)?;
                set_param(&mut probe, idx, part, i, orig);
                let fd = (plus - minus) / (2.0 * eps);
                let bp = if part == 0 {
                    layer_grads.weights.data()[i]
                } else {
                    layer_grads.bias.data()[i]
                };
                layer_worst = layer_worst.max(gradient_relative_error(bp, fd));
            }
        }
        per_layer.push((idx, layer_worst));
        max_rel = max_rel.max(layer_worst);
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        per_layer,
    })
}

fn set_param(model: &mut Model, layer: usize, part: usize, i: usize, value: f64) {
    let t = if part == 0 {
        &mut model.layers[layer].weights
    } else {
        &mut model.layers[layer].bias
    };
    t.data_mut()[i] = value;
}

/// One entry of the layer-kind suite.
#[derive(Debug, Clone)]
pub struct SuiteCase {
    pub kind: &'static str,
    pub seed: u64,
    pub max_rel_error: f64,
}

/// Small randomized model per layer kind, instantiated per seed, checked
/// against finite differences. Extents stay at or below 8 so the
/// parameter-by-parameter oracle runs in milliseconds.
pub fn layer_kind_suite(seeds: &[u64], eps: f64) -> Result<Vec<SuiteCase>, NumericsError> {
    let kinds: &[(&'static str, fn() -> (Vec<LayerSpec>, [usize; 3]))] = &[
        ("conv2d", suite_conv),
        ("dense", suite_dense),
        ("relu", suite_relu),
        ("dropout", suite_dropout),
        ("residual_add", suite_residual),
        ("flatten", suite_flatten),
    ];
    let mut out = Vec::new();
    for (kind, build) in kinds {
        for &seed in seeds {
            let (specs, input_shape) = build();
            let mut model = Model::build(input_shape, specs)?;
            model.init_weights(seed);
            let mut rng = rng_from_seed(derive_seed(seed, 0xdead));
            let input = random_tensor(&input_shape, &mut rng);
            let out_len = model.output_shape().iter().product::<usize>();
            let target = Tensor::from_vec(
                &[out_len],
                (0..out_len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )?;
            // Dropout needs a live mask to be exercised; a fixed seed keeps
            // the loss deterministic so finite differences stay valid.
            let phase = if *kind == "dropout" {
                Phase::Train {
                    dropout_seed: derive_seed(seed, 0xd0),
                }
            } else {
                Phase::Infer
            };
            let report = gradient_check(&model, &input, &target, phase, eps)?;
            out.push(SuiteCase {
                kind,
                seed,
                max_rel_error: report.max_rel_error,
            });
        }
    }
    Ok(out)
}

fn random_tensor(shape: &[usize], rng: &mut crate::rng::Rng) -> Tensor {
    let len = shape.iter().product();
    // Offset away from zero keeps ReLU kinks clear of the probe radius.
    Tensor::from_vec(
        shape,
        (0..len)
            .map(|_| {
                let v: f64 = rng.gen_range(0.05..1.0);
                if rng.gen::<bool>() {
                    v
                } else {
                    -v
                }
            })
            .collect(),
    )
    .unwrap()
}

fn suite_conv() -> (Vec<LayerSpec>, [usize; 3]) {
    (
        vec![
            conv_spec((3, 3), 2, 3, (1, 1), Padding::Same),
            conv_spec((1, 3), 3, 2, (1, 2), Padding::Same),
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 4 * 2 * 2,
                outputs: 2,
            },
        ],
        [4, 4, 2],
    )
}

fn suite_dense() -> (Vec<LayerSpec>, [usize; 3]) {
    (
        vec![
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 8,
                outputs: 5,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: 5,
                outputs: 2,
            },
        ],
        [2, 2, 2],
    )
}

fn suite_relu() -> (Vec<LayerSpec>, [usize; 3]) {
    (
        vec![
            conv_spec((1, 1), 2, 4, (1, 1), Padding::Valid),
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 3 * 3 * 4,
                outputs: 2,
            },
        ],
        [3, 3, 2],
    )
}

fn suite_dropout() -> (Vec<LayerSpec>, [usize; 3]) {
    (
        vec![
            conv_spec((1, 3), 2, 3, (1, 1), Padding::Same),
            LayerSpec::Dropout { rate: 0.3 },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 2 * 4 * 3,
                outputs: 2,
            },
        ],
        [2, 4, 2],
    )
}

fn suite_residual() -> (Vec<LayerSpec>, [usize; 3]) {
    (
        vec![
            conv_spec((3, 3), 2, 3, (1, 1), Padding::Same), // 0
            LayerSpec::Relu,                                // 1
            conv_spec((3, 3), 3, 3, (1, 1), Padding::Same), // 2
            LayerSpec::ResidualAdd { source: 1 },           // 3
            LayerSpec::Relu,                                // 4
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 4 * 4 * 3,
                outputs: 2,
            },
        ],
        [4, 4, 2],
    )
}

fn suite_flatten() -> (Vec<LayerSpec>, [usize; 3]) {
    (
        vec![
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 2 * 3 * 2,
                outputs: 2,
            },
        ],
        [2, 3, 2],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_of_square_is_two_x() {
        let x = Tensor::from_vec(&[1], vec![3.0]).unwrap();
        let g = finite_difference_gradient(|t| Ok(t.data()[0] * t.data()[0]), &x, 1e-5).unwrap();
        assert!((g.data()[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn fd_of_constant_is_zero() {
        let x = Tensor::from_vec(&[4], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let g = finite_difference_gradient(|_| Ok(42.0), &x, 1e-5).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fd_of_sum_of_squares_matches_analytic() {
        let mut rng = rng_from_seed(17);
        let x = Tensor::from_vec(&[8], (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let g = finite_difference_gradient(
            |t| Ok(t.data().iter().map(|v| v * v).sum()),
            &x,
            1e-5,
        )
        .unwrap();
        for (gi, xi) in g.data().iter().zip(x.data()) {
            assert!((gi - 2.0 * xi).abs() < 1e-6, "{gi} vs {}", 2.0 * xi);
        }
    }

    #[test]
    fn single_dense_layer_hand_derivative() {
        // y = w x with w = 1, x = 2, target 0: L = (y - t)^2, dL/dw = 8.
        let mut model = Model::build(
            [1, 1, 1],
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: 1,
                    outputs: 1,
                },
            ],
        )
        .unwrap();
        model.layers[1].weights.data_mut()[0] = 1.0;
        let input = Tensor::from_vec(&[1, 1, 1], vec![2.0]).unwrap();
        let target = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let (loss, grads) = model_gradients(&model, &input, &target, Phase::Infer).unwrap();
        assert_eq!(loss, 4.0);
        let g = grads.per_layer[1].as_ref().unwrap();
        assert_eq!(g.weights.data()[0], 8.0);
    }

    #[test]
    fn frozen_layer_still_gets_a_gradient() {
        let mut model = Model::build(
            [1, 1, 2],
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: 2,
                    outputs: 2,
                },
            ],
        )
        .unwrap();
        model.init_weights(1);
        model.layers[1].frozen = true;
        let input = Tensor::from_vec(&[1, 1, 2], vec![1.0, -1.0]).unwrap();
        let target = Tensor::from_vec(&[2], vec![0.5, 0.5]).unwrap();
        let (_, grads) = model_gradients(&model, &input, &target, Phase::Infer).unwrap();
        // Gradient present even for the frozen layer; the optimizer decides.
        assert!(grads.per_layer[1].is_some());
    }

    #[test]
    fn random_conv_net_passes_fd_check() {
        let (specs, shape) = suite_conv();
        let mut model = Model::build(shape, specs).unwrap();
        model.init_weights(23);
        let mut rng = rng_from_seed(99);
        let input = random_tensor(&shape, &mut rng);
        let target = Tensor::from_vec(&[2], vec![0.3, -0.2]).unwrap();
        let report = gradient_check(&model, &input, &target, Phase::Infer, 1e-5).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "max rel error {}",
            report.max_rel_error
        );
    }

    #[test]
    fn layer_kind_suite_two_seeds() {
        for case in layer_kind_suite(&[1, 2], 1e-5).unwrap() {
            assert!(
                case.max_rel_error < 1e-4,
                "{} seed {} -> {}",
                case.kind,
                case.seed,
                case.max_rel_error
            );
        }
    }
}
