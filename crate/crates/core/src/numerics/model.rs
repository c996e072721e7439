//! Layered computation graph: a stack of layers with cached activations for
//! reverse-mode differentiation.

use super::layer::{self, LayerSpec, Padding};
use super::tensor::Tensor;
use super::NumericsError;
use crate::rng::{derive_seed, rng_from_seed};
use rand::Rng as _;

/// One instantiated layer: spec, parameters, and the freeze flag that
/// excludes it from optimizer updates.
#[derive(Debug, Clone)]
pub struct Layer {
    pub spec: LayerSpec,
    /// Conv kernels `[kh, kw, cin, cout]` or dense weights `[in, out]`;
    /// empty for parameterless kinds.
    pub weights: Tensor,
    /// `[cout]` / `[out]`; empty for parameterless kinds.
    pub bias: Tensor,
    pub frozen: bool,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Training / inference switch. Training mode carries the seed that makes
/// dropout masks reproducible.
#[derive(Debug, Clone, Copy)]
pub enum Phase {
    Train { dropout_seed: u64 },
    Infer,
}

/// Forward-pass cache: one activation per layer boundary plus the dropout
/// multiplier masks recorded for the backward pass.
pub struct Activations {
    /// `values[0]` is the input, `values[i + 1]` the output of layer `i`.
    pub values: Vec<Tensor>,
    pub dropout_masks: Vec<Option<Vec<f64>>>,
}

impl Activations {
    pub fn output(&self) -> &Tensor {
        self.values.last().expect("non-empty activations")
    }
}

/// Per-layer parameter gradients, aligned with `Model::layers`.
/// `None` for parameterless layers.
pub struct Gradients {
    pub per_layer: Vec<Option<LayerGrads>>,
}

pub struct LayerGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        let per_layer = model
            .layers
            .iter()
            .map(|l| {
                l.spec.has_params().then(|| LayerGrads {
                    weights: Tensor::zeros(l.weights.shape()),
                    bias: Tensor::zeros(l.bias.shape()),
                })
            })
            .collect();
        Gradients { per_layer }
    }

    /// Accumulates `other` into `self` elementwise.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.per_layer.iter_mut().zip(&other.per_layer) {
            if let (Some(a), Some(b)) = (a, b) {
                for (x, y) in a.weights.data_mut().iter_mut().zip(b.weights.data()) {
                    *x += y;
                }
                for (x, y) in a.bias.data_mut().iter_mut().zip(b.bias.data()) {
                    *x += y;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.per_layer.iter_mut().flatten() {
            for x in g.weights.data_mut() {
                *x *= factor;
            }
            for x in g.bias.data_mut() {
                *x *= factor;
            }
        }
    }
}

/// Ordered layer stack over a fixed `[rows, cols, channels]` input shape.
#[derive(Debug, Clone)]
pub struct Model {
    pub input_shape: [usize; 3],
    pub layers: Vec<Layer>,
    /// Activation shape at every boundary; `shapes[0]` is the input shape.
    shapes: Vec<Vec<usize>>,
}

impl Model {
    /// Builds the stack, running shape inference through every layer.
    /// Parameters start at zero; call [`Model::init_weights`] afterwards.
    pub fn build(input_shape: [usize; 3], specs: Vec<LayerSpec>) -> Result<Self, NumericsError> {
        let mut shapes: Vec<Vec<usize>> = vec![input_shape.to_vec()];
        let mut layers = Vec::with_capacity(specs.len());
        for (idx, spec) in specs.into_iter().enumerate() {
            spec.validate()
                .map_err(|e| NumericsError::Layer {
                    layer: idx,
                    kind: spec.kind_name(),
                    message: e.to_string(),
                })?;
            let cur = shapes.last().unwrap().clone();
            let (out_shape, weights, bias) = match &spec {
                LayerSpec::Conv2d {
                    kernel,
                    in_channels,
                    out_channels,
                    stride,
                    padding,
                } => {
                    if cur.len() != 3 || cur[2] != *in_channels {
                        return Err(NumericsError::Layer {
                            layer: idx,
                            kind: "conv2d",
                            message: format!(
                                "expected rank-3 input with {} channels, got {:?}",
                                in_channels, cur
                            ),
                        });
                    }
                    let geo = layer::conv_geometry(cur[0], cur[1], *kernel, *stride, *padding)
                        .map_err(|e| NumericsError::Layer {
                            layer: idx,
                            kind: "conv2d",
                            message: e.to_string(),
                        })?;
                    (
                        vec![geo.out_h, geo.out_w, *out_channels],
                        Tensor::zeros(&[kernel.0, kernel.1, *in_channels, *out_channels]),
                        Tensor::zeros(&[*out_channels]),
                    )
                }
                LayerSpec::Dense { inputs, outputs } => {
                    let flat: usize = cur.iter().product();
                    if cur.len() != 1 || flat != *inputs {
                        return Err(NumericsError::Layer {
                            layer: idx,
                            kind: "dense",
                            message: format!(
                                "expected rank-1 input of width {}, got {:?}",
                                inputs, cur
                            ),
                        });
                    }
                    (
                        vec![*outputs],
                        Tensor::zeros(&[*inputs, *outputs]),
                        Tensor::zeros(&[*outputs]),
                    )
                }
                LayerSpec::Relu | LayerSpec::Dropout { .. } => {
                    (cur.clone(), Tensor::zeros(&[0]), Tensor::zeros(&[0]))
                }
                LayerSpec::ResidualAdd { source } => {
                    if *source >= idx {
                        return Err(NumericsError::Layer {
                            layer: idx,
                            kind: "residual_add",
                            message: format!("source {} is not a prior layer", source),
                        });
                    }
                    let src_shape = &shapes[*source + 1];
                    if *src_shape != cur {
                        return Err(NumericsError::Layer {
                            layer: idx,
                            kind: "residual_add",
                            message: format!(
                                "source shape {:?} != input shape {:?}",
                                src_shape, cur
                            ),
                        });
                    }
                    (cur.clone(), Tensor::zeros(&[0]), Tensor::zeros(&[0]))
                }
                LayerSpec::Flatten => {
                    let flat: usize = cur.iter().product();
                    (vec![flat], Tensor::zeros(&[0]), Tensor::zeros(&[0]))
                }
            };
            shapes.push(out_shape);
            layers.push(Layer {
                spec,
                weights,
                bias,
                frozen: false,
            });
        }
        Ok(Model {
            input_shape,
            layers,
            shapes,
        })
    }

    /// He-uniform init for conv layers (they feed ReLUs), Glorot-uniform for
    /// dense layers, biases zero. Deterministic per seed: each layer draws
    /// from its own derived stream.
    pub fn init_weights(&mut self, seed: u64) {
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            let limit = match &layer.spec {
                LayerSpec::Conv2d {
                    kernel,
                    in_channels,
                    ..
                } => {
                    let fan_in = (kernel.0 * kernel.1 * in_channels) as f64;
                    (6.0 / fan_in).sqrt()
                }
                LayerSpec::Dense { inputs, outputs } => {
                    (6.0 / (*inputs as f64 + *outputs as f64)).sqrt()
                }
                _ => continue,
            };
            let mut rng = rng_from_seed(derive_seed(seed, idx as u64));
            for w in layer.weights.data_mut() {
                *w = rng.gen_range(-limit..limit);
            }
            for b in layer.bias.data_mut() {
                *b = 0.0;
            }
        }
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    pub fn activation_shape(&self, boundary: usize) -> &[usize] {
        &self.shapes[boundary]
    }

    /// Trainable parameters (frozen layers excluded).
    pub fn trainable_param_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| !l.frozen)
            .map(Layer::param_count)
            .sum()
    }

    /// All parameters, trainable or not.
    pub fn total_param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Concatenates all parameter values in layer order (weights then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(l.bias.data());
        }
        out
    }

    /// Restores parameters from a [`Model::flat_params`] snapshot.
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), NumericsError> {
        if flat.len() != self.total_param_count() {
            return Err(NumericsError::ShapeMismatch {
                context: "set_flat_params",
                expected: vec![self.total_param_count()],
                actual: vec![flat.len()],
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let wn = l.weights.len();
            l.weights.data_mut().copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = l.bias.len();
            l.bias.data_mut().copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        Ok(())
    }

    /// Runs the forward pass, caching every activation.
    ///
    /// In training mode each dropout layer draws its mask from a stream
    /// derived from `dropout_seed` and the layer index, so a given seed
    /// reproduces masks bit-exactly.
    pub fn forward(&self, input: &Tensor, phase: Phase) -> Result<Activations, NumericsError> {
        if input.shape() != self.input_shape {
            return Err(NumericsError::ShapeMismatch {
                context: "model input",
                expected: self.input_shape.to_vec(),
                actual: input.shape().to_vec(),
            });
        }
        let mut values: Vec<Tensor> = Vec::with_capacity(self.layers.len() + 1);
        let mut masks: Vec<Option<Vec<f64>>> = vec![None; self.layers.len()];
        values.push(input.clone());
        for (idx, layer) in self.layers.iter().enumerate() {
            let x = &values[idx];
            let out = match &layer.spec {
                LayerSpec::Conv2d {
                    stride, padding, ..
                } => layer::conv2d(x, &layer.weights, &layer.bias, *stride, *padding)?,
                LayerSpec::Dense { .. } => layer::dense(x, &layer.weights, &layer.bias)?,
                LayerSpec::Relu => layer::relu(x),
                LayerSpec::Dropout { rate } => match phase {
                    Phase::Train { dropout_seed } => {
                        let mut rng = rng_from_seed(derive_seed(dropout_seed, idx as u64));
                        let (out, mask) = layer::dropout_train(x, *rate, &mut rng);
                        masks[idx] = Some(mask);
                        out
                    }
                    Phase::Infer => x.clone(),
                },
                LayerSpec::ResidualAdd { source } => {
                    layer::residual_add(x, &values[*source + 1])?
                }
                LayerSpec::Flatten => x.reshaped(&[x.len()])?,
            };
            out.check_finite(layer.spec.kind_name())
                .map_err(|e| NumericsError::Layer {
                    layer: idx,
                    kind: layer.spec.kind_name(),
                    message: e.to_string(),
                })?;
            values.push(out);
        }
        Ok(Activations {
            values,
            dropout_masks: masks,
        })
    }

    /// Inference-mode forward returning only the output tensor.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor, NumericsError> {
        let acts = self.forward(input, Phase::Infer)?;
        Ok(acts.values.into_iter().last().unwrap())
    }

    /// Reverse-mode sweep from an output gradient to per-parameter gradients
    /// plus the gradient with respect to the model input.
    ///
    /// Residual connections route the incoming gradient unchanged into both
    /// the chain predecessor and the referenced source activation.
    pub fn backward(
        &self,
        acts: &Activations,
        grad_output: &Tensor,
    ) -> Result<(Gradients, Tensor), NumericsError> {
        self.backward_impl(acts, grad_output, 0)
    }

    /// Backward sweep that stops once every remaining layer is frozen or
    /// parameterless; their gradient entries stay `None` and the returned
    /// input gradient is zero. Saves most of the sweep when fine-tuning
    /// with a frozen lower stage.
    pub fn backward_trainable(
        &self,
        acts: &Activations,
        grad_output: &Tensor,
    ) -> Result<Gradients, NumericsError> {
        let stop = self
            .layers
            .iter()
            .position(|l| l.spec.has_params() && !l.frozen)
            .unwrap_or(self.layers.len());
        Ok(self.backward_impl(acts, grad_output, stop)?.0)
    }

    fn backward_impl(
        &self,
        acts: &Activations,
        grad_output: &Tensor,
        stop_layer: usize,
    ) -> Result<(Gradients, Tensor), NumericsError> {
        let n = self.layers.len();
        let mut slot_grads: Vec<Option<Tensor>> = vec![None; n + 1];
        slot_grads[n] = Some(grad_output.clone());
        let mut grads = Gradients {
            per_layer: (0..n).map(|_| None).collect(),
        };

        for idx in (stop_layer..n).rev() {
            let g_out = match slot_grads[idx + 1].take() {
                Some(g) => g,
                // Slot never received gradient (output unused); skip.
                None => continue,
            };
            let layer = &self.layers[idx];
            let x = &acts.values[idx];
            let g_in = match &layer.spec {
                LayerSpec::Conv2d {
                    stride, padding, ..
                } => {
                    let (gin, gw, gb) =
                        layer::conv2d_backward(x, &layer.weights, &g_out, *stride, *padding)?;
                    grads.per_layer[idx] = Some(LayerGrads {
                        weights: gw,
                        bias: gb,
                    });
                    gin
                }
                LayerSpec::Dense { .. } => {
                    let (gin, gw, gb) = layer::dense_backward(x, &layer.weights, &g_out)?;
                    grads.per_layer[idx] = Some(LayerGrads {
                        weights: gw,
                        bias: gb,
                    });
                    gin
                }
                LayerSpec::Relu => layer::relu_backward(&acts.values[idx + 1], &g_out),
                LayerSpec::Dropout { .. } => match &acts.dropout_masks[idx] {
                    Some(mask) => layer::dropout_backward(&g_out, mask),
                    None => g_out.clone(),
                },
                LayerSpec::ResidualAdd { source } => {
                    accumulate_slot(&mut slot_grads[*source + 1], &g_out);
                    g_out.clone()
                }
                LayerSpec::Flatten => g_out.reshaped(acts.values[idx].shape())?,
            };
            if let Some(lg) = &grads.per_layer[idx] {
                if lg.weights.check_finite("grad").is_err() || lg.bias.check_finite("grad").is_err()
                {
                    return Err(NumericsError::GradientNonFinite { layer: idx });
                }
            }
            accumulate_slot(&mut slot_grads[idx], &g_in);
        }
        let input_grad = slot_grads[0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.input_shape));
        Ok((grads, input_grad))
    }
}


fn accumulate_slot(slot: &mut Option<Tensor>, grad: &Tensor) {
    match slot {
        Some(existing) => {
            for (a, &b) in existing.data_mut().iter_mut().zip(grad.data()) {
                *a += b;
            }
        }
        None => *slot = Some(grad.clone()),
    }
}

/// Convenience constructor used across tests: conv spec with square-free
/// defaults spelled out at the call site.
pub fn conv_spec(
    kernel: (usize, usize),
    in_channels: usize,
    out_channels: usize,
    stride: (usize, usize),
    padding: Padding,
) -> LayerSpec {
    LayerSpec::Conv2d {
        kernel,
        in_channels,
        out_channels,
        stride,
        padding,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> Model {
        let specs = vec![
            conv_spec((1, 3), 2, 4, (1, 1), Padding::Same),
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 3 * 4 * 4,
                outputs: 2,
            },
        ];
        let mut m = Model::build([3, 4, 2], specs).unwrap();
        m.init_weights(11);
        m
    }

    #[test]
    fn shape_inference_walks_the_stack() {
        let m = tiny_model();
        assert_eq!(m.activation_shape(1), &[3, 4, 4]);
        assert_eq!(m.output_shape(), &[2]);
    }

    #[test]
    fn build_rejects_residual_shape_mismatch() {
        let specs = vec![
            conv_spec((1, 1), 1, 2, (1, 1), Padding::Same),
            LayerSpec::ResidualAdd { source: 0 },
        ];
        assert!(Model::build([2, 2, 2], specs).is_err());
        let specs = vec![
            conv_spec((1, 1), 2, 2, (1, 1), Padding::Same),
            LayerSpec::ResidualAdd { source: 0 },
        ];
        assert!(Model::build([2, 2, 2], specs).is_ok());
    }

    #[test]
    fn build_error_names_failing_layer() {
        let specs = vec![
            conv_spec((1, 1), 1, 2, (1, 1), Padding::Same),
            conv_spec((1, 1), 3, 2, (1, 1), Padding::Same), // wrong in_channels
        ];
        let err = Model::build([2, 2, 1], specs).unwrap_err();
        assert!(err.to_string().contains("layer 1"), "{err}");
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let mut a = tiny_model();
        let mut b = tiny_model();
        a.init_weights(5);
        b.init_weights(5);
        assert_eq!(a.flat_params(), b.flat_params());
        b.init_weights(6);
        assert_ne!(a.flat_params(), b.flat_params());
    }

    #[test]
    fn infer_is_pure() {
        let m = tiny_model();
        let x = Tensor::from_vec(&[3, 4, 2], (0..24).map(|i| i as f64 * 0.1).collect()).unwrap();
        let a = m.infer(&x).unwrap();
        let b = m.infer(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn flat_params_roundtrip() {
        let mut m = tiny_model();
        let snap = m.flat_params();
        m.init_weights(99);
        assert_ne!(m.flat_params(), snap);
        m.set_flat_params(&snap).unwrap();
        assert_eq!(m.flat_params(), snap);
    }

    #[test]
    fn residual_routes_gradient_to_both_branches() {
        // y = x + x (identity residual): dL/dx should be 2 * dL/dy.
        let specs = vec![
            LayerSpec::Relu, // layer 0: identity for positive input
            LayerSpec::ResidualAdd { source: 0 },
            LayerSpec::Flatten,
        ];
        let m = Model::build([1, 2, 1], specs).unwrap();
        let x = Tensor::from_vec(&[1, 2, 1], vec![1.0, 2.0]).unwrap();
        let acts = m.forward(&x, Phase::Infer).unwrap();
        assert_eq!(acts.output().data(), &[2.0, 4.0]);
        let g = Tensor::from_vec(&[2], vec![1.0, 1.0]).unwrap();
        let (_, input_grad) = m.backward(&acts, &g).unwrap();
        assert_eq!(input_grad.data(), &[2.0, 2.0]);
    }
}
