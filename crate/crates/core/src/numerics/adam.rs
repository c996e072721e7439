//! Adam optimizer with bias correction, keyed to a model's layer stack.

use super::model::{Gradients, Model};
use super::tensor::Tensor;
use super::NumericsError;

/// Optimizer hyperparameters. Defaults: lr 1e-3, beta1 0.9, beta2 0.999,
/// epsilon 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

struct LayerMoments {
    m_weights: Tensor,
    v_weights: Tensor,
    m_bias: Tensor,
    v_bias: Tensor,
}

/// Per-parameter first/second moment accumulators plus the step counter.
pub struct AdamState {
    cfg: AdamConfig,
    step: u64,
    moments: Vec<Option<LayerMoments>>,
}

impl AdamState {
    pub fn new(model: &Model, cfg: AdamConfig) -> Result<Self, NumericsError> {
        if cfg.lr <= 0.0 {
            return Err(NumericsError::Config(format!(
                "learning rate must be positive, got {}",
                cfg.lr
            )));
        }
        if !(0.0..1.0).contains(&cfg.beta1) || !(0.0..1.0).contains(&cfg.beta2) {
            return Err(NumericsError::Config(
                "adam betas must lie in [0, 1)".into(),
            ));
        }
        let moments = model
            .layers
            .iter()
            .map(|l| {
                l.spec.has_params().then(|| LayerMoments {
                    m_weights: Tensor::zeros(l.weights.shape()),
                    v_weights: Tensor::zeros(l.weights.shape()),
                    m_bias: Tensor::zeros(l.bias.shape()),
                    v_bias: Tensor::zeros(l.bias.shape()),
                })
            })
            .collect();
        Ok(AdamState {
            cfg,
            step: 0,
            moments,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    /// Adjusts the learning rate mid-run (used by schedules). Moment
    /// accumulators are untouched.
    pub fn set_lr(&mut self, lr: f64) -> Result<(), NumericsError> {
        if lr <= 0.0 {
            return Err(NumericsError::Config(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        self.cfg.lr = lr;
        Ok(())
    }

    /// One bias-corrected Adam step. Frozen layers are skipped entirely:
    /// neither their parameters nor their moment accumulators move.
    pub fn update(&mut self, model: &mut Model, grads: &Gradients) -> Result<(), NumericsError> {
        if grads.per_layer.len() != model.layers.len() {
            return Err(NumericsError::ShapeMismatch {
                context: "adam update",
                expected: vec![model.layers.len()],
                actual: vec![grads.per_layer.len()],
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);

        for (idx, layer) in model.layers.iter_mut().enumerate() {
            if layer.frozen || !layer.spec.has_params() {
                continue;
            }
            let grad = grads.per_layer[idx].as_ref().ok_or_else(|| {
                NumericsError::Layer {
                    layer: idx,
                    kind: layer.spec.kind_name(),
                    message: "missing gradient for trainable layer".into(),
                }
            })?;
            let mom = self.moments[idx].as_mut().expect("moments follow params");
            step_tensor(
                layer.weights.data_mut(),
                grad.weights.data(),
                mom.m_weights.data_mut(),
                mom.v_weights.data_mut(),
                &self.cfg,
                bc1,
                bc2,
            );
            step_tensor(
                layer.bias.data_mut(),
                grad.bias.data(),
                mom.m_bias.data_mut(),
                mom.v_bias.data_mut(),
                &self.cfg,
                bc1,
                bc2,
            );
        }
        Ok(())
    }

    /// Max absolute first-moment entry; tests use it to watch moments decay.
    pub fn max_first_moment(&self) -> f64 {
        self.moments
            .iter()
            .flatten()
            .flat_map(|m| m.m_weights.data().iter().chain(m.m_bias.data()))
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

fn step_tensor(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::layer::LayerSpec;
    use crate::numerics::model::Gradients;

    fn dense_model() -> Model {
        let mut m = Model::build(
            [1, 1, 3],
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: 3,
                    outputs: 2,
                },
            ],
        )
        .unwrap();
        m.init_weights(3);
        m
    }

    #[test]
    fn rejects_nonpositive_lr() {
        let m = dense_model();
        let cfg = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(&m, cfg).is_err());
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut m = dense_model();
        let before = m.flat_params();
        let mut state = AdamState::new(&m, AdamConfig::default()).unwrap();
        let grads = Gradients::zeros_like(&m);
        for _ in 0..5 {
            state.update(&mut m, &grads).unwrap();
        }
        assert_eq!(m.flat_params(), before);
        assert_eq!(state.step(), 5);
    }

    #[test]
    fn first_step_is_sign_scaled_lr() {
        // With zero moments, step 1 gives delta = -lr * g / (|g| + eps') ~= -lr * sign(g).
        let mut m = dense_model();
        let before = m.flat_params();
        let mut state = AdamState::new(&m, AdamConfig::default()).unwrap();
        let mut grads = Gradients::zeros_like(&m);
        if let Some(g) = grads.per_layer[1].as_mut() {
            for (i, v) in g.weights.data_mut().iter_mut().enumerate() {
                *v = if i % 2 == 0 { 2.5 } else { -0.75 };
            }
        }
        state.update(&mut m, &grads).unwrap();
        let after = m.flat_params();
        let lr = AdamConfig::default().lr;
        // weight params come first in the flattened layout of layer 1
        let gsigns = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        for (i, sign) in gsigns.iter().enumerate() {
            let delta = after[i] - before[i];
            assert!(
                (delta + lr * sign).abs() < 1e-9,
                "param {i}: delta {delta} vs expected {}",
                -lr * sign
            );
        }
    }

    #[test]
    fn moments_decay_toward_zero_on_zero_grads() {
        let mut m = dense_model();
        let mut state = AdamState::new(&m, AdamConfig::default()).unwrap();
        let mut grads = Gradients::zeros_like(&m);
        if let Some(g) = grads.per_layer[1].as_mut() {
            g.weights.data_mut().fill(1.0);
        }
        state.update(&mut m, &grads).unwrap();
        let peak = state.max_first_moment();
        let zeros = Gradients::zeros_like(&m);
        for _ in 0..50 {
            state.update(&mut m, &zeros).unwrap();
        }
        assert!(state.max_first_moment() < peak * 1e-2);
    }

    #[test]
    fn frozen_layer_is_bit_identical_after_update() {
        let mut m = dense_model();
        m.layers[1].frozen = true;
        let before = m.flat_params();
        let mut state = AdamState::new(&m, AdamConfig::default()).unwrap();
        let mut grads = Gradients::zeros_like(&m);
        if let Some(g) = grads.per_layer[1].as_mut() {
            g.weights.data_mut().fill(3.0);
            g.bias.data_mut().fill(-2.0);
        }
        state.update(&mut m, &grads).unwrap();
        assert_eq!(m.flat_params(), before);
    }
}
