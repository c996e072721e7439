//! The positioning CNN: per-antenna 1-D feature extraction over the
//! subcarrier axis, cross-antenna combination, and a dense regression head
//! emitting normalized (x, y).
//!
//! The architecture is 13 convolutional layers with residual skips and two
//! dropout layers, then three dense layers. Stage-1 kernels are `(1, k)` so
//! each antenna row is filtered independently; stage-2 kernels run `(r, 1)`
//! or `(r, c)` to combine antennas. The paper-scale preset lands at 221,714
//! parameters for a 64-antenna, 100-subcarrier input (the reference
//! implementation reports 217,378; its exact layer table is not public, so
//! the budget is a soft target).

use crate::features::{FeatureTensor, N_PLANES};
use crate::numerics::{conv_spec, LayerSpec, Model, NumericsError, Padding};

/// One planned convolution; in-channels chain from the previous layer.
/// All planned convolutions use `Same` padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvPlan {
    pub kernel: (usize, usize),
    pub out_channels: usize,
    pub stride: (usize, usize),
}

/// Architecture description: two convolution stages plus the dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    pub n_antennas: usize,
    pub n_subcarriers: usize,
    /// Per-antenna stage; kernels must touch only the subcarrier axis.
    pub stage1: Vec<ConvPlan>,
    /// Antenna-combining stage.
    pub stage2: Vec<ConvPlan>,
    /// A skip closes after this many consecutive shape-preserving convs.
    pub residual_period: usize,
    pub dropout_rate: f64,
    /// Three dense widths; the last must be 2.
    pub head: [usize; 3],
}

impl ArchConfig {
    /// Paper-scale preset (~222k parameters at N = 64, K = 100).
    pub fn paper(n_antennas: usize, n_subcarriers: usize) -> Self {
        ArchConfig {
            n_antennas,
            n_subcarriers,
            stage1: vec![
                ConvPlan { kernel: (1, 5), out_channels: 16, stride: (1, 2) },
                ConvPlan { kernel: (1, 3), out_channels: 16, stride: (1, 1) },
                ConvPlan { kernel: (1, 3), out_channels: 16, stride: (1, 1) },
                ConvPlan { kernel: (1, 5), out_channels: 32, stride: (1, 2) },
                ConvPlan { kernel: (1, 3), out_channels: 32, stride: (1, 1) },
                ConvPlan { kernel: (1, 3), out_channels: 32, stride: (1, 1) },
                ConvPlan { kernel: (1, 5), out_channels: 32, stride: (1, 2) },
                ConvPlan { kernel: (1, 3), out_channels: 32, stride: (1, 2) },
            ],
            stage2: vec![
                ConvPlan { kernel: (5, 1), out_channels: 32, stride: (2, 1) },
                ConvPlan { kernel: (3, 1), out_channels: 32, stride: (1, 1) },
                ConvPlan { kernel: (3, 1), out_channels: 32, stride: (1, 1) },
                ConvPlan { kernel: (5, 3), out_channels: 64, stride: (4, 2) },
                ConvPlan { kernel: (5, 3), out_channels: 64, stride: (4, 2) },
            ],
            residual_period: 2,
            dropout_rate: 0.2,
            head: [256, 128, 2],
        }
    }

    /// Desk-scale preset: same topology at half the channel widths, sized
    /// for fast CPU training on small synthetic grids (~37k parameters).
    /// Dropout is lighter than the paper-scale preset: noise-free desk
    /// datasets reward precision over regularization.
    pub fn desk(n_antennas: usize, n_subcarriers: usize) -> Self {
        ArchConfig {
            n_antennas,
            n_subcarriers,
            stage1: vec![
                ConvPlan { kernel: (1, 5), out_channels: 8, stride: (1, 2) },
                ConvPlan { kernel: (1, 3), out_channels: 8, stride: (1, 1) },
                ConvPlan { kernel: (1, 3), out_channels: 8, stride: (1, 1) },
                ConvPlan { kernel: (1, 5), out_channels: 16, stride: (1, 2) },
                ConvPlan { kernel: (1, 3), out_channels: 16, stride: (1, 1) },
                ConvPlan { kernel: (1, 3), out_channels: 16, stride: (1, 1) },
                ConvPlan { kernel: (1, 5), out_channels: 16, stride: (1, 2) },
                ConvPlan { kernel: (1, 3), out_channels: 16, stride: (1, 2) },
            ],
            stage2: vec![
                ConvPlan { kernel: (5, 1), out_channels: 16, stride: (2, 1) },
                ConvPlan { kernel: (3, 1), out_channels: 16, stride: (1, 1) },
                ConvPlan { kernel: (3, 1), out_channels: 16, stride: (1, 1) },
                ConvPlan { kernel: (5, 3), out_channels: 32, stride: (4, 2) },
                ConvPlan { kernel: (5, 3), out_channels: 32, stride: (4, 2) },
            ],
            residual_period: 2,
            dropout_rate: 0.05,
            head: [64, 32, 2],
        }
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if self.n_antennas == 0 || self.n_subcarriers == 0 {
            return Err(NumericsError::Config("input extents must be >= 1".into()));
        }
        if self.stage1.len() + self.stage2.len() != 13 {
            return Err(NumericsError::Config(format!(
                "architecture must have exactly 13 conv layers, got {}",
                self.stage1.len() + self.stage2.len()
            )));
        }
        if self.stage1.iter().any(|p| p.kernel.0 != 1 || p.stride.0 != 1) {
            return Err(NumericsError::Config(
                "stage-1 kernels and strides must touch only the subcarrier axis".into(),
            ));
        }
        if self.head[2] != 2 {
            return Err(NumericsError::Config(format!(
                "head must end in width 2, got {}",
                self.head[2]
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NumericsError::Config(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.residual_period == 0 {
            return Err(NumericsError::Config(
                "residual period must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.n_antennas, self.n_subcarriers, N_PLANES]
    }

    /// Emits the full layer list. Each conv is followed by ReLU; after
    /// `residual_period` consecutive shape-preserving convs a skip from the
    /// last anchor closes before the ReLU. One dropout layer ends each
    /// stage, then flatten and the three dense layers (ReLU between them,
    /// linear output).
    ///
    /// Returns the specs and the layer index one past the end of stage 1 —
    /// the default freeze boundary for transfer learning.
    pub fn layer_specs(&self) -> Result<(Vec<LayerSpec>, usize), NumericsError> {
        self.validate()?;
        let mut specs: Vec<LayerSpec> = Vec::new();
        let mut channels = N_PLANES;

        let emit_stage = |specs: &mut Vec<LayerSpec>, plans: &[ConvPlan], channels: &mut usize| {
            // anchor: layer index whose output feeds a future skip
            let mut anchor: Option<usize> = None;
            let mut run = 0usize;
            for plan in plans {
                let preserves =
                    plan.out_channels == *channels && plan.stride == (1, 1);
                specs.push(conv_spec(
                    plan.kernel,
                    *channels,
                    plan.out_channels,
                    plan.stride,
                    Padding::Same,
                ));
                *channels = plan.out_channels;
                if preserves && anchor.is_some() {
                    run += 1;
                    if run == self.residual_period {
                        specs.push(LayerSpec::ResidualAdd {
                            source: anchor.unwrap(),
                        });
                        specs.push(LayerSpec::Relu);
                        anchor = Some(specs.len() - 1);
                        run = 0;
                        continue;
                    }
                    specs.push(LayerSpec::Relu);
                } else {
                    specs.push(LayerSpec::Relu);
                    anchor = Some(specs.len() - 1);
                    run = 0;
                }
            }
            specs.push(LayerSpec::Dropout {
                rate: self.dropout_rate,
            });
        };

        emit_stage(&mut specs, &self.stage1, &mut channels);
        let stage1_end = specs.len();
        emit_stage(&mut specs, &self.stage2, &mut channels);

        specs.push(LayerSpec::Flatten);
        // Flatten width depends on input extents; resolve via shape walk.
        let probe = Model::build(self.input_shape(), specs.clone())?;
        let flat: usize = probe.output_shape().iter().product();

        let mut width = flat;
        for (i, &w) in self.head.iter().enumerate() {
            specs.push(LayerSpec::Dense {
                inputs: width,
                outputs: w,
            });
            if i + 1 < self.head.len() {
                specs.push(LayerSpec::Relu);
            }
            width = w;
        }
        Ok((specs, stage1_end))
    }
}

/// Builds and deterministically initializes the positioning CNN.
pub fn build_positioning_cnn(arch: &ArchConfig, seed: u64) -> Result<Model, NumericsError> {
    let (specs, _) = arch.layer_specs()?;
    let mut model = Model::build(arch.input_shape(), specs)?;
    model.init_weights(seed);
    Ok(model)
}

/// Layer index one past the end of stage 1: the default transfer-learning
/// freeze boundary ("the per-antenna feature extractor stays, the combining
/// stage retrains").
pub fn stage1_boundary(arch: &ArchConfig) -> Result<usize, NumericsError> {
    Ok(arch.layer_specs()?.1)
}

/// Trainable/frozen parameter totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub trainable: usize,
    pub frozen: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.trainable + self.frozen
    }
}

/// Sums kernel, bias, and dense-weight element counts over the stack,
/// reporting frozen parameters separately.
pub fn param_count(model: &Model) -> ParamCount {
    let mut out = ParamCount {
        trainable: 0,
        frozen: 0,
    };
    for layer in &model.layers {
        if layer.frozen {
            out.frozen += layer.param_count();
        } else {
            out.trainable += layer.param_count();
        }
    }
    out
}

/// Inference on one feature tensor; dropout off. Output is the normalized
/// (x, y) pair.
pub fn predict(model: &Model, input: &FeatureTensor) -> Result<[f64; 2], NumericsError> {
    let out = model.infer(&input.tensor)?;
    if out.len() != 2 {
        return Err(NumericsError::ShapeMismatch {
            context: "predict output",
            expected: vec![2],
            actual: out.shape().to_vec(),
        });
    }
    Ok([out.data()[0], out.data()[1]])
}

/// Freezes every layer below `boundary`; layers at or above it become
/// trainable with their parameters retained.
pub fn split_for_transfer(model: &mut Model, boundary: usize) -> Result<(), NumericsError> {
    if boundary == 0 || boundary >= model.layers.len() {
        return Err(NumericsError::Config(format!(
            "freeze boundary must lie in 1..{}, got {boundary}",
            model.layers.len()
        )));
    }
    for (idx, layer) in model.layers.iter_mut().enumerate() {
        layer.frozen = idx < boundary;
    }
    Ok(())
}

/// Human-readable layer table with shapes and per-layer parameter counts.
pub fn plan_summary(model: &Model) -> String {
    let mut out = String::new();
    out.push_str("idx  kind          output_shape      params  frozen\n");
    for (idx, layer) in model.layers.iter().enumerate() {
        let shape = model.activation_shape(idx + 1);
        out.push_str(&format!(
            "{:<4} {:<13} {:<17} {:<7} {}\n",
            idx,
            layer.spec.kind_name(),
            format!("{shape:?}"),
            layer.param_count(),
            if layer.frozen { "yes" } else { "no" },
        ));
    }
    let counts = param_count(model);
    out.push_str(&format!(
        "total params: {} (trainable {}, frozen {})\n",
        counts.total(),
        counts.trainable,
        counts.frozen
    ));
    out
}
