//! Dense-tensor math with reverse-mode differentiation: the layer
//! primitives behind the positioning CNN, an Adam optimizer, and a
//! finite-difference gradient oracle.

mod adam;
mod gradcheck;
mod layer;
mod loss;
mod model;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{
    finite_difference_gradient, gradient_check, gradient_relative_error, layer_kind_suite,
    model_gradients, model_loss, GradCheckReport, SuiteCase,
};
pub use layer::{
    conv2d, conv2d_backward, conv_geometry, dense, dense_backward, residual_add, ConvGeometry,
    LayerSpec, Padding,
};
pub use loss::{mse_loss, mse_loss_grad};
pub use model::{conv_spec, Activations, Gradients, Layer, LayerGrads, Model, Phase};
pub use tensor::Tensor;

/// Errors from tensor math, model construction, and training steps.
#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("{context}: expected shape {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("{context}: {axis} axis mismatch (expected {expected}, got {actual})")]
    AxisMismatch {
        context: &'static str,
        axis: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{context}: non-finite value {value} at flat index {index}")]
    NonFinite {
        context: &'static str,
        index: usize,
        value: f64,
    },
    #[error("layer {layer} ({kind}): {message}")]
    Layer {
        layer: usize,
        kind: &'static str,
        message: String,
    },
    #[error("gradient at layer {layer} is not finite")]
    GradientNonFinite { layer: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}
