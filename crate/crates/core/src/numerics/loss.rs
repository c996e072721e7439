//! Mean-squared-error loss on small output vectors.

use super::tensor::Tensor;
use super::NumericsError;

/// Mean of squared componentwise differences.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64, NumericsError> {
    if pred.shape() != target.shape() {
        return Err(NumericsError::ShapeMismatch {
            context: "mse_loss",
            expected: target.shape().to_vec(),
            actual: pred.shape().to_vec(),
        });
    }
    let n = pred.len() as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// Loss value together with its gradient with respect to the prediction:
/// `d/dp_i mean((p - t)^2) = 2 (p_i - t_i) / n`.
pub fn mse_loss_grad(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor), NumericsError> {
    let loss = mse_loss(pred, target)?;
    let n = pred.len() as f64;
    let grad_data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Ok((loss, Tensor::from_vec(pred.shape(), grad_data)?))
}
