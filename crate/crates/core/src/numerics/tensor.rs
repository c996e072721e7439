//! Dense row-major f64 tensor, rank 1 through 4.

use super::NumericsError;

/// Contiguous row-major tensor of 64-bit reals.
///
/// The last axis varies fastest. For the image-like tensors used by the
/// network the layout is `[rows, cols, channels]` with channels contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(
            (1..=4).contains(&shape.len()),
            "tensor rank must be 1..=4, got {}",
            shape.len()
        );
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NumericsError> {
        let expect: usize = shape.iter().product();
        if expect != data.len() || shape.is_empty() || shape.len() > 4 {
            return Err(NumericsError::ShapeMismatch {
                context: "from_vec",
                expected: shape.to_vec(),
                actual: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar_like(shape: &[usize], value: f64) -> Self {
        let mut t = Tensor::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterprets the buffer under a new shape of equal element count.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor, NumericsError> {
        Tensor::from_vec(shape, self.data.clone())
    }

    /// Index into a rank-3 tensor laid out `[rows, cols, channels]`.
    #[inline]
    pub fn at3(&self, r: usize, c: usize, ch: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 3);
        self.data[(r * self.shape[1] + c) * self.shape[2] + ch]
    }

    #[inline]
    pub fn set3(&mut self, r: usize, c: usize, ch: usize, v: f64) {
        debug_assert_eq!(self.shape.len(), 3);
        self.data[(r * self.shape[1] + c) * self.shape[2] + ch] = v;
    }

    /// Errors when any stored value is NaN or infinite.
    pub fn check_finite(&self, context: &'static str) -> Result<(), NumericsError> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(NumericsError::NonFinite {
                    context,
                    index: i,
                    value: *v,
                });
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.data.iter()
    }
}
