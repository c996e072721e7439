//! Feature construction: complex CSI to the 6-plane real input tensor.
//!
//! Plane order is `[raw_re, raw_im, amp, phase, time_re, time_im]`. The
//! time-domain planes come from an inverse DFT along the subcarrier axis,
//! evaluated directly (K stays at or below 128 at desk scale, so the
//! O(K^2) sum is cheaper to verify than a mixed-radix FFT).

mod normalize;

pub use normalize::{LabelMap, Normalization};

use crate::channel::CsiMatrix;
use crate::numerics::{NumericsError, Tensor};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Number of feature planes.
pub const N_PLANES: usize = 6;

/// Plane indices in the stacked tensor.
pub const PLANE_RAW_RE: usize = 0;
pub const PLANE_RAW_IM: usize = 1;
pub const PLANE_AMP: usize = 2;
pub const PLANE_PHASE: usize = 3;
pub const PLANE_TIME_RE: usize = 4;
pub const PLANE_TIME_IM: usize = 5;

/// Real-valued `N x K x 6` input stack for one CSI sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub tensor: Tensor,
}

impl FeatureTensor {
    pub fn n_antennas(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn n_subcarriers(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn plane_value(&self, antenna: usize, subcarrier: usize, plane: usize) -> f64 {
        self.tensor.at3(antenna, subcarrier, plane)
    }
}

/// Amplitude and wrapped phase of each entry. Phase lies in `(-pi, pi]`;
/// `atan2(0, 0)` is defined as 0.
pub fn to_polar(h: &CsiMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut amp = Vec::with_capacity(h.data.len());
    let mut phase = Vec::with_capacity(h.data.len());
    for c in &h.data {
        amp.push(c.norm());
        let p = if c.re == 0.0 && c.im == 0.0 {
            0.0
        } else {
            let raw = c.im.atan2(c.re);
            // atan2 returns [-pi, pi]; fold the open end onto +pi.
            if raw <= -PI {
                raw + 2.0 * PI
            } else {
                raw
            }
        };
        phase.push(p);
    }
    (amp, phase)
}

/// Inverse DFT along the subcarrier axis, per antenna row:
/// `h[t] = (1/K) sum_k H[k] exp(+j 2 pi k t / K)`.
pub fn idft_time(h: &CsiMatrix) -> (Vec<f64>, Vec<f64>) {
    let k = h.n_subcarriers;
    let mut time_re = vec![0.0; h.data.len()];
    let mut time_im = vec![0.0; h.data.len()];
    for ant in 0..h.n_antennas {
        let row = h.row(ant);
        for t in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for (ki, &v) in row.iter().enumerate() {
                let angle = 2.0 * PI * (ki * t % k) as f64 / k as f64;
                acc += v * Complex64::new(angle.cos(), angle.sin());
            }
            acc /= k as f64;
            time_re[ant * k + t] = acc.re;
            time_im[ant * k + t] = acc.im;
        }
    }
    (time_re, time_im)
}

/// Forward DFT along the subcarrier axis, the inverse of [`idft_time`]:
/// `H[k] = sum_t h[t] exp(-j 2 pi k t / K)`.
pub fn dft_freq(time_re: &[f64], time_im: &[f64], n_antennas: usize, k: usize) -> CsiMatrix {
    let mut out = CsiMatrix::zeros(n_antennas, k);
    for ant in 0..n_antennas {
        for ki in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..k {
                let angle = -2.0 * PI * (ki * t % k) as f64 / k as f64;
                let h = Complex64::new(time_re[ant * k + t], time_im[ant * k + t]);
                acc += h * Complex64::new(angle.cos(), angle.sin());
            }
            out.data[ant * k + ki] = acc;
        }
    }
    out
}

/// Stacks the six planes into the `N x K x 6` input tensor. Values are
/// unnormalized; see [`Normalization`].
pub fn build_feature_tensor(h: &CsiMatrix) -> Result<FeatureTensor, NumericsError> {
    let n = h.n_antennas;
    let k = h.n_subcarriers;
    for (i, c) in h.data.iter().enumerate() {
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(NumericsError::NonFinite {
                context: "build_feature_tensor",
                index: i,
                value: if c.re.is_finite() { c.im } else { c.re },
            });
        }
    }
    let (amp, phase) = to_polar(h);
    let (time_re, time_im) = idft_time(h);
    let mut tensor = Tensor::zeros(&[n, k, N_PLANES]);
    let data = tensor.data_mut();
    for idx in 0..n * k {
        let base = idx * N_PLANES;
        data[base + PLANE_RAW_RE] = h.data[idx].re;
        data[base + PLANE_RAW_IM] = h.data[idx].im;
        data[base + PLANE_AMP] = amp[idx];
        data[base + PLANE_PHASE] = phase[idx];
        data[base + PLANE_TIME_RE] = time_re[idx];
        data[base + PLANE_TIME_IM] = time_im[idx];
    }
    Ok(FeatureTensor { tensor })
}
