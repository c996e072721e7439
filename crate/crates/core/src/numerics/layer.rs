//! Layer primitives: spec types, shape arithmetic, and the forward/backward
//! kernels for each layer kind.
//!
//! Convolution is cross-correlation (no kernel flip). Kernels are stored
//! `[kh, kw, in_channels, out_channels]` row-major and inputs
//! `[rows, cols, channels]`, so the hot inner loops run over the contiguous
//! channel axis.

use super::tensor::Tensor;
use super::NumericsError;
use crate::rng::Rng;
use rand::Rng as _;

/// Spatial padding policy for convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output extent is `ceil(in / stride)`; zero padding split evenly, the
    /// extra cell (if any) at the trailing edge.
    Same,
    /// No padding; output extent is `(in - kernel) / stride + 1`.
    Valid,
}

/// Declarative description of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv2d {
        /// (rows over the antenna axis, cols over the subcarrier axis).
        kernel: (usize, usize),
        in_channels: usize,
        out_channels: usize,
        stride: (usize, usize),
        padding: Padding,
    },
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    /// Adds the output of a prior layer (by layer index) to the input.
    ResidualAdd {
        source: usize,
    },
    Flatten,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::ResidualAdd { .. } => "residual_add",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }

    /// Validates the structural invariants that do not depend on input shape.
    pub fn validate(&self) -> Result<(), NumericsError> {
        match self {
            LayerSpec::Conv2d { kernel, stride, in_channels, out_channels, .. } => {
                if kernel.0 == 0 || kernel.1 == 0 {
                    return Err(NumericsError::Config(format!(
                        "conv2d kernel extents must be >= 1, got {kernel:?}"
                    )));
                }
                if stride.0 == 0 || stride.1 == 0 {
                    return Err(NumericsError::Config(format!(
                        "conv2d strides must be >= 1, got {stride:?}"
                    )));
                }
                if *in_channels == 0 || *out_channels == 0 {
                    return Err(NumericsError::Config(
                        "conv2d channel counts must be >= 1".into(),
                    ));
                }
            }
            LayerSpec::Dense { inputs, outputs } => {
                if *inputs == 0 || *outputs == 0 {
                    return Err(NumericsError::Config(
                        "dense widths must be >= 1".into(),
                    ));
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(NumericsError::Config(format!(
                        "dropout rate must lie in [0, 1), got {rate}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Resolved geometry of one convolution: output extents and leading pads.
#[derive(Debug, Clone, Copy)]
pub struct ConvGeometry {
    pub out_h: usize,
    pub out_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

fn axis_geometry(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
    axis: &'static str,
) -> Result<(usize, usize), NumericsError> {
    match padding {
        Padding::Valid => {
            if kernel > input {
                return Err(NumericsError::AxisMismatch {
                    context: "conv2d(valid): kernel larger than input",
                    axis,
                    expected: kernel,
                    actual: input,
                });
            }
            Ok(((input - kernel) / stride + 1, 0))
        }
        Padding::Same => {
            let out = input.div_ceil(stride);
            let needed = ((out - 1) * stride + kernel).saturating_sub(input);
            Ok((out, needed / 2))
        }
    }
}

/// Computes output extents and padding for a convolution over an
/// `[in_h, in_w, _]` input.
pub fn conv_geometry(
    in_h: usize,
    in_w: usize,
    kernel: (usize, usize),
    stride: (usize, usize),
    padding: Padding,
) -> Result<ConvGeometry, NumericsError> {
    let (out_h, pad_top) = axis_geometry(in_h, kernel.0, stride.0, padding, "rows")?;
    let (out_w, pad_left) = axis_geometry(in_w, kernel.1, stride.1, padding, "cols")?;
    Ok(ConvGeometry {
        out_h,
        out_w,
        pad_top,
        pad_left,
    })
}

fn expect_rank3(t: &Tensor, context: &'static str) -> Result<(usize, usize, usize), NumericsError> {
    let s = t.shape();
    if s.len() != 3 {
        return Err(NumericsError::ShapeMismatch {
            context,
            expected: vec![0, 0, 0],
            actual: s.to_vec(),
        });
    }
    Ok((s[0], s[1], s[2]))
}

/// Dot product with eight independent accumulators. The fixed reduction
/// tree keeps results deterministic while letting the compiler vectorize.
#[inline]
fn dot8(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let mut acc = [0.0f64; 8];
    let chunks = n / 8;
    for i in 0..chunks {
        let j = i * 8;
        let av = &a[j..j + 8];
        let bv = &b[j..j + 8];
        for l in 0..8 {
            acc[l] += av[l] * bv[l];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for j in chunks * 8..n {
        s += a[j] * b[j];
    }
    s
}

/// `out += scale * v`, elementwise.
#[inline]
fn axpy(out: &mut [f64], scale: f64, v: &[f64]) {
    for (o, &x) in out.iter_mut().zip(v) {
        *o += scale * x;
    }
}

/// Validated conv call geometry shared by forward and backward.
struct ConvDims {
    in_h: usize,
    in_w: usize,
    in_c: usize,
    kh: usize,
    kw: usize,
    out_c: usize,
    geo: ConvGeometry,
    /// Patch length `kh * kw * in_c`.
    patch_len: usize,
}

fn conv_dims(
    input: &Tensor,
    kernels: &Tensor,
    stride: (usize, usize),
    padding: Padding,
) -> Result<ConvDims, NumericsError> {
    let (in_h, in_w, in_c) = expect_rank3(input, "conv2d input")?;
    let ks = kernels.shape();
    if ks.len() != 4 {
        return Err(NumericsError::ShapeMismatch {
            context: "conv2d kernels",
            expected: vec![0, 0, 0, 0],
            actual: ks.to_vec(),
        });
    }
    let (kh, kw, kc, out_c) = (ks[0], ks[1], ks[2], ks[3]);
    if kc != in_c {
        return Err(NumericsError::AxisMismatch {
            context: "conv2d",
            axis: "channel",
            expected: kc,
            actual: in_c,
        });
    }
    let geo = conv_geometry(in_h, in_w, (kh, kw), stride, padding)?;
    Ok(ConvDims {
        in_h,
        in_w,
        in_c,
        kh,
        kw,
        out_c,
        geo,
        patch_len: kh * kw * in_c,
    })
}

/// Kernel tensor `[kh, kw, cin, cout]` transposed to `[cout][kh*kw*cin]`
/// so each output channel reads one contiguous row.
fn transpose_kernels(k: &[f64], patch_len: usize, out_c: usize) -> Vec<f64> {
    let mut kt = vec![0.0; out_c * patch_len];
    for l in 0..patch_len {
        let row = &k[l * out_c..][..out_c];
        for (co, &v) in row.iter().enumerate() {
            kt[co * patch_len + l] = v;
        }
    }
    kt
}

/// Copies the receptive field at (`ih0`, `iw0`) into `patch`, zero-filling
/// out-of-bounds cells. Returns true when the whole window was in bounds
/// and spans one contiguous input run (single-row kernels), in which case
/// the caller may use the input slice directly.
#[inline]
fn gather_patch(
    x: &[f64],
    d: &ConvDims,
    ih0: isize,
    iw0: isize,
    patch: &mut [f64],
) -> bool {
    let in_bounds = ih0 >= 0
        && iw0 >= 0
        && (ih0 as usize + d.kh) <= d.in_h
        && (iw0 as usize + d.kw) <= d.in_w;
    if in_bounds && d.kh == 1 {
        return true;
    }
    if in_bounds {
        let row_len = d.kw * d.in_c;
        for dh in 0..d.kh {
            let src = ((ih0 as usize + dh) * d.in_w + iw0 as usize) * d.in_c;
            patch[dh * row_len..][..row_len].copy_from_slice(&x[src..src + row_len]);
        }
        return false;
    }
    patch.fill(0.0);
    for dh in 0..d.kh {
        let ih = ih0 + dh as isize;
        if ih < 0 || ih >= d.in_h as isize {
            continue;
        }
        for dw in 0..d.kw {
            let iw = iw0 + dw as isize;
            if iw < 0 || iw >= d.in_w as isize {
                continue;
            }
            let src = ((ih as usize) * d.in_w + iw as usize) * d.in_c;
            let dst = (dh * d.kw + dw) * d.in_c;
            patch[dst..dst + d.in_c].copy_from_slice(&x[src..src + d.in_c]);
        }
    }
    false
}

/// 2-D cross-correlation of a `[H, W, Cin]` input with `[kh, kw, Cin, Cout]`
/// kernels and a `[Cout]` bias.
pub fn conv2d(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: (usize, usize),
    padding: Padding,
) -> Result<Tensor, NumericsError> {
    let d = conv_dims(input, kernels, stride, padding)?;
    if bias.shape() != [d.out_c] {
        return Err(NumericsError::AxisMismatch {
            context: "conv2d bias",
            axis: "out_channel",
            expected: d.out_c,
            actual: bias.len(),
        });
    }
    let x = input.data();
    let b = bias.data();
    let kt = transpose_kernels(kernels.data(), d.patch_len, d.out_c);
    let mut out = Tensor::zeros(&[d.geo.out_h, d.geo.out_w, d.out_c]);
    let o = out.data_mut();
    let mut patch = vec![0.0f64; d.patch_len];

    for oh in 0..d.geo.out_h {
        let ih0 = (oh * stride.0) as isize - d.geo.pad_top as isize;
        for ow in 0..d.geo.out_w {
            let iw0 = (ow * stride.1) as isize - d.geo.pad_left as isize;
            let direct = gather_patch(x, &d, ih0, iw0, &mut patch);
            let window: &[f64] = if direct {
                let src = ((ih0 as usize) * d.in_w + iw0 as usize) * d.in_c;
                &x[src..src + d.patch_len]
            } else {
                &patch
            };
            let orow = &mut o[(oh * d.geo.out_w + ow) * d.out_c..][..d.out_c];
            for (co, ov) in orow.iter_mut().enumerate() {
                *ov = b[co] + dot8(window, &kt[co * d.patch_len..][..d.patch_len]);
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d`] with respect to input, kernels, and bias.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
    stride: (usize, usize),
    padding: Padding,
) -> Result<(Tensor, Tensor, Tensor), NumericsError> {
    let d = conv_dims(input, kernels, stride, padding)?;
    if grad_out.shape() != [d.geo.out_h, d.geo.out_w, d.out_c] {
        return Err(NumericsError::ShapeMismatch {
            context: "conv2d backward grad",
            expected: vec![d.geo.out_h, d.geo.out_w, d.out_c],
            actual: grad_out.shape().to_vec(),
        });
    }

    let x = input.data();
    let g = grad_out.data();
    let kt = transpose_kernels(kernels.data(), d.patch_len, d.out_c);
    let mut gin = Tensor::zeros(&[d.in_h, d.in_w, d.in_c]);
    let mut gkt = vec![0.0f64; d.out_c * d.patch_len];
    let mut gbias = Tensor::zeros(&[d.out_c]);
    let gi = gin.data_mut();
    let gb = gbias.data_mut();
    let mut patch = vec![0.0f64; d.patch_len];
    let mut dpatch = vec![0.0f64; d.patch_len];

    for oh in 0..d.geo.out_h {
        let ih0 = (oh * stride.0) as isize - d.geo.pad_top as isize;
        for ow in 0..d.geo.out_w {
            let iw0 = (ow * stride.1) as isize - d.geo.pad_left as isize;
            let grow = &g[(oh * d.geo.out_w + ow) * d.out_c..][..d.out_c];
            for (bi, &gv) in gb.iter_mut().zip(grow) {
                *bi += gv;
            }
            let direct = gather_patch(x, &d, ih0, iw0, &mut patch);
            let window: &[f64] = if direct {
                let src = ((ih0 as usize) * d.in_w + iw0 as usize) * d.in_c;
                &x[src..src + d.patch_len]
            } else {
                &patch
            };
            dpatch.fill(0.0);
            for (co, &gv) in grow.iter().enumerate() {
                let krow = &kt[co * d.patch_len..][..d.patch_len];
                let gkrow = &mut gkt[co * d.patch_len..][..d.patch_len];
                axpy(gkrow, gv, window);
                axpy(&mut dpatch, gv, krow);
            }
            // Scatter-add dpatch into the input gradient.
            if direct {
                let src = ((ih0 as usize) * d.in_w + iw0 as usize) * d.in_c;
                for (o, &v) in gi[src..src + d.patch_len].iter_mut().zip(&dpatch) {
                    *o += v;
                }
            } else {
                for dh in 0..d.kh {
                    let ih = ih0 + dh as isize;
                    if ih < 0 || ih >= d.in_h as isize {
                        continue;
                    }
                    for dw in 0..d.kw {
                        let iw = iw0 + dw as isize;
                        if iw < 0 || iw >= d.in_w as isize {
                            continue;
                        }
                        let dst = ((ih as usize) * d.in_w + iw as usize) * d.in_c;
                        let src = (dh * d.kw + dw) * d.in_c;
                        for ci in 0..d.in_c {
                            gi[dst + ci] += dpatch[src + ci];
                        }
                    }
                }
            }
        }
    }

    // Un-transpose the kernel gradient back to [kh, kw, cin, cout].
    let mut gker = Tensor::zeros(kernels.shape());
    let gk = gker.data_mut();
    for co in 0..d.out_c {
        let row = &gkt[co * d.patch_len..][..d.patch_len];
        for (l, &v) in row.iter().enumerate() {
            gk[l * d.out_c + co] = v;
        }
    }
    Ok((gin, gker, gbias))
}

/// Fully connected layer: `out[j] = bias[j] + sum_i input[i] * weights[i, j]`.
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, NumericsError> {
    let ws = weights.shape();
    if ws.len() != 2 {
        return Err(NumericsError::ShapeMismatch {
            context: "dense weights",
            expected: vec![0, 0],
            actual: ws.to_vec(),
        });
    }
    let (n_in, n_out) = (ws[0], ws[1]);
    if input.len() != n_in {
        return Err(NumericsError::AxisMismatch {
            context: "dense",
            axis: "input",
            expected: n_in,
            actual: input.len(),
        });
    }
    if bias.len() != n_out {
        return Err(NumericsError::AxisMismatch {
            context: "dense bias",
            axis: "output",
            expected: n_out,
            actual: bias.len(),
        });
    }
    let mut out = Tensor::zeros(&[n_out]);
    let o = out.data_mut();
    o.copy_from_slice(bias.data());
    let w = weights.data();
    for (i, &xv) in input.data().iter().enumerate() {
        let wrow = &w[i * n_out..][..n_out];
        for (ov, &wv) in o.iter_mut().zip(wrow) {
            *ov += xv * wv;
        }
    }
    Ok(out)
}

/// Gradients of [`dense`] with respect to input, weights, and bias.
pub fn dense_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NumericsError> {
    let ws = weights.shape();
    let (n_in, n_out) = (ws[0], ws[1]);
    if grad_out.len() != n_out {
        return Err(NumericsError::AxisMismatch {
            context: "dense backward",
            axis: "output",
            expected: n_out,
            actual: grad_out.len(),
        });
    }
    let w = weights.data();
    let g = grad_out.data();
    let mut gin = Tensor::zeros(&[n_in]);
    let mut gw = Tensor::zeros(ws);
    let gwd = gw.data_mut();
    for (i, gi) in gin.data_mut().iter_mut().enumerate() {
        let xv = input.data()[i];
        let wrow = &w[i * n_out..][..n_out];
        let gwrow = &mut gwd[i * n_out..][..n_out];
        let mut dot = 0.0;
        for j in 0..n_out {
            dot += wrow[j] * g[j];
            gwrow[j] += xv * g[j];
        }
        *gi = dot;
    }
    let gb = Tensor::from_vec(&[n_out], g.to_vec())?;
    Ok((gin, gw, gb))
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// ReLU gradient taken from the cached layer output (`relu'(0)` is 0).
pub fn relu_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut gin = grad_out.clone();
    for (g, &y) in gin.data_mut().iter_mut().zip(output.data()) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
    gin
}

/// Inverted-scaling dropout. Returns the masked output and the multiplier
/// mask (`0` or `1/(1-rate)`) used for the backward pass.
pub fn dropout_train(input: &Tensor, rate: f64, rng: &mut Rng) -> (Tensor, Vec<f64>) {
    let keep_scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..input.len())
        .map(|_| {
            if rng.gen::<f64>() < rate {
                0.0
            } else {
                keep_scale
            }
        })
        .collect();
    let mut out = input.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    (out, mask)
}

pub fn dropout_backward(grad_out: &Tensor, mask: &[f64]) -> Tensor {
    let mut gin = grad_out.clone();
    for (g, &m) in gin.data_mut().iter_mut().zip(mask) {
        *g *= m;
    }
    gin
}

/// Elementwise sum of two equally shaped tensors.
pub fn residual_add(a: &Tensor, b: &Tensor) -> Result<Tensor, NumericsError> {
    if a.shape() != b.shape() {
        return Err(NumericsError::ShapeMismatch {
            context: "residual_add",
            expected: a.shape().to_vec(),
            actual: b.shape().to_vec(),
        });
    }
    let mut out = a.clone();
    for (o, &bv) in out.data_mut().iter_mut().zip(b.data()) {
        *o += bv;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn conv_scalar_case_is_affine() {
        // 1x1 input [x], 1x1 kernel [w], bias [b] -> [w*x + b]
        let x = t(&[1, 1, 1], &[3.0]);
        let w = t(&[1, 1, 1, 1], &[2.0]);
        let b = t(&[1], &[0.5]);
        let y = conv2d(&x, &w, &b, (1, 1), Padding::Valid).unwrap();
        assert_eq!(y.data(), &[6.5]);
    }

    #[test]
    fn conv_identity_kernel_same_padding_is_identity() {
        // Single 1 at the kernel centre, diagonal over channels.
        let mut rng = rng_from_seed(7);
        let input = Tensor::from_vec(
            &[5, 6, 3],
            (0..5 * 6 * 3).map(|_| rng.gen::<f64>() - 0.5).collect(),
        )
        .unwrap();
        let mut k = Tensor::zeros(&[3, 3, 3, 3]);
        for c in 0..3 {
            let idx = ((1 * 3 + 1) * 3 + c) * 3 + c;
            k.data_mut()[idx] = 1.0;
        }
        let b = Tensor::zeros(&[3]);
        let y = conv2d(&input, &k, &b, (1, 1), Padding::Same).unwrap();
        assert_eq!(y.data(), input.data());
    }

    #[test]
    fn conv_valid_matches_dot_product_oracle() {
        // 1x3 input [1,2,3], kernel [1,0,-1], valid, no bias.
        // Oracle: 1*1 + 0*2 + (-1)*3 = -2.
        let x = t(&[1, 3, 1], &[1.0, 2.0, 3.0]);
        let k = t(&[1, 3, 1, 1], &[1.0, 0.0, -1.0]);
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &k, &b, (1, 1), Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[-2.0]);
    }

    #[test]
    fn conv_channel_mismatch_names_axis() {
        let x = t(&[1, 1, 2], &[1.0, 2.0]);
        let k = Tensor::zeros(&[1, 1, 3, 1]);
        let b = Tensor::zeros(&[1]);
        let err = conv2d(&x, &k, &b, (1, 1), Padding::Valid).unwrap_err();
        assert!(err.to_string().contains("channel"), "{err}");
    }

    #[test]
    fn conv_kernel_larger_than_valid_input_errors() {
        let x = t(&[1, 2, 1], &[1.0, 2.0]);
        let k = Tensor::zeros(&[1, 3, 1, 1]);
        let b = Tensor::zeros(&[1]);
        assert!(conv2d(&x, &k, &b, (1, 1), Padding::Valid).is_err());
    }

    #[test]
    fn same_padding_stride_geometry() {
        // TensorFlow convention: out = ceil(in/stride).
        let g = conv_geometry(5, 100, (3, 5), (2, 2), Padding::Same).unwrap();
        assert_eq!((g.out_h, g.out_w), (3, 50));
        let g = conv_geometry(13, 7, (3, 3), (2, 2), Padding::Same).unwrap();
        assert_eq!((g.out_h, g.out_w), (7, 4));
    }

    #[test]
    fn dense_matches_hand_affine() {
        let x = t(&[2], &[1.0, 2.0]);
        let w = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = t(&[2], &[0.1, 0.2]);
        let y = dense(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[1.0 + 6.0 + 0.1, 2.0 + 8.0 + 0.2]);
    }

    #[test]
    fn dropout_inference_identity_and_train_reproducible() {
        let x = t(&[4], &[1.0, 2.0, 3.0, 4.0]);
        let (a, mask_a) = dropout_train(&x, 0.5, &mut rng_from_seed(9));
        let (b, mask_b) = dropout_train(&x, 0.5, &mut rng_from_seed(9));
        assert_eq!(a.data(), b.data());
        assert_eq!(mask_a, mask_b);
        // Every kept element is scaled by 1/(1-rate).
        for (&m, (&orig, &out)) in mask_a.iter().zip(x.data().iter().zip(a.data())) {
            assert!(m == 0.0 || m == 2.0);
            assert_eq!(out, orig * m);
        }
    }

    #[test]
    fn residual_add_rejects_shape_mismatch() {
        let a = Tensor::zeros(&[2, 2, 1]);
        let b = Tensor::zeros(&[2, 1, 2]);
        assert!(residual_add(&a, &b).is_err());
    }
}
