//! Train-split statistics for feature standardization and the affine label
//! map between mm coordinates and the unit square.

use super::{FeatureTensor, N_PLANES, PLANE_PHASE};
use crate::channel::Area;
use crate::numerics::NumericsError;

/// Affine map from user-area mm coordinates onto `[0, 1]^2` and back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelMap {
    pub x0: f64,
    pub y0: f64,
    pub extent_x: f64,
    pub extent_y: f64,
}

impl LabelMap {
    pub fn from_area(area: &Area) -> Self {
        LabelMap {
            x0: area.x0,
            y0: area.y0,
            extent_x: area.extent_x,
            extent_y: area.extent_y,
        }
    }

    pub fn normalize(&self, pos_mm: [f64; 2]) -> [f64; 2] {
        [
            (pos_mm[0] - self.x0) / self.extent_x,
            (pos_mm[1] - self.y0) / self.extent_y,
        ]
    }

    pub fn denormalize(&self, unit: [f64; 2]) -> [f64; 2] {
        [
            self.x0 + unit[0] * self.extent_x,
            self.y0 + unit[1] * self.extent_y,
        ]
    }
}

/// Per-plane standardization constants fitted on the training split only.
///
/// Planes are shifted by `offset` and divided by `scale` to zero mean and
/// unit variance; the phase plane keeps offset 0 / scale 1 (it is already
/// bounded). A zero-variance plane gets scale 1 so values collapse to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub plane_offset: [f64; N_PLANES],
    pub plane_scale: [f64; N_PLANES],
    pub label_map: LabelMap,
}

impl Normalization {
    /// Fits plane statistics over the given (training) tensors.
    pub fn fit(tensors: &[FeatureTensor], area: &Area) -> Result<Self, NumericsError> {
        if tensors.is_empty() {
            return Err(NumericsError::Config(
                "cannot fit normalization on an empty training split".into(),
            ));
        }
        let mut sum = [0.0; N_PLANES];
        let mut count = 0usize;
        for t in tensors {
            for chunk in t.tensor.data().chunks_exact(N_PLANES) {
                for (s, v) in sum.iter_mut().zip(chunk) {
                    *s += v;
                }
            }
            count += t.tensor.len() / N_PLANES;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var_sum = [0.0; N_PLANES];
        for t in tensors {
            for chunk in t.tensor.data().chunks_exact(N_PLANES) {
                for (p, (vs, v)) in var_sum.iter_mut().zip(chunk).enumerate() {
                    let d = v - mean[p];
                    *vs += d * d;
                }
            }
        }
        let mut plane_offset = [0.0; N_PLANES];
        let mut plane_scale = [1.0; N_PLANES];
        for p in 0..N_PLANES {
            if p == PLANE_PHASE {
                continue;
            }
            let var = var_sum[p] / count as f64;
            plane_offset[p] = mean[p];
            plane_scale[p] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Normalization {
            plane_offset,
            plane_scale,
            label_map: LabelMap::from_area(area),
        })
    }

    /// Standardizes a tensor in place.
    pub fn apply(&self, t: &mut FeatureTensor) {
        for chunk in t.tensor.data_mut().chunks_exact_mut(N_PLANES) {
            for (p, v) in chunk.iter_mut().enumerate() {
                *v = (*v - self.plane_offset[p]) / self.plane_scale[p];
            }
        }
    }

    pub fn normalize_label(&self, pos_mm: [f64; 2]) -> [f64; 2] {
        self.label_map.normalize(pos_mm)
    }

    pub fn denormalize_label(&self, unit: [f64; 2]) -> [f64; 2] {
        self.label_map.denormalize(unit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn tensor_of_plane_values(values: &[f64], plane: usize) -> FeatureTensor {
        // one antenna, len(values) subcarriers, target plane set, rest zero
        let k = values.len();
        let mut t = Tensor::zeros(&[1, k, N_PLANES]);
        for (i, &v) in values.iter().enumerate() {
            t.data_mut()[i * N_PLANES + plane] = v;
        }
        FeatureTensor { tensor: t }
    }

    fn desk_area() -> Area {
        Area {
            x0: -625.0,
            y0: 1000.0,
            extent_x: 1250.0,
            extent_y: 1250.0,
        }
    }

    #[test]
    fn standardization_maps_mean_plus_sigma_to_one() {
        // Plane values {3, 7}: mean 5, population std 2; 7 -> 1.0.
        let train = vec![tensor_of_plane_values(&[3.0, 7.0], 0)];
        let norm = Normalization::fit(&train, &desk_area()).unwrap();
        assert_eq!(norm.plane_offset[0], 5.0);
        assert_eq!(norm.plane_scale[0], 2.0);
        let mut t = tensor_of_plane_values(&[7.0], 0);
        norm.apply(&mut t);
        assert_eq!(t.plane_value(0, 0, 0), 1.0);
    }

    #[test]
    fn phase_plane_is_left_unscaled() {
        let train = vec![tensor_of_plane_values(&[0.5, 2.5], PLANE_PHASE)];
        let norm = Normalization::fit(&train, &desk_area()).unwrap();
        assert_eq!(norm.plane_offset[PLANE_PHASE], 0.0);
        assert_eq!(norm.plane_scale[PLANE_PHASE], 1.0);
    }

    #[test]
    fn zero_variance_plane_gets_unit_scale() {
        let train = vec![tensor_of_plane_values(&[4.0, 4.0], 2)];
        let norm = Normalization::fit(&train, &desk_area()).unwrap();
        assert_eq!(norm.plane_offset[2], 4.0);
        assert_eq!(norm.plane_scale[2], 1.0);
        let mut t = tensor_of_plane_values(&[4.0], 2);
        norm.apply(&mut t);
        assert_eq!(t.plane_value(0, 0, 2), 0.0);
    }

    #[test]
    fn corner_label_maps_to_origin() {
        let norm = Normalization::fit(
            &[tensor_of_plane_values(&[1.0], 0)],
            &desk_area(),
        )
        .unwrap();
        assert_eq!(norm.normalize_label([-625.0, 1000.0]), [0.0, 0.0]);
        assert_eq!(norm.normalize_label([625.0, 2250.0]), [1.0, 1.0]);
    }

    #[test]
    fn label_roundtrip_within_1e9() {
        let norm = Normalization::fit(
            &[tensor_of_plane_values(&[1.0], 0)],
            &desk_area(),
        )
        .unwrap();
        let cases = [[-625.0, 1000.0], [0.0, 1625.0], [413.7, 2101.3]];
        for pos in cases {
            let back = norm.denormalize_label(norm.normalize_label(pos));
            assert!((back[0] - pos[0]).abs() < 1e-9);
            assert!((back[1] - pos[1]).abs() < 1e-9);
        }
    }
}
