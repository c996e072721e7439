//! `CSIM` model container.
//!
//! Header: magic, version u16, the architecture description, the init
//! seed, normalization metadata, per-layer frozen flags, and the declared
//! parameter count. Body: parameters in layer order (weights then bias) as
//! little-endian f64, then an FNV-1a 64 checksum of the body bytes.

use super::{put_f64, put_u16, put_u64, Reader, StoreError};
use csipos_core::features::{LabelMap, Normalization, N_PLANES};
use csipos_core::numerics::Model;
use csipos_core::posnet::{ArchConfig, ConvPlan};
use csipos_core::rng::fnv1a64;
use std::fs;
use std::path::Path;

pub const MODEL_MAGIC: [u8; 4] = *b"CSIM";
const MODEL_VERSION: u16 = 1;

/// A trained model together with everything needed to run it: the
/// architecture, the init seed, and the feature/label normalization.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub arch: ArchConfig,
    pub seed: u64,
    pub norm: Normalization,
    pub model: Model,
}

fn put_plans(buf: &mut Vec<u8>, plans: &[ConvPlan]) {
    put_u16(buf, plans.len() as u16);
    for p in plans {
        put_u16(buf, p.kernel.0 as u16);
        put_u16(buf, p.kernel.1 as u16);
        put_u16(buf, p.out_channels as u16);
        put_u16(buf, p.stride.0 as u16);
        put_u16(buf, p.stride.1 as u16);
    }
}

fn read_plans(r: &mut Reader) -> Result<Vec<ConvPlan>, StoreError> {
    let n = r.u16("plan count")? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(ConvPlan {
            kernel: (r.u16("kernel")? as usize, r.u16("kernel")? as usize),
            out_channels: r.u16("channels")? as usize,
            stride: (r.u16("stride")? as usize, r.u16("stride")? as usize),
        });
    }
    Ok(out)
}

pub fn save_model(saved: &SavedModel, path: &Path) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&MODEL_MAGIC);
    put_u16(&mut buf, MODEL_VERSION);

    let arch = &saved.arch;
    put_u16(&mut buf, arch.n_antennas as u16);
    put_u16(&mut buf, arch.n_subcarriers as u16);
    put_plans(&mut buf, &arch.stage1);
    put_plans(&mut buf, &arch.stage2);
    put_u16(&mut buf, arch.residual_period as u16);
    put_f64(&mut buf, arch.dropout_rate);
    for w in arch.head {
        put_u16(&mut buf, w as u16);
    }
    put_u64(&mut buf, saved.seed);

    for v in saved.norm.plane_offset {
        put_f64(&mut buf, v);
    }
    for v in saved.norm.plane_scale {
        put_f64(&mut buf, v);
    }
    let lm = &saved.norm.label_map;
    for v in [lm.x0, lm.y0, lm.extent_x, lm.extent_y] {
        put_f64(&mut buf, v);
    }

    put_u16(&mut buf, saved.model.layers.len() as u16);
    for layer in &saved.model.layers {
        buf.push(layer.frozen as u8);
    }

    let params = saved.model.flat_params();
    put_u64(&mut buf, params.len() as u64);
    let body_start = buf.len();
    for v in &params {
        put_f64(&mut buf, *v);
    }
    let checksum = fnv1a64(&buf[body_start..]);
    put_u64(&mut buf, checksum);
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SavedModel, StoreError> {
    let bytes = fs::read(path)?;
    let mut r = Reader::new(&bytes);
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MODEL_MAGIC {
        return Err(StoreError::BadMagic {
            expected: MODEL_MAGIC,
            found: magic,
        });
    }
    let version = r.u16("version")?;
    if version != MODEL_VERSION {
        return Err(StoreError::VersionMismatch {
            expected: MODEL_VERSION,
            found: version,
        });
    }
    let n_antennas = r.u16("antennas")? as usize;
    let n_subcarriers = r.u16("subcarriers")? as usize;
    let stage1 = read_plans(&mut r)?;
    let stage2 = read_plans(&mut r)?;
    let residual_period = r.u16("residual period")? as usize;
    let dropout_rate = r.f64("dropout")?;
    let head = [
        r.u16("head")? as usize,
        r.u16("head")? as usize,
        r.u16("head")? as usize,
    ];
    let seed = r.u64("seed")?;

    let mut plane_offset = [0.0; N_PLANES];
    for v in &mut plane_offset {
        *v = r.f64("plane offset")?;
    }
    let mut plane_scale = [0.0; N_PLANES];
    for v in &mut plane_scale {
        *v = r.f64("plane scale")?;
    }
    let label_map = LabelMap {
        x0: r.f64("label map")?,
        y0: r.f64("label map")?,
        extent_x: r.f64("label map")?,
        extent_y: r.f64("label map")?,
    };

    let n_layers = r.u16("layer count")? as usize;
    let frozen_bytes = r.take(n_layers, "frozen flags")?.to_vec();

    let declared = r.u64("param count")? as usize;
    let body = r.take(declared * 8, "parameter body")?;
    let stored_checksum = r.u64("checksum")?;
    let computed = fnv1a64(body);
    if stored_checksum != computed {
        return Err(StoreError::ChecksumMismatch {
            stored: stored_checksum,
            computed,
        });
    }

    let arch = ArchConfig {
        n_antennas,
        n_subcarriers,
        stage1,
        stage2,
        residual_period,
        dropout_rate,
        head,
    };
    let (specs, _) = arch
        .layer_specs()
        .map_err(|e| StoreError::Invalid(format!("stored architecture is invalid: {e}")))?;
    let mut model = Model::build(arch.input_shape(), specs)
        .map_err(|e| StoreError::Invalid(format!("stored architecture fails to build: {e}")))?;
    if model.layers.len() != n_layers {
        return Err(StoreError::Invalid(format!(
            "frozen-flag count {} does not match rebuilt layer count {}",
            n_layers,
            model.layers.len()
        )));
    }
    if model.total_param_count() != declared {
        return Err(StoreError::Invalid(format!(
            "declared param count {} does not match architecture ({})",
            declared,
            model.total_param_count()
        )));
    }
    let params: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    model
        .set_flat_params(&params)
        .map_err(|e| StoreError::Invalid(e.to_string()))?;
    for (layer, &flag) in model.layers.iter_mut().zip(&frozen_bytes) {
        layer.frozen = flag != 0;
    }

    Ok(SavedModel {
        arch,
        seed,
        norm: Normalization {
            plane_offset,
            plane_scale,
            label_map,
        },
        model,
    })
}

/// Loads a model and refuses when its architecture differs from `expected`.
pub fn load_model_expecting(
    path: &Path,
    expected: &ArchConfig,
) -> Result<SavedModel, StoreError> {
    let saved = load_model(path)?;
    if &saved.arch != expected {
        return Err(StoreError::ArchMismatch(format!(
            "stored ({} antennas, {} subcarriers, head {:?}) vs expected \
             ({} antennas, {} subcarriers, head {:?})",
            saved.arch.n_antennas,
            saved.arch.n_subcarriers,
            saved.arch.head,
            expected.n_antennas,
            expected.n_subcarriers,
            expected.head
        )));
    }
    Ok(saved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use csipos_core::channel::Area;
    use csipos_core::features::FeatureTensor;
    use csipos_core::numerics::Tensor;
    use csipos_core::posnet::{build_positioning_cnn, predict, split_for_transfer};
    use tempfile::tempdir;

    fn trained_stub() -> SavedModel {
        let arch = ArchConfig::desk(8, 8);
        let mut model = build_positioning_cnn(&arch, 21).unwrap();
        split_for_transfer(&mut model, 3).unwrap();
        let norm = Normalization {
            plane_offset: [0.0, 0.1, 0.2, 0.0, -0.5, 1.0],
            plane_scale: [1.0, 2.0, 3.0, 1.0, 0.5, 1.5],
            label_map: LabelMap {
                x0: -625.0,
                y0: 1000.0,
                extent_x: 1250.0,
                extent_y: 1250.0,
            },
        };
        SavedModel {
            arch,
            seed: 21,
            norm,
            model,
        }
    }

    #[test]
    fn roundtrip_preserves_predictions_and_flags() {
        let saved = trained_stub();
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csim");
        save_model(&saved, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.arch, saved.arch);
        assert_eq!(back.seed, saved.seed);
        assert_eq!(back.norm, saved.norm);
        assert_eq!(back.model.flat_params(), saved.model.flat_params());
        let frozen: Vec<bool> = back.model.layers.iter().map(|l| l.frozen).collect();
        let expect: Vec<bool> = saved.model.layers.iter().map(|l| l.frozen).collect();
        assert_eq!(frozen, expect);

        let input = FeatureTensor {
            tensor: Tensor::from_vec(
                &[8, 8, 6],
                (0..8 * 8 * 6).map(|i| (i as f64).sin()).collect(),
            )
            .unwrap(),
        };
        assert_eq!(
            predict(&back.model, &input).unwrap(),
            predict(&saved.model, &input).unwrap()
        );
    }

    #[test]
    fn flipped_body_byte_is_a_checksum_error() {
        let saved = trained_stub();
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csim");
        save_model(&saved, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() - 100; // inside the parameter body
        bytes[mid] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_model(&path).unwrap_err(),
            StoreError::ChecksumMismatch { .. }
        ));
    }

    #[test]
    fn arch_mismatch_refuses_with_explanation() {
        let saved = trained_stub();
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csim");
        save_model(&saved, &path).unwrap();
        let other = ArchConfig::desk(16, 8);
        let err = load_model_expecting(&path, &other).unwrap_err();
        match err {
            StoreError::ArchMismatch(msg) => {
                assert!(msg.contains("16 antennas"), "{msg}");
            }
            other => panic!("expected arch mismatch, got {other}"),
        }
        assert!(load_model_expecting(&path, &saved.arch).is_ok());
    }

    #[test]
    fn area_helper_matches_label_map() {
        // LabelMap and Area describe the same rectangle.
        let a = Area::desk_default();
        let lm = LabelMap::from_area(&a);
        assert_eq!(lm.x0, a.x0);
        assert_eq!(lm.extent_y, a.extent_y);
    }
}
