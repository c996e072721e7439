//! Property tests for the binary containers: random shapes and values —
//! including subnormals and signed zeros — must round-trip bit-exactly,
//! and corrupted files must be rejected rather than partially read.

use csipos_cli::datastore::{
    load_model, read_dataset, save_model, write_dataset, SavedModel, StoreError,
};
use csipos_core::channel::{CsiMatrix, CsiSample, Dataset, RadioConfig};
use csipos_core::features::{LabelMap, Normalization};
use csipos_core::posnet::{build_positioning_cnn, ArchConfig};
use csipos_core::rng::derive_seed;
use num_complex::Complex64;
use proptest::prelude::*;

/// f64 values that stress the containers: ordinary magnitudes plus
/// signed zeros and subnormals.
fn edge_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -1e6..1e6f64,
        1 => Just(0.0f64),
        1 => Just(-0.0f64),
        1 => Just(f64::MIN_POSITIVE / 2.0),   // subnormal
        1 => Just(-f64::MIN_POSITIVE / 4.0),  // subnormal
        1 => Just(1e-300f64),
        1 => Just(-1e300f64),
    ]
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..6, 2usize..7, 1usize..5).prop_flat_map(|(n, k, count)| {
        let values = proptest::collection::vec(edge_f64(), count * (n * k * 2 + 2));
        (Just(n), Just(k), Just(count), values, any::<u64>()).prop_map(
            |(n, k, count, values, seed)| {
                let mut it = values.into_iter();
                let samples = (0..count)
                    .map(|i| {
                        let data: Vec<Complex64> = (0..n * k)
                            .map(|_| {
                                Complex64::new(it.next().unwrap(), it.next().unwrap())
                            })
                            .collect();
                        CsiSample {
                            csi: CsiMatrix {
                                n_antennas: n,
                                n_subcarriers: k,
                                data,
                            },
                            position: [it.next().unwrap(), it.next().unwrap()],
                            user_height: 200.0,
                            scenario: "URA".to_string(),
                            seed: derive_seed(seed, i as u64),
                        }
                    })
                    .collect();
                Dataset {
                    topology_name: "URA".to_string(),
                    radio: RadioConfig {
                        subcarriers: k,
                        ..RadioConfig::default()
                    },
                    n_antennas: n,
                    user_height: 200.0,
                    seed,
                    samples,
                }
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dataset_roundtrip_is_bit_exact(ds in arb_dataset()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csib");
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        // Bit-exact: compare the raw bit patterns, not PartialEq (which
        // treats -0.0 == 0.0).
        prop_assert_eq!(back.samples.len(), ds.samples.len());
        for (a, b) in back.samples.iter().zip(&ds.samples) {
            for (x, y) in a.csi.data.iter().zip(&b.csi.data) {
                prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
            prop_assert_eq!(a.position[0].to_bits(), b.position[0].to_bits());
            prop_assert_eq!(a.position[1].to_bits(), b.position[1].to_bits());
        }
        prop_assert_eq!(&back.topology_name, &ds.topology_name);
        prop_assert_eq!(back.seed, ds.seed);
    }

    #[test]
    fn truncated_dataset_never_partially_reads(ds in arb_dataset(), cut in 1usize..64) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csib");
        write_dataset(&ds, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = cut.min(bytes.len() - 1);
        std::fs::write(&path, &bytes[..bytes.len() - cut]).unwrap();
        prop_assert!(read_dataset(&path).is_err());
    }
}

fn arb_saved_model() -> impl Strategy<Value = SavedModel> {
    (1usize..3, any::<u64>(), proptest::collection::vec(edge_f64(), 16)).prop_map(
        |(size, seed, norm_vals)| {
            let arch = ArchConfig::desk(4 * size, 8);
            let mut model = build_positioning_cnn(&arch, seed).unwrap();
            // Freeze a couple of layers so flags are exercised.
            model.layers[0].frozen = true;
            model.layers[2].frozen = true;
            let mut it = norm_vals.into_iter();
            let mut offset = [0.0; 6];
            let mut scale = [1.0; 6];
            for v in &mut offset {
                *v = it.next().unwrap();
            }
            for v in &mut scale {
                *v = it.next().unwrap().abs().max(1e-12);
            }
            SavedModel {
                arch,
                seed,
                norm: Normalization {
                    plane_offset: offset,
                    plane_scale: scale,
                    label_map: LabelMap {
                        x0: it.next().unwrap(),
                        y0: it.next().unwrap(),
                        extent_x: 1250.0,
                        extent_y: 1250.0,
                    },
                },
                model,
            }
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn model_roundtrip_is_bit_exact(saved in arb_saved_model()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csim");
        save_model(&saved, &path).unwrap();
        let back = load_model(&path).unwrap();
        let a = back.model.flat_params();
        let b = saved.model.flat_params();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        let fa: Vec<bool> = back.model.layers.iter().map(|l| l.frozen).collect();
        let fb: Vec<bool> = saved.model.layers.iter().map(|l| l.frozen).collect();
        prop_assert_eq!(fa, fb);
        prop_assert_eq!(back.seed, saved.seed);
        for p in 0..6 {
            prop_assert_eq!(
                back.norm.plane_offset[p].to_bits(),
                saved.norm.plane_offset[p].to_bits()
            );
            prop_assert_eq!(
                back.norm.plane_scale[p].to_bits(),
                saved.norm.plane_scale[p].to_bits()
            );
        }
    }

    #[test]
    fn corrupted_model_body_is_rejected(saved in arb_saved_model(), flip in 0usize..64) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csim");
        save_model(&saved, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Flip a bit inside the parameter body (it ends 8 bytes before the
        // trailing checksum).
        let body_end = bytes.len() - 8;
        let target = body_end - 1 - (flip % 64);
        bytes[target] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_model(&path).unwrap_err();
        prop_assert!(
            matches!(err, StoreError::ChecksumMismatch { .. }),
            "expected checksum error, got {err}"
        );
    }
}
