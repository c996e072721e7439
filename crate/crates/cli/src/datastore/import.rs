//! Import adapter for externally supplied CSI arrays.
//!
//! Accepts a raw headerless file of little-endian complex-f64 values
//! (antenna-major, sample after sample) plus a sidecar text file:
//!
//! ```text
//! n = 64
//! k = 100
//! count = 252004
//! labels = positions.txt     # one "x y" mm pair per line
//! name = URA
//! fc = 2.61e9
//! bandwidth = 20e6
//! user_height_mm = 200
//! ```
//!
//! The label file must have exactly `count` lines. The measured campaign's
//! own distribution format is outside this crate; this sidecar convention
//! is the documented bridge into the `CSIB` container.

use super::StoreError;
use csipos_core::channel::{CsiMatrix, CsiSample, Dataset, RadioConfig};
use num_complex::Complex64;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

struct Sidecar {
    n: usize,
    k: usize,
    count: usize,
    labels: String,
    name: String,
    fc: f64,
    bandwidth: f64,
    user_height_mm: f64,
}

fn parse_sidecar(path: &Path) -> Result<Sidecar, StoreError> {
    let text = fs::read_to_string(path)?;
    let mut n = None;
    let mut k = None;
    let mut count = None;
    let mut labels = None;
    let mut name = "imported".to_string();
    let mut fc = 2.61e9;
    let mut bandwidth = 20e6;
    let mut user_height_mm = 200.0;
    let mut seen = BTreeSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(StoreError::Config {
                line: lineno + 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(StoreError::Config {
                line: lineno + 1,
                message: format!("duplicate key '{key}'"),
            });
        }
        let bad = |k: &str, v: &str| StoreError::Config {
            line: lineno + 1,
            message: format!("key '{k}': cannot parse '{v}'"),
        };
        match key {
            "n" => n = Some(value.parse().map_err(|_| bad(key, value))?),
            "k" => k = Some(value.parse().map_err(|_| bad(key, value))?),
            "count" => count = Some(value.parse().map_err(|_| bad(key, value))?),
            "labels" => labels = Some(value.to_string()),
            "name" => name = value.to_string(),
            "fc" => fc = value.parse().map_err(|_| bad(key, value))?,
            "bandwidth" => bandwidth = value.parse().map_err(|_| bad(key, value))?,
            "user_height_mm" => user_height_mm = value.parse().map_err(|_| bad(key, value))?,
            other => {
                return Err(StoreError::Config {
                    line: lineno + 1,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
    }
    let missing = |what: &str| StoreError::Invalid(format!("sidecar is missing '{what}'"));
    Ok(Sidecar {
        n: n.ok_or_else(|| missing("n"))?,
        k: k.ok_or_else(|| missing("k"))?,
        count: count.ok_or_else(|| missing("count"))?,
        labels: labels.ok_or_else(|| missing("labels"))?,
        name,
        fc,
        bandwidth,
        user_height_mm,
    })
}

/// Converts a raw complex array plus sidecar into an in-memory dataset.
/// Label paths are resolved relative to the sidecar's directory.
pub fn import_raw(data_path: &Path, sidecar_path: &Path) -> Result<Dataset, StoreError> {
    let sc = parse_sidecar(sidecar_path)?;
    let bytes = fs::read(data_path)?;
    let expected = sc.count * sc.n * sc.k * 16;
    if bytes.len() < expected {
        return Err(StoreError::Truncated {
            context: "raw CSI body",
            needed: expected - bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(StoreError::Invalid(format!(
            "raw file has {} trailing bytes beyond n*k*count complex values",
            bytes.len() - expected
        )));
    }

    let label_path = sidecar_path
        .parent()
        .map(|d| d.join(&sc.labels))
        .unwrap_or_else(|| sc.labels.clone().into());
    let label_text = fs::read_to_string(&label_path)?;
    let mut positions = Vec::with_capacity(sc.count);
    for (lineno, line) in label_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<f64, StoreError> {
            tok.and_then(|t| t.parse().ok()).ok_or(StoreError::Config {
                line: lineno + 1,
                message: format!("label line '{line}' is not 'x y'"),
            })
        };
        let x = parse(it.next())?;
        let y = parse(it.next())?;
        positions.push([x, y]);
    }
    if positions.len() != sc.count {
        return Err(StoreError::Invalid(format!(
            "label file has {} entries, sidecar declares {}",
            positions.len(),
            sc.count
        )));
    }

    let mut samples = Vec::with_capacity(sc.count);
    let stride = sc.n * sc.k * 16;
    for (i, position) in positions.into_iter().enumerate() {
        let chunk = &bytes[i * stride..(i + 1) * stride];
        let data: Vec<Complex64> = chunk
            .chunks_exact(16)
            .map(|pair| {
                Complex64::new(
                    f64::from_le_bytes(pair[..8].try_into().unwrap()),
                    f64::from_le_bytes(pair[8..].try_into().unwrap()),
                )
            })
            .collect();
        samples.push(CsiSample {
            csi: CsiMatrix {
                n_antennas: sc.n,
                n_subcarriers: sc.k,
                data,
            },
            position,
            user_height: sc.user_height_mm,
            scenario: sc.name.clone(),
            seed: i as u64,
        });
    }
    Ok(Dataset {
        topology_name: sc.name,
        radio: RadioConfig {
            fc: sc.fc,
            bandwidth: sc.bandwidth,
            subcarriers: sc.k,
            noise_snr_db: None,
        },
        n_antennas: sc.n,
        user_height: sc.user_height_mm,
        seed: 0,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;
    use tempfile::tempdir;

    #[test]
    fn imports_a_tiny_raw_array() {
        let dir = tempdir().unwrap();
        let raw = dir.path().join("csi.bin");
        let sidecar = dir.path().join("csi.meta");
        let labels = dir.path().join("pos.txt");

        // 2 samples of 2x3 complex values.
        let mut bytes = Vec::new();
        for v in 0..(2 * 2 * 3 * 2) {
            bytes.extend_from_slice(&(v as f64 * 0.5).to_le_bytes());
        }
        fs::write(&raw, &bytes).unwrap();
        let mut f = fs::File::create(&labels).unwrap();
        writeln!(f, "10.0 20.0").unwrap();
        writeln!(f, "-5.5 1400.0").unwrap();
        fs::write(
            &sidecar,
            "n = 2\nk = 3\ncount = 2\nlabels = pos.txt\nname = measured\n",
        )
        .unwrap();

        let ds = import_raw(&raw, &sidecar).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.n_antennas, 2);
        assert_eq!(ds.n_subcarriers(), 3);
        assert_eq!(ds.samples[0].position, [10.0, 20.0]);
        assert_eq!(ds.samples[1].position, [-5.5, 1400.0]);
        assert_eq!(ds.samples[0].csi.at(0, 0), Complex64::new(0.0, 0.5));
        assert_eq!(ds.samples[1].csi.at(1, 2), Complex64::new(22.0, 22.5));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let raw = dir.path().join("csi.bin");
        let sidecar = dir.path().join("csi.meta");
        let labels = dir.path().join("pos.txt");
        fs::write(&raw, [0u8; 16]).unwrap();
        fs::write(&labels, "1 2\n").unwrap();
        fs::write(&sidecar, "n = 2\nk = 2\ncount = 1\nlabels = pos.txt\n").unwrap();
        assert!(matches!(
            import_raw(&raw, &sidecar).unwrap_err(),
            StoreError::Truncated { .. }
        ));
    }

    #[test]
    fn label_count_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let raw = dir.path().join("csi.bin");
        let sidecar = dir.path().join("csi.meta");
        let labels = dir.path().join("pos.txt");
        fs::write(&raw, vec![0u8; 2 * 2 * 2 * 16]).unwrap();
        fs::write(&labels, "1 2\n").unwrap();
        fs::write(&sidecar, "n = 2\nk = 2\ncount = 2\nlabels = pos.txt\n").unwrap();
        let err = import_raw(&raw, &sidecar).unwrap_err();
        assert!(err.to_string().contains("label file"), "{err}");
    }
}
