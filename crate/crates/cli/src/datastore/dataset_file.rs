//! `CSIB` dataset container.
//!
//! Header: magic, version u16, N u16, K u16, sample count u64, topology
//! name, radio constants (fc, bandwidth, optional SNR), user height, base
//! seed. Body: per sample, N*K complex values as little-endian f64 pairs
//! (antenna-major), then (x, y) as f64 mm. Per-sample seeds are not stored;
//! they reconstruct as `derive_seed(base_seed, index)`.

use super::{put_f64, put_string, put_u16, put_u64, Reader, StoreError};
use csipos_core::channel::{CsiMatrix, CsiSample, Dataset, RadioConfig};
use csipos_core::rng::derive_seed;
use num_complex::Complex64;
use std::fs;
use std::path::Path;

pub const DATASET_MAGIC: [u8; 4] = *b"CSIB";
const DATASET_VERSION: u16 = 1;

/// Body size in bytes for a declared header: `count * (N*K*16 + 16)`.
pub fn dataset_body_size(n_antennas: usize, n_subcarriers: usize, count: u64) -> u64 {
    count * (n_antennas as u64 * n_subcarriers as u64 * 16 + 16)
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<(), StoreError> {
    let n = dataset.n_antennas;
    let k = dataset.n_subcarriers();
    if n > u16::MAX as usize || k > u16::MAX as usize {
        return Err(StoreError::Invalid("extents exceed u16 header fields".into()));
    }
    let mut buf = Vec::with_capacity(
        64 + dataset_body_size(n, k, dataset.len() as u64) as usize,
    );
    buf.extend_from_slice(&DATASET_MAGIC);
    put_u16(&mut buf, DATASET_VERSION);
    put_u16(&mut buf, n as u16);
    put_u16(&mut buf, k as u16);
    put_u64(&mut buf, dataset.len() as u64);
    put_string(&mut buf, &dataset.topology_name)?;
    put_f64(&mut buf, dataset.radio.fc);
    put_f64(&mut buf, dataset.radio.bandwidth);
    // SNR presence flag then value.
    put_u16(&mut buf, dataset.radio.noise_snr_db.is_some() as u16);
    put_f64(&mut buf, dataset.radio.noise_snr_db.unwrap_or(0.0));
    put_f64(&mut buf, dataset.user_height);
    put_u64(&mut buf, dataset.seed);

    for sample in &dataset.samples {
        if sample.csi.n_antennas != n || sample.csi.n_subcarriers != k {
            return Err(StoreError::Invalid(format!(
                "sample shape {}x{} does not match header {}x{}",
                sample.csi.n_antennas, sample.csi.n_subcarriers, n, k
            )));
        }
        for c in &sample.csi.data {
            put_f64(&mut buf, c.re);
            put_f64(&mut buf, c.im);
        }
        put_f64(&mut buf, sample.position[0]);
        put_f64(&mut buf, sample.position[1]);
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, StoreError> {
    let bytes = fs::read(path)?;
    let mut r = Reader::new(&bytes);
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != DATASET_MAGIC {
        return Err(StoreError::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        });
    }
    let version = r.u16("version")?;
    if version != DATASET_VERSION {
        return Err(StoreError::VersionMismatch {
            expected: DATASET_VERSION,
            found: version,
        });
    }
    let n = r.u16("antenna count")? as usize;
    let k = r.u16("subcarrier count")? as usize;
    let count = r.u64("sample count")?;
    let topology_name = r.string("topology name")?;
    let fc = r.f64("fc")?;
    let bandwidth = r.f64("bandwidth")?;
    let has_snr = r.u16("snr flag")?;
    let snr = r.f64("snr")?;
    let user_height = r.f64("user height")?;
    let seed = r.u64("seed")?;

    let body_needed = dataset_body_size(n, k, count);
    if (r.remaining() as u64) < body_needed {
        return Err(StoreError::Truncated {
            context: "sample body",
            needed: (body_needed - r.remaining() as u64) as usize,
        });
    }
    if (r.remaining() as u64) > body_needed {
        return Err(StoreError::Invalid(format!(
            "trailing garbage: {} bytes after the declared body",
            r.remaining() as u64 - body_needed
        )));
    }

    let radio = RadioConfig {
        fc,
        bandwidth,
        subcarriers: k,
        noise_snr_db: (has_snr != 0).then_some(snr),
    };
    let mut samples = Vec::with_capacity(count as usize);
    for i in 0..count {
        let mut data = Vec::with_capacity(n * k);
        for _ in 0..n * k {
            let re = r.f64("sample value")?;
            let im = r.f64("sample value")?;
            data.push(Complex64::new(re, im));
        }
        let x = r.f64("label")?;
        let y = r.f64("label")?;
        samples.push(CsiSample {
            csi: CsiMatrix {
                n_antennas: n,
                n_subcarriers: k,
                data,
            },
            position: [x, y],
            user_height,
            scenario: topology_name.clone(),
            seed: derive_seed(seed, i),
        });
    }
    Ok(Dataset {
        topology_name,
        radio,
        n_antennas: n,
        user_height,
        seed,
        samples,
    })
}
