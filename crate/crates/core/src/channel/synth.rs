//! Per-position CSI synthesis under the free-space LoS model.

use super::radio::{subcarrier_frequencies, RadioConfig, SPEED_OF_LIGHT_M_S};
use super::topology::Topology;
use super::ChannelError;
use crate::rng::rng_from_seed;
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Complex channel matrix, antenna-major: entry `(n, k)` sits at
/// `data[n * n_subcarriers + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix {
    pub n_antennas: usize,
    pub n_subcarriers: usize,
    pub data: Vec<Complex64>,
}

impl CsiMatrix {
    pub fn zeros(n_antennas: usize, n_subcarriers: usize) -> Self {
        CsiMatrix {
            n_antennas,
            n_subcarriers,
            data: vec![Complex64::new(0.0, 0.0); n_antennas * n_subcarriers],
        }
    }

    #[inline]
    pub fn at(&self, antenna: usize, subcarrier: usize) -> Complex64 {
        self.data[antenna * self.n_subcarriers + subcarrier]
    }

    pub fn row(&self, antenna: usize) -> &[Complex64] {
        &self.data[antenna * self.n_subcarriers..][..self.n_subcarriers]
    }

    /// Mean squared magnitude over all entries.
    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.data.len() as f64
    }
}

/// One labelled channel snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSample {
    pub csi: CsiMatrix,
    /// Ground-truth user position (x, y) in mm, URA-centered frame.
    pub position: [f64; 2],
    pub user_height: f64,
    /// Topology name the sample was generated under.
    pub scenario: String,
    pub seed: u64,
}

/// Free-space LoS response of a single element at distance `d_mm` and
/// frequency `f_hz`: amplitude `lambda / (4 pi d)` with the true
/// propagation phase `-2 pi f d / c`.
pub fn los_response(d_mm: f64, f_hz: f64) -> Complex64 {
    let lambda_mm = SPEED_OF_LIGHT_M_S / f_hz * 1000.0;
    let amplitude = lambda_mm / (4.0 * PI * d_mm);
    let phase = -2.0 * PI * f_hz * (d_mm / 1000.0) / SPEED_OF_LIGHT_M_S;
    Complex64::from_polar(amplitude, phase)
}

/// Synthesizes the channel matrix for one user position.
///
/// The user antenna sits at `(x, y, user_height_mm)`. Noise-free output is
/// deterministic for a given geometry; with `noise_snr_db` set, complex
/// white noise scaled to the matrix's mean signal power is added from the
/// seed's stream.
pub fn synth_csi(
    topology: &Topology,
    radio: &RadioConfig,
    user_pos: [f64; 2],
    user_height_mm: f64,
    seed: u64,
) -> Result<CsiSample, ChannelError> {
    radio.validate()?;
    let freqs = subcarrier_frequencies(radio);
    let n = topology.n_antennas();
    let k = radio.subcarriers;
    let mut csi = CsiMatrix::zeros(n, k);

    for (ant, element) in topology.elements.iter().enumerate() {
        let dx = user_pos[0] - element[0];
        let dy = user_pos[1] - element[1];
        let dz = user_height_mm - element[2];
        let d = (dx * dx + dy * dy + dz * dz).sqrt();
        if d == 0.0 {
            return Err(ChannelError::Singularity { element: ant });
        }
        let row = &mut csi.data[ant * k..][..k];
        for (slot, &f) in row.iter_mut().zip(&freqs) {
            *slot = los_response(d, f);
        }
    }

    if let Some(snr_db) = radio.noise_snr_db {
        let signal_power = csi.mean_power();
        let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
        // Per complex sample: variance noise_power split over re/im.
        let sigma = (noise_power / 2.0).sqrt();
        let mut rng = rng_from_seed(seed);
        for slot in &mut csi.data {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *slot += Complex64::new(re * sigma, im * sigma);
        }
    }

    Ok(CsiSample {
        csi,
        position: user_pos,
        user_height: user_height_mm,
        scenario: topology.name.clone(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::topology::{build_topology, GeometryConfig, TopologyKind};

    fn radio_k2() -> RadioConfig {
        RadioConfig {
            subcarriers: 2,
            ..RadioConfig::default()
        }
    }

    #[test]
    fn symmetric_elements_give_identical_rows() {
        // ULA elements mirrored about x = 0 see the same distance for a
        // user on the perpendicular bisector; rows must match bit-exactly.
        let t = build_topology(TopologyKind::Ula, &GeometryConfig::default()).unwrap();
        let s = synth_csi(&t, &radio_k2(), [0.0, 1500.0], 200.0, 1).unwrap();
        for n in 0..32 {
            assert_eq!(s.csi.row(n), s.csi.row(63 - n), "rows {n} / {}", 63 - n);
        }
    }

    #[test]
    fn amplitude_follows_inverse_distance() {
        let h1 = los_response(1000.0, 2.61e9);
        let h2 = los_response(2000.0, 2.61e9);
        let ratio = h1.norm() / h2.norm();
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_response_oracle() {
        // Element at origin, user 1000 mm away broadside, single frequency.
        // |H| = lambda / (4 pi 1000), phase = -2 pi frac(1000 / lambda).
        let f = 2.61e9;
        let lambda = SPEED_OF_LIGHT_M_S / f * 1000.0;
        let h = los_response(1000.0, f);
        let expect_amp = lambda / (4.0 * PI * 1000.0);
        assert!((h.norm() - expect_amp).abs() < 1e-15);
        let cycles = 1000.0 / lambda;
        let mut expect_phase = -2.0 * PI * cycles.fract();
        if expect_phase <= -PI {
            expect_phase += 2.0 * PI;
        }
        assert!(
            (h.arg() - expect_phase).abs() < 1e-9,
            "{} vs {}",
            h.arg(),
            expect_phase
        );
    }

    #[test]
    fn zero_distance_is_a_singularity_error() {
        let mut t = build_topology(TopologyKind::Ula, &GeometryConfig::default()).unwrap();
        t.elements[3] = [0.0, 1500.0, 200.0];
        let err = synth_csi(&t, &radio_k2(), [0.0, 1500.0], 200.0, 1).unwrap_err();
        assert!(matches!(err, ChannelError::Singularity { element: 3 }));
    }

    #[test]
    fn noise_free_output_ignores_seed() {
        let t = build_topology(TopologyKind::Ura, &GeometryConfig::default()).unwrap();
        let a = synth_csi(&t, &radio_k2(), [100.0, 1400.0], 200.0, 1).unwrap();
        let b = synth_csi(&t, &radio_k2(), [100.0, 1400.0], 200.0, 999).unwrap();
        assert_eq!(a.csi, b.csi);
    }

    #[test]
    fn noisy_output_is_seeded_and_reproducible() {
        let t = build_topology(TopologyKind::Ura, &GeometryConfig::default()).unwrap();
        let radio = RadioConfig {
            subcarriers: 4,
            noise_snr_db: Some(20.0),
            ..RadioConfig::default()
        };
        let a = synth_csi(&t, &radio, [100.0, 1400.0], 200.0, 7).unwrap();
        let b = synth_csi(&t, &radio, [100.0, 1400.0], 200.0, 7).unwrap();
        let c = synth_csi(&t, &radio, [100.0, 1400.0], 200.0, 8).unwrap();
        assert_eq!(a.csi, b.csi);
        assert_ne!(a.csi, c.csi);
    }

    #[test]
    fn measured_noise_snr_is_close_to_requested_over_seeds() {
        let t = build_topology(TopologyKind::Ura, &GeometryConfig::default()).unwrap();
        let clean_radio = RadioConfig {
            subcarriers: 4,
            ..RadioConfig::default()
        };
        let clean = synth_csi(&t, &clean_radio, [0.0, 1600.0], 200.0, 0).unwrap();
        let radio = RadioConfig {
            noise_snr_db: Some(15.0),
            ..clean_radio
        };
        let signal_power = clean.csi.mean_power();
        let mut noise_power_sum = 0.0;
        let n_seeds = 120;
        for seed in 0..n_seeds {
            let noisy = synth_csi(&t, &radio, [0.0, 1600.0], 200.0, seed).unwrap();
            let noise_power: f64 = noisy
                .csi
                .data
                .iter()
                .zip(&clean.csi.data)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / noisy.csi.data.len() as f64;
            noise_power_sum += noise_power;
        }
        let measured_snr_db = 10.0 * (signal_power / (noise_power_sum / n_seeds as f64)).log10();
        assert!(
            (measured_snr_db - 15.0).abs() < 1.0,
            "measured {measured_snr_db} dB"
        );
    }

    #[test]
    fn far_broadside_ula_phase_spread_is_tiny() {
        // 1e9 mm standoff: curvature across the 4.4 m aperture is far below
        // one phase cycle, so per-subcarrier phases agree across elements.
        let t = build_topology(TopologyKind::Ula, &GeometryConfig::default()).unwrap();
        let radio = radio_k2();
        let s = synth_csi(&t, &radio, [0.0, 1.0e9], 930.0, 1).unwrap();
        for k in 0..radio.subcarriers {
            let reference = s.csi.at(0, k);
            for n in 1..64 {
                // Wrap-safe phase difference via the conjugate product.
                let delta = (s.csi.at(n, k) * reference.conj()).arg().abs();
                assert!(delta < 1e-3, "subcarrier {k}, antenna {n}: {delta}");
            }
        }
    }
}
