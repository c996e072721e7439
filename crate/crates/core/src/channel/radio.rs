//! Radio parameters and subcarrier layout.

use super::ChannelError;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Carrier/bandwidth/subcarrier configuration.
///
/// Defaults follow the measurement campaign (2.61 GHz, 20 MHz); the
/// subcarrier count defaults to the desk-scale 16 rather than the measured
/// 100 to keep generated datasets small. `RadioConfig::measured()` restores
/// K = 100.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    /// Centre frequency in Hz.
    pub fc: f64,
    /// Bandwidth in Hz.
    pub bandwidth: f64,
    /// Number of evenly spaced subcarriers across the band.
    pub subcarriers: usize,
    /// Complex white noise level; `None` means noise-free.
    pub noise_snr_db: Option<f64>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            fc: 2.61e9,
            bandwidth: 20e6,
            subcarriers: 16,
            noise_snr_db: None,
        }
    }
}

impl RadioConfig {
    /// Configuration of the measured campaign: K = 100 subcarriers.
    pub fn measured() -> Self {
        RadioConfig {
            subcarriers: 100,
            ..RadioConfig::default()
        }
    }

    /// Carrier wavelength in mm, computed as c / fc.
    ///
    /// For fc = 2.61 GHz this is 114.86 mm. (A published value of 114.56 mm
    /// circulates for the same carrier; c/fc is used throughout and both
    /// constants are worth reporting side by side in logs.)
    pub fn wavelength_mm(&self) -> f64 {
        SPEED_OF_LIGHT_M_S / self.fc * 1000.0
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.fc <= 0.0 || self.bandwidth <= 0.0 {
            return Err(ChannelError::Config(
                "fc and bandwidth must be positive".into(),
            ));
        }
        if self.subcarriers < 2 {
            return Err(ChannelError::Config(format!(
                "subcarrier count must be >= 2, got {}",
                self.subcarriers
            )));
        }
        Ok(())
    }
}

/// Subcarrier frequencies in Hz: `f_k = fc - BW/2 + k * BW/(K-1)`, spanning
/// the band edges inclusively.
pub fn subcarrier_frequencies(radio: &RadioConfig) -> Vec<f64> {
    let k = radio.subcarriers;
    let step = radio.bandwidth / (k as f64 - 1.0);
    let start = radio.fc - radio.bandwidth / 2.0;
    (0..k).map(|i| start + i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_subcarriers_hit_band_edges() {
        let radio = RadioConfig {
            subcarriers: 2,
            ..RadioConfig::default()
        };
        let f = subcarrier_frequencies(&radio);
        assert_eq!(f, vec![2.600e9, 2.620e9]);
    }

    #[test]
    fn odd_count_has_fc_in_the_middle() {
        let radio = RadioConfig {
            subcarriers: 3,
            ..RadioConfig::default()
        };
        let f = subcarrier_frequencies(&radio);
        assert_eq!(f[1], 2.61e9);
    }

    #[test]
    fn measured_spacing_is_bw_over_99() {
        let f = subcarrier_frequencies(&RadioConfig::measured());
        assert_eq!(f.len(), 100);
        let expect = 20e6 / 99.0;
        for w in f.windows(2) {
            assert!((w[1] - w[0] - expect).abs() < 1e-3);
        }
    }

    #[test]
    fn wavelength_is_c_over_fc() {
        let radio = RadioConfig::default();
        let lambda = radio.wavelength_mm();
        // 299792458 / 2.61e9 * 1000, long division by hand
        assert!((lambda - 114.863_010_727_969_35).abs() < 1e-9, "{lambda}");
    }

    #[test]
    fn single_subcarrier_rejected() {
        let radio = RadioConfig {
            subcarriers: 1,
            ..RadioConfig::default()
        };
        assert!(radio.validate().is_err());
    }
}
