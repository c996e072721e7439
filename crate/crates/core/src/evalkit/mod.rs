//! Evaluation artifacts: mean error in mm and wavelengths, empirical error
//! CDFs, antenna-subsampling ablations, a raw-CSI nearest-neighbour
//! baseline, and letter-path demonstration coordinates.

mod letters;

pub use letters::{letter_path, supported_glyphs};

use crate::channel::{CsiSample, Dataset};
use crate::posnet::ParamCount;
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction/truth length mismatch: {predictions} vs {truths}")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("cannot subsample {requested} antennas from {available}")]
    BadSubsample { requested: usize, available: usize },
    #[error("unsupported glyph '{glyph}'; supported: {supported}")]
    UnsupportedGlyph { glyph: char, supported: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Mean Euclidean error over prediction/truth pairs, in mm and in carrier
/// wavelengths.
pub fn mean_error(
    predictions: &[[f64; 2]],
    truths: &[[f64; 2]],
    wavelength_mm: f64,
) -> Result<(f64, f64), EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty("mean_error"));
    }
    let errors = per_sample_errors(predictions, truths);
    let me_mm = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok((me_mm, me_mm / wavelength_mm))
}

/// Euclidean distance per pair, in mm.
pub fn per_sample_errors(predictions: &[[f64; 2]], truths: &[[f64; 2]]) -> Vec<f64> {
    predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| {
            let dx = p[0] - t[0];
            let dy = p[1] - t[1];
            (dx * dx + dy * dy).sqrt()
        })
        .collect()
}

/// One point of the empirical CDF table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfPoint {
    pub error_mm: f64,
    pub fraction: f64,
}

/// Where the CDF is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfGrid {
    /// One step per distinct error value.
    Unique,
    /// A uniform grid of this many points from 0 to the maximum error.
    Uniform(usize),
}

/// Right-continuous empirical CDF: the fraction of errors `<= x`.
pub fn error_cdf(errors: &[f64], grid: CdfGrid) -> Result<Vec<CdfPoint>, EvalError> {
    if errors.is_empty() {
        return Err(EvalError::Empty("error_cdf"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let n = sorted.len() as f64;
    let fraction_at = |x: f64| {
        // number of errors <= x via binary search on the sorted list
        let count = sorted.partition_point(|&e| e <= x);
        count as f64 / n
    };
    let points = match grid {
        CdfGrid::Unique => {
            let mut xs: Vec<f64> = sorted.clone();
            xs.dedup();
            xs
        }
        CdfGrid::Uniform(k) => {
            if k < 2 {
                return Err(EvalError::Config("uniform CDF grid needs >= 2 points".into()));
            }
            let max = *sorted.last().unwrap();
            (0..k).map(|i| max * i as f64 / (k - 1) as f64).collect()
        }
    };
    Ok(points
        .into_iter()
        .map(|x| CdfPoint {
            error_mm: x,
            fraction: fraction_at(x),
        })
        .collect())
}

/// Fraction of errors at or below `x`, straight off the table.
pub fn cdf_at(cdf: &[CdfPoint], x: f64) -> f64 {
    let mut fraction = 0.0;
    for p in cdf {
        if p.error_mm <= x {
            fraction = p.fraction;
        } else {
            break;
        }
    }
    fraction
}

/// Which antenna rows a subsampled dataset keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsampleStrategy {
    /// Every `N/n`-th antenna, preserving the aperture.
    EvenlySpaced,
    /// The first `n` antennas.
    ContiguousBlock,
}

impl SubsampleStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SubsampleStrategy::EvenlySpaced => "spaced",
            SubsampleStrategy::ContiguousBlock => "block",
        }
    }
}

/// Antenna indices kept when subsampling `n` out of `total`.
pub fn subsample_indices(
    total: usize,
    n: usize,
    strategy: SubsampleStrategy,
) -> Result<Vec<usize>, EvalError> {
    if n == 0 || n > total || total % n != 0 {
        return Err(EvalError::BadSubsample {
            requested: n,
            available: total,
        });
    }
    Ok(match strategy {
        SubsampleStrategy::EvenlySpaced => {
            let step = total / n;
            (0..n).map(|i| i * step).collect()
        }
        SubsampleStrategy::ContiguousBlock => (0..n).collect(),
    })
}

/// Restricts every sample to `n` antenna rows by the chosen strategy.
/// Labels and the remaining rows are untouched.
pub fn antenna_subsample(
    dataset: &Dataset,
    n: usize,
    strategy: SubsampleStrategy,
) -> Result<Dataset, EvalError> {
    let indices = subsample_indices(dataset.n_antennas, n, strategy)?;
    if n == dataset.n_antennas {
        return Ok(dataset.clone());
    }
    let samples = dataset
        .samples
        .iter()
        .map(|s| {
            let mut csi = crate::channel::CsiMatrix::zeros(n, s.csi.n_subcarriers);
            for (new_row, &old_row) in indices.iter().enumerate() {
                let k = s.csi.n_subcarriers;
                csi.data[new_row * k..][..k].copy_from_slice(s.csi.row(old_row));
            }
            CsiSample {
                csi,
                position: s.position,
                user_height: s.user_height,
                scenario: s.scenario.clone(),
                seed: s.seed,
            }
        })
        .collect();
    Ok(Dataset {
        topology_name: dataset.topology_name.clone(),
        radio: dataset.radio.clone(),
        n_antennas: n,
        user_height: dataset.user_height,
        seed: dataset.seed,
        samples,
    })
}

/// Nearest-neighbour baseline in raw CSI space: each test sample is
/// assigned the position of the training sample whose channel matrix is
/// closest in squared complex L2 distance. Ties break on the lower index.
pub fn nn_baseline(train: &[CsiSample], test: &[CsiSample]) -> Vec<[f64; 2]> {
    test.par_iter()
        .map(|probe| {
            let mut best = (f64::INFINITY, 0usize);
            for (i, candidate) in train.iter().enumerate() {
                let mut dist = 0.0;
                for (a, b) in probe.csi.data.iter().zip(&candidate.csi.data) {
                    dist += (a - b).norm_sqr();
                    if dist >= best.0 {
                        break;
                    }
                }
                if dist < best.0 {
                    best = (dist, i);
                }
            }
            train[best.1].position
        })
        .collect()
}

/// Everything the evaluation emits for one run.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub per_sample_error_mm: Vec<f64>,
    pub me_mm: f64,
    pub me_lambda: f64,
    pub cdf: Vec<CdfPoint>,
    pub config_fingerprint: u64,
    pub n_antennas: usize,
    pub param_count: Option<ParamCount>,
}

/// Builds the full report from denormalized predictions and mm truths.
pub fn build_report(
    predictions: &[[f64; 2]],
    truths: &[[f64; 2]],
    wavelength_mm: f64,
    n_antennas: usize,
    config_fingerprint: u64,
) -> Result<EvalReport, EvalError> {
    let (me_mm, me_lambda) = mean_error(predictions, truths, wavelength_mm)?;
    let per_sample = per_sample_errors(predictions, truths);
    let cdf = error_cdf(&per_sample, CdfGrid::Unique)?;
    Ok(EvalReport {
        per_sample_error_mm: per_sample,
        me_mm,
        me_lambda,
        cdf,
        config_fingerprint,
        n_antennas,
        param_count: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_topology, generate_grid_dataset, Area, GeometryConfig,
                         RadioConfig, TopologyKind};
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    #[test]
    fn identical_predictions_give_zero_me() {
        let pts = vec![[1.0, 2.0], [3.0, 4.0]];
        let (mm, lambda) = mean_error(&pts, &pts, 114.86).unwrap();
        assert_eq!(mm, 0.0);
        assert_eq!(lambda, 0.0);
    }

    #[test]
    fn three_four_five_triangle() {
        let (mm, _) = mean_error(&[[0.0, 0.0]], &[[30.0, 40.0]], 100.0).unwrap();
        assert_eq!(mm, 50.0);
    }

    #[test]
    fn lambda_units_invert_exactly() {
        let mut rng = rng_from_seed(4);
        let preds: Vec<[f64; 2]> = (0..50)
            .map(|_| [rng.gen_range(-500.0..500.0), rng.gen_range(1000.0..2000.0)])
            .collect();
        let truths: Vec<[f64; 2]> = (0..50)
            .map(|_| [rng.gen_range(-500.0..500.0), rng.gen_range(1000.0..2000.0)])
            .collect();
        let lambda = 114.863;
        let (mm, lam) = mean_error(&preds, &truths, lambda).unwrap();
        assert_eq!(lam * lambda, mm);
    }

    #[test]
    fn mean_error_matches_bruteforce_on_random_instances() {
        let mut rng = rng_from_seed(8);
        for _ in 0..100 {
            let n = rng.gen_range(1..40);
            let preds: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3)])
                .collect();
            let truths: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3)])
                .collect();
            // Independent loop, no shared code path.
            let mut sum = 0.0;
            for i in 0..n {
                let dx = preds[i][0] - truths[i][0];
                let dy = preds[i][1] - truths[i][1];
                sum += (dx * dx + dy * dy).sqrt();
            }
            let expect = sum / n as f64;
            let (mm, _) = mean_error(&preds, &truths, 100.0).unwrap();
            assert_eq!(mm, expect);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(mean_error(&[[0.0, 0.0]], &[], 100.0).is_err());
    }

    #[test]
    fn cdf_of_one_two_three() {
        let cdf = error_cdf(&[1.0, 2.0, 3.0], CdfGrid::Unique).unwrap();
        let two_thirds = 2.0 / 3.0;
        assert_eq!(cdf_at(&cdf, 2.0), two_thirds);
        assert_eq!(cdf_at(&cdf, 0.5), 0.0);
        assert_eq!(cdf_at(&cdf, 99.0), 1.0);
    }

    #[test]
    fn cdf_without_ties_has_n_equal_steps() {
        let mut rng = rng_from_seed(12);
        let mut errors: Vec<f64> = (0..37).map(|_| rng.gen_range(0.0..100.0)).collect();
        errors.dedup();
        let n = errors.len();
        let cdf = error_cdf(&errors, CdfGrid::Unique).unwrap();
        assert_eq!(cdf.len(), n);
        for (i, p) in cdf.iter().enumerate() {
            let expect = (i + 1) as f64 / n as f64;
            assert!((p.fraction - expect).abs() < 1e-12);
        }
        assert_eq!(cdf.last().unwrap().fraction, 1.0);
        assert!(cdf.windows(2).all(|w| w[0].fraction <= w[1].fraction));
        assert!(cdf.windows(2).all(|w| w[0].error_mm < w[1].error_mm));
    }

    #[test]
    fn subsample_identity_and_spacing() {
        assert_eq!(
            subsample_indices(64, 8, SubsampleStrategy::EvenlySpaced).unwrap(),
            vec![0, 8, 16, 24, 32, 40, 48, 56]
        );
        assert_eq!(
            subsample_indices(64, 64, SubsampleStrategy::EvenlySpaced).unwrap(),
            (0..64).collect::<Vec<_>>()
        );
        assert_eq!(
            subsample_indices(64, 4, SubsampleStrategy::ContiguousBlock).unwrap(),
            vec![0, 1, 2, 3]
        );
        assert!(subsample_indices(64, 128, SubsampleStrategy::EvenlySpaced).is_err());
        assert!(subsample_indices(64, 24, SubsampleStrategy::EvenlySpaced).is_err());
    }

    #[test]
    fn antenna_subsample_keeps_labels_and_rows() {
        let topo = build_topology(TopologyKind::Ura, &GeometryConfig::default()).unwrap();
        let radio = RadioConfig {
            subcarriers: 4,
            ..RadioConfig::default()
        };
        let area = Area {
            x0: -100.0,
            y0: 1200.0,
            extent_x: 200.0,
            extent_y: 200.0,
        };
        let ds = generate_grid_dataset(&topo, &radio, &[area], 100.0, 200.0, 2).unwrap();
        let sub = antenna_subsample(&ds, 16, SubsampleStrategy::EvenlySpaced).unwrap();
        assert_eq!(sub.n_antennas, 16);
        assert_eq!(sub.len(), ds.len());
        for (a, b) in sub.samples.iter().zip(&ds.samples) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.csi.row(1), b.csi.row(4));
        }
        // n == N is the identity.
        let same = antenna_subsample(&ds, 64, SubsampleStrategy::EvenlySpaced).unwrap();
        assert_eq!(same, ds);
    }

    #[test]
    fn nn_baseline_recovers_exact_training_points() {
        let topo = build_topology(TopologyKind::Ura, &GeometryConfig::default()).unwrap();
        let radio = RadioConfig {
            subcarriers: 4,
            ..RadioConfig::default()
        };
        let area = Area {
            x0: -200.0,
            y0: 1200.0,
            extent_x: 400.0,
            extent_y: 400.0,
        };
        let ds = generate_grid_dataset(&topo, &radio, &[area], 100.0, 200.0, 2).unwrap();
        // Querying with the training samples themselves gives zero error.
        let preds = nn_baseline(&ds.samples, &ds.samples[..5]);
        for (p, s) in preds.iter().zip(&ds.samples[..5]) {
            assert_eq!(*p, s.position);
        }
    }

    #[test]
    fn report_invariants_hold() {
        let preds = vec![[0.0, 0.0], [10.0, 0.0], [0.0, 20.0]];
        let truths = vec![[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        let report = build_report(&preds, &truths, 114.863, 64, 0xabcd).unwrap();
        assert_eq!(report.me_mm, 10.0);
        assert_eq!(report.cdf.last().unwrap().fraction, 1.0);
        assert_eq!(report.per_sample_error_mm, vec![0.0, 10.0, 20.0]);
        assert_eq!(report.n_antennas, 64);
    }
}
