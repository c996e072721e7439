//! Plain-text run configuration: `key = value` lines, `#` comments.
//! Unknown keys and duplicates are rejected; the resolved config echoes
//! back to a canonical text form for logs and fingerprints.

use super::StoreError;
use csipos_core::channel::{Area, RadioConfig, TopologyKind};
use csipos_core::evalkit::SubsampleStrategy;
use csipos_core::numerics::AdamConfig;
use csipos_core::posnet::ArchConfig;
use csipos_core::trainer::{BudgetStrategy, LrSchedule, SplitConfig, TrainConfig};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

/// Value accepted by `--set key=value` overrides.
pub type ParsedValue = String;

/// Everything a run needs, with desk-scale defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // radio
    pub fc: f64,
    pub bandwidth: f64,
    pub subcarriers: usize,
    pub noise_snr_db: Option<f64>,
    // geometry / scan
    pub topology: TopologyKind,
    pub element_spacing_mm: f64,
    pub standoff_mm: f64,
    pub array_base_height_mm: f64,
    pub user_height_mm: f64,
    pub area_x0_mm: f64,
    pub area_y0_mm: f64,
    pub area_extent_x_mm: f64,
    pub area_extent_y_mm: f64,
    pub grid_step_mm: f64,
    // evaluation
    pub antennas: usize,
    pub subsample_strategy: SubsampleStrategy,
    // model
    pub arch: ArchPreset,
    // training
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_min: f64,
    pub lr_schedule: ScheduleKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub patience: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    // transfer
    pub budget: Option<usize>,
    pub freeze_boundary: Option<usize>,
    pub budget_strategy: BudgetStrategy,
    // letters
    pub letters_text: String,
    pub letters_spacing_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchPreset {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    Cosine,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fc: 2.61e9,
            bandwidth: 20e6,
            subcarriers: 16,
            noise_snr_db: None,
            topology: TopologyKind::Ura,
            element_spacing_mm: 70.0,
            standoff_mm: 1000.0,
            array_base_height_mm: 930.0,
            user_height_mm: 200.0,
            area_x0_mm: -625.0,
            area_y0_mm: 1000.0,
            area_extent_x_mm: 1250.0,
            area_extent_y_mm: 1250.0,
            grid_step_mm: 25.0,
            antennas: 64,
            subsample_strategy: SubsampleStrategy::EvenlySpaced,
            arch: ArchPreset::Desk,
            seed: 1,
            epochs: 60,
            batch_size: 32,
            lr: 3e-3,
            lr_min: 1e-5,
            lr_schedule: ScheduleKind::Cosine,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 20,
            train_frac: 0.85,
            val_frac: 0.10,
            test_frac: 0.05,
            budget: None,
            freeze_boundary: None,
            budget_strategy: BudgetStrategy::Uniform,
            letters_text: "KU LEUVEN".to_string(),
            letters_spacing_mm: 25.0,
        }
    }
}

impl RunConfig {
    /// Parses a config file into defaults; empty files give pure defaults.
    pub fn from_file(path: &Path) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), StoreError> {
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
            self.set(key, value).map_err(|message| StoreError::Config {
                line: lineno + 1,
                message,
            })?;
        }
        Ok(())
    }

    /// Applies one `key=value` override (used by `--set`).
    pub fn apply_override(&mut self, pair: &str) -> Result<(), StoreError> {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(StoreError::Invalid(format!(
                "override '{pair}' is not of the form key=value"
            )));
        };
        self.set(key.trim(), value.trim())
            .map_err(StoreError::Invalid)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("key '{key}': cannot parse '{value}'"))
        }
        match key {
            "fc" => self.fc = num(key, value)?,
            "bandwidth" => self.bandwidth = num(key, value)?,
            "subcarriers" => self.subcarriers = num(key, value)?,
            "noise_snr_db" => {
                self.noise_snr_db = if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "topology" => {
                self.topology = TopologyKind::parse(value).map_err(|e| e.to_string())?
            }
            "element_spacing_mm" => self.element_spacing_mm = num(key, value)?,
            "standoff_mm" => self.standoff_mm = num(key, value)?,
            "array_base_height_mm" => self.array_base_height_mm = num(key, value)?,
            "user_height_mm" => self.user_height_mm = num(key, value)?,
            "area_x0_mm" => self.area_x0_mm = num(key, value)?,
            "area_y0_mm" => self.area_y0_mm = num(key, value)?,
            "area_extent_x_mm" => self.area_extent_x_mm = num(key, value)?,
            "area_extent_y_mm" => self.area_extent_y_mm = num(key, value)?,
            "grid_step_mm" => self.grid_step_mm = num(key, value)?,
            "antennas" => self.antennas = num(key, value)?,
            "subsample_strategy" => {
                self.subsample_strategy = match value {
                    "spaced" => SubsampleStrategy::EvenlySpaced,
                    "block" => SubsampleStrategy::ContiguousBlock,
                    other => return Err(format!("key 'subsample_strategy': unknown '{other}'")),
                }
            }
            "arch" => {
                self.arch = match value {
                    "desk" => ArchPreset::Desk,
                    "paper" => ArchPreset::Paper,
                    other => return Err(format!("key 'arch': unknown preset '{other}'")),
                }
            }
            "seed" => self.seed = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "lr_min" => self.lr_min = num(key, value)?,
            "lr_schedule" => {
                self.lr_schedule = match value {
                    "constant" => ScheduleKind::Constant,
                    "cosine" => ScheduleKind::Cosine,
                    other => return Err(format!("key 'lr_schedule': unknown '{other}'")),
                }
            }
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "train_frac" => self.train_frac = num(key, value)?,
            "val_frac" => self.val_frac = num(key, value)?,
            "test_frac" => self.test_frac = num(key, value)?,
            "budget" => {
                self.budget = if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "freeze_boundary" => {
                self.freeze_boundary = if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "budget_strategy" => {
                self.budget_strategy = match value {
                    "uniform" => BudgetStrategy::Uniform,
                    "stratified" => BudgetStrategy::Stratified,
                    other => return Err(format!("key 'budget_strategy': unknown '{other}'")),
                }
            }
            "letters_text" => self.letters_text = value.to_string(),
            "letters_spacing_mm" => self.letters_spacing_mm = num(key, value)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Canonical text form: every key in a fixed order. Reparsing it
    /// reproduces the config; its bytes feed the config fingerprint.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt_f = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x}"));
        let opt_u = |v: Option<usize>| v.map_or("none".to_string(), |x| format!("{x}"));
        let _ = writeln!(s, "fc = {}", self.fc);
        let _ = writeln!(s, "bandwidth = {}", self.bandwidth);
        let _ = writeln!(s, "subcarriers = {}", self.subcarriers);
        let _ = writeln!(s, "noise_snr_db = {}", opt_f(self.noise_snr_db));
        let _ = writeln!(s, "topology = {}", self.topology.name().to_lowercase());
        let _ = writeln!(s, "element_spacing_mm = {}", self.element_spacing_mm);
        let _ = writeln!(s, "standoff_mm = {}", self.standoff_mm);
        let _ = writeln!(s, "array_base_height_mm = {}", self.array_base_height_mm);
        let _ = writeln!(s, "user_height_mm = {}", self.user_height_mm);
        let _ = writeln!(s, "area_x0_mm = {}", self.area_x0_mm);
        let _ = writeln!(s, "area_y0_mm = {}", self.area_y0_mm);
        let _ = writeln!(s, "area_extent_x_mm = {}", self.area_extent_x_mm);
        let _ = writeln!(s, "area_extent_y_mm = {}", self.area_extent_y_mm);
        let _ = writeln!(s, "grid_step_mm = {}", self.grid_step_mm);
        let _ = writeln!(s, "antennas = {}", self.antennas);
        let _ = writeln!(s, "subsample_strategy = {}", self.subsample_strategy.name());
        let _ = writeln!(
            s,
            "arch = {}",
            match self.arch {
                ArchPreset::Desk => "desk",
                ArchPreset::Paper => "paper",
            }
        );
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "lr_min = {}", self.lr_min);
        let _ = writeln!(
            s,
            "lr_schedule = {}",
            match self.lr_schedule {
                ScheduleKind::Constant => "constant",
                ScheduleKind::Cosine => "cosine",
            }
        );
        let _ = writeln!(s, "beta1 = {}", self.beta1);
        let _ = writeln!(s, "beta2 = {}", self.beta2);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "patience = {}", self.patience);
        let _ = writeln!(s, "train_frac = {}", self.train_frac);
        let _ = writeln!(s, "val_frac = {}", self.val_frac);
        let _ = writeln!(s, "test_frac = {}", self.test_frac);
        let _ = writeln!(s, "budget = {}", opt_u(self.budget));
        let _ = writeln!(s, "freeze_boundary = {}", opt_u(self.freeze_boundary));
        let _ = writeln!(
            s,
            "budget_strategy = {}",
            match self.budget_strategy {
                BudgetStrategy::Uniform => "uniform",
                BudgetStrategy::Stratified => "stratified",
            }
        );
        let _ = writeln!(s, "letters_text = {}", self.letters_text);
        let _ = writeln!(s, "letters_spacing_mm = {}", self.letters_spacing_mm);
        s
    }

    // ---- projections into core types ----

    pub fn radio(&self) -> RadioConfig {
        RadioConfig {
            fc: self.fc,
            bandwidth: self.bandwidth,
            subcarriers: self.subcarriers,
            noise_snr_db: self.noise_snr_db,
        }
    }

    pub fn area(&self) -> Area {
        Area {
            x0: self.area_x0_mm,
            y0: self.area_y0_mm,
            extent_x: self.area_extent_x_mm,
            extent_y: self.area_extent_y_mm,
        }
    }

    pub fn geometry(&self) -> csipos_core::channel::GeometryConfig {
        csipos_core::channel::GeometryConfig {
            element_spacing: self.element_spacing_mm,
            standoff: self.standoff_mm,
            base_height: self.array_base_height_mm,
            user_area_half_extent: self.area_extent_x_mm / 2.0,
        }
    }

    pub fn arch_config(&self, n_antennas: usize) -> ArchConfig {
        match self.arch {
            ArchPreset::Desk => ArchConfig::desk(n_antennas, self.subcarriers),
            ArchPreset::Paper => ArchConfig::paper(n_antennas, self.subcarriers),
        }
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            train_frac: self.train_frac,
            val_frac: self.val_frac,
            test_frac: self.test_frac,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            lr_schedule: match self.lr_schedule {
                ScheduleKind::Constant => LrSchedule::Constant,
                ScheduleKind::Cosine => LrSchedule::Cosine { min_lr: self.lr_min },
            },
            patience: self.patience,
            seed: self.seed,
            budget_strategy: self.budget_strategy,
        }
    }

    /// FNV-1a fingerprint of the canonical text.
    pub fn fingerprint(&self) -> u64 {
        csipos_core::rng::fnv1a64(self.to_text().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_keeps_defaults() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.fc, 2.61e9);
        assert_eq!(cfg.bandwidth, 20e6);
        assert_eq!(cfg.subcarriers, 16);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# full line comment\n\nseed = 9 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn type_error_names_key_and_line() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("seed = 1\nepochs = banana\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("epochs"), "{msg}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("seed = 1\nseed = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("warp_factor = 9\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
    }

    #[test]
    fn canonical_text_reparses_identically() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "topology = ula\nantennas = 32\nnoise_snr_db = 18.5\nbudget = 500\n\
             lr_schedule = constant\nletters_text = HI\n",
        )
        .unwrap();
        let text = cfg.to_text();
        let mut again = RunConfig::default();
        again.apply_text(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.fingerprint(), cfg.fingerprint());
    }

    #[test]
    fn overrides_apply_and_validate() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("seed=77").unwrap();
        assert_eq!(cfg.seed, 77);
        assert!(cfg.apply_override("nonsense").is_err());
        assert!(cfg.apply_override("epochs=green").is_err());
    }
}
