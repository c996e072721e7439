//! Verb implementations behind the `csipos` binary.
//!
//! Exit-code contract: 0 success, 1 usage, 2 config, 3 data, 4 numeric.
//! Every run writes its resolved config, seed, and crate version into the
//! output directory, and writes nowhere else.

use crate::datastore::{
    load_model, read_dataset, save_model, write_dataset, RunConfig, SavedModel, StoreError,
};
use crate::report::{
    write_eval_report, write_history, write_letter_overlay, LetterOverlayRow,
};
use csipos_core::channel::{build_topology, generate_grid_dataset, Dataset};
use csipos_core::evalkit::{
    antenna_subsample, build_report, letter_path, nn_baseline, EvalError, EvalReport,
};
use csipos_core::features::{build_feature_tensor, FeatureTensor};
use csipos_core::numerics::layer_kind_suite;
use csipos_core::posnet::{
    build_positioning_cnn, param_count, plan_summary, predict, stage1_boundary,
};
use csipos_core::rng::hash_f64_slice;
use csipos_core::trainer::{
    prepare_folds, prepare_folds_with, split_dataset, train, transfer_train, Fold, TrainError,
    TrainOutcome,
};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Error carrying the exit-code category.
#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Data(_) => 3,
            CommandError::Numeric(_) => 4,
        }
    }
}

impl From<StoreError> for CommandError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Config { .. } | StoreError::Invalid(_) => {
                CommandError::Config(e.to_string())
            }
            other => CommandError::Data(other.to_string()),
        }
    }
}

impl From<TrainError> for CommandError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::EmptySplit { .. } => {
                CommandError::Config(e.to_string())
            }
            TrainError::AntennaMismatch { .. } => CommandError::Data(e.to_string()),
            TrainError::Diverged { .. } | TrainError::Numerics(_) => {
                CommandError::Numeric(e.to_string())
            }
        }
    }
}

impl From<EvalError> for CommandError {
    fn from(e: EvalError) -> Self {
        CommandError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Data(e.to_string())
    }
}

fn numeric_err(e: csipos_core::numerics::NumericsError) -> CommandError {
    CommandError::Numeric(e.to_string())
}

/// Shared flags resolved into a config.
#[derive(Debug, Clone, Default)]
pub struct CommonArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub sets: Vec<String>,
    pub seed: Option<u64>,
    pub topology: Option<String>,
    pub antennas: Option<usize>,
    pub budget: Option<usize>,
    pub freeze_boundary: Option<usize>,
}

/// Loads the config file, then applies `--set` pairs, then dedicated flags.
pub fn resolve_config(args: &CommonArgs) -> Result<RunConfig, CommandError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| match e {
            StoreError::Io(io) => CommandError::Data(format!(
                "cannot read config {}: {io}",
                path.display()
            )),
            other => CommandError::Config(other.to_string()),
        })?,
        None => RunConfig::default(),
    };
    for pair in &args.sets {
        cfg.apply_override(pair)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(topology) = &args.topology {
        cfg.apply_override(&format!("topology={topology}"))?;
    }
    if let Some(antennas) = args.antennas {
        cfg.antennas = antennas;
    }
    if let Some(budget) = args.budget {
        cfg.budget = Some(budget);
    }
    if let Some(boundary) = args.freeze_boundary {
        cfg.freeze_boundary = Some(boundary);
    }
    Ok(cfg)
}

/// Writes the reproducibility record every verb emits.
fn write_run_stamp(out: &Path, verb: &str, cfg: &RunConfig) -> Result<(), CommandError> {
    fs::create_dir_all(out)?;
    fs::write(out.join("resolved-config.txt"), cfg.to_text())?;
    let mut stamp = String::new();
    let _ = writeln!(stamp, "verb = {verb}");
    let _ = writeln!(stamp, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(stamp, "seed = {}", cfg.seed);
    let _ = writeln!(stamp, "config_fingerprint = {:016x}", cfg.fingerprint());
    fs::write(out.join("run.txt"), stamp)?;
    Ok(())
}

fn load_dataset_checked(path: &Path) -> Result<Dataset, CommandError> {
    read_dataset(path).map_err(CommandError::from)
}

/// Applies the configured antenna subsampling when the dataset is wider.
fn maybe_subsample(cfg: &RunConfig, dataset: Dataset) -> Result<Dataset, CommandError> {
    if cfg.antennas == dataset.n_antennas {
        Ok(dataset)
    } else {
        Ok(antenna_subsample(
            &dataset,
            cfg.antennas,
            cfg.subsample_strategy,
        )?)
    }
}

/// `simulate`: synthesize the configured grid dataset.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CommandError> {
    write_run_stamp(out, "simulate", cfg)?;
    let topo = build_topology(cfg.topology, &cfg.geometry())
        .map_err(|e| CommandError::Config(e.to_string()))?;
    let radio = cfg.radio();
    let dataset = generate_grid_dataset(
        &topo,
        &radio,
        &[cfg.area()],
        cfg.grid_step_mm,
        cfg.user_height_mm,
        cfg.seed,
    )
    .map_err(|e| CommandError::Config(e.to_string()))?;
    let path = out.join("dataset.csib");
    write_dataset(&dataset, &path)?;

    let mut log = String::new();
    let _ = writeln!(log, "topology = {}", dataset.topology_name);
    let _ = writeln!(log, "samples = {}", dataset.len());
    let _ = writeln!(log, "antennas = {}", dataset.n_antennas);
    let _ = writeln!(log, "subcarriers = {}", dataset.n_subcarriers());
    let _ = writeln!(log, "wavelength_mm (c/fc) = {:.6}", radio.wavelength_mm());
    // The campaign write-up quotes 114.56 mm for this carrier; c/fc gives
    // 114.86 mm. Both are logged, c/fc is used for lambda-unit reporting.
    let _ = writeln!(log, "wavelength_mm (quoted) = 114.56");
    fs::write(out.join("simulate.log"), log)?;
    Ok(path)
}

struct PreparedRun {
    dataset: Dataset,
    train_fold: Fold,
    val_fold: Fold,
    test_fold: Fold,
    norm: csipos_core::features::Normalization,
}

fn prepare_run(cfg: &RunConfig, dataset_path: &Path) -> Result<PreparedRun, CommandError> {
    let dataset = load_dataset_checked(dataset_path)?;
    let dataset = maybe_subsample(cfg, dataset)?;
    let split = split_dataset(dataset.len(), &cfg.split_config())?;
    let (train_fold, val_fold, test_fold, norm) =
        prepare_folds(&dataset, &split, &cfg.area())?;
    Ok(PreparedRun {
        dataset,
        train_fold,
        val_fold,
        test_fold,
        norm,
    })
}

fn evaluate_test_fold(
    model: &csipos_core::numerics::Model,
    fold: &Fold,
    cfg: &RunConfig,
    n_antennas: usize,
) -> Result<EvalReport, CommandError> {
    let mut predictions = Vec::with_capacity(fold.len());
    for input in &fold.inputs {
        let p = predict(model, &FeatureTensor { tensor: input.clone() }).map_err(numeric_err)?;
        predictions.push(fold.label_map.denormalize(p));
    }
    let mut report = build_report(
        &predictions,
        &fold.positions_mm,
        cfg.radio().wavelength_mm(),
        n_antennas,
        cfg.fingerprint(),
    )?;
    report.param_count = None;
    Ok(report)
}

/// `train`: supervised training on a dataset file, emitting the model,
/// history, layer plan, and the test-split evaluation report.
pub fn train_cmd(
    cfg: &RunConfig,
    out: &Path,
    dataset_path: &Path,
) -> Result<TrainOutcome, CommandError> {
    write_run_stamp(out, "train", cfg)?;
    let prep = prepare_run(cfg, dataset_path)?;
    let arch = cfg.arch_config(prep.dataset.n_antennas);
    let mut model = build_positioning_cnn(&arch, cfg.seed).map_err(numeric_err)?;
    fs::write(out.join("plan.txt"), plan_summary(&model))?;

    let outcome = train(&mut model, &prep.train_fold, &prep.val_fold, &cfg.train_config())?;
    write_history(&outcome.history, &out.join("history.tsv"))?;

    let mut report = evaluate_test_fold(&model, &prep.test_fold, cfg, prep.dataset.n_antennas)?;
    report.param_count = Some(param_count(&model));
    write_eval_report(&report, out)?;

    save_model(
        &SavedModel {
            arch,
            seed: cfg.seed,
            norm: prep.norm,
            model,
        },
        &out.join("model.csim"),
    )?;
    Ok(outcome)
}

fn frozen_param_hash(model: &csipos_core::numerics::Model) -> u64 {
    let mut vals = Vec::new();
    for layer in model.layers.iter().filter(|l| l.frozen) {
        vals.extend_from_slice(layer.weights.data());
        vals.extend_from_slice(layer.bias.data());
    }
    hash_f64_slice(&vals)
}

/// `transfer`: fine-tune a pretrained model on a new dataset under a
/// sample budget, freezing everything below the boundary.
pub fn transfer_cmd(
    cfg: &RunConfig,
    out: &Path,
    model_path: &Path,
    dataset_path: &Path,
) -> Result<TrainOutcome, CommandError> {
    write_run_stamp(out, "transfer", cfg)?;
    let saved = load_model(model_path)?;
    let dataset = load_dataset_checked(dataset_path)?;
    let dataset = maybe_subsample(cfg, dataset)?;
    if saved.arch.n_antennas != dataset.n_antennas {
        return Err(CommandError::Data(format!(
            "model expects {} antennas but the dataset has {}; subsample the \
             dataset antennas (--antennas) or match the configs",
            saved.arch.n_antennas, dataset.n_antennas
        )));
    }
    let boundary = match cfg.freeze_boundary {
        Some(b) => b,
        None => stage1_boundary(&saved.arch).map_err(numeric_err)?,
    };
    let budget = cfg.budget.ok_or_else(|| {
        CommandError::Config("transfer requires a sample budget (--budget)".into())
    })?;

    let mut model = saved.model;
    // Fine-tuning keeps the pretrained normalization so the frozen
    // stage-1 filters see the statistics they were trained on.
    let norm = saved.norm;
    let split = split_dataset(dataset.len(), &cfg.split_config())?;
    let (train_fold, val_fold, test_fold) = prepare_folds_with(&dataset, &split, &norm)?;

    let pre_hash = {
        let mut probe = model.clone();
        csipos_core::posnet::split_for_transfer(&mut probe, boundary).map_err(numeric_err)?;
        frozen_param_hash(&probe)
    };
    let outcome = transfer_train(
        &mut model,
        &train_fold,
        &val_fold,
        budget,
        boundary,
        &cfg.train_config(),
    )?;
    let post_hash = frozen_param_hash(&model);
    write_history(&outcome.history, &out.join("history.tsv"))?;

    let mut hashes = String::new();
    let _ = writeln!(hashes, "freeze_boundary = {boundary}");
    let _ = writeln!(hashes, "budget = {budget}");
    let _ = writeln!(hashes, "frozen_hash_pre  = {pre_hash:016x}");
    let _ = writeln!(hashes, "frozen_hash_post = {post_hash:016x}");
    let _ = writeln!(hashes, "frozen_unchanged = {}", pre_hash == post_hash);
    fs::write(out.join("frozen.txt"), hashes)?;

    let mut report = evaluate_test_fold(&model, &test_fold, cfg, dataset.n_antennas)?;
    report.param_count = Some(param_count(&model));
    write_eval_report(&report, out)?;

    save_model(
        &SavedModel {
            arch: saved.arch,
            seed: cfg.seed,
            norm,
            model,
        },
        &out.join("model.csim"),
    )?;
    Ok(outcome)
}

/// `eval`: test-split evaluation of a saved model on a dataset, plus the
/// raw-CSI nearest-neighbour baseline for context.
pub fn eval_cmd(
    cfg: &RunConfig,
    out: &Path,
    model_path: &Path,
    dataset_path: &Path,
) -> Result<EvalReport, CommandError> {
    write_run_stamp(out, "eval", cfg)?;
    let saved = load_model(model_path)?;
    let dataset = load_dataset_checked(dataset_path)?;
    let dataset = maybe_subsample(cfg, dataset)?;
    if saved.arch.n_antennas != dataset.n_antennas
        || saved.arch.n_subcarriers != dataset.n_subcarriers()
    {
        return Err(CommandError::Data(format!(
            "model input is {}x{} but the dataset provides {}x{}; subsample \
             antennas (--antennas) or evaluate a matching dataset",
            saved.arch.n_antennas,
            saved.arch.n_subcarriers,
            dataset.n_antennas,
            dataset.n_subcarriers()
        )));
    }
    let split = split_dataset(dataset.len(), &cfg.split_config())?;

    let mut predictions = Vec::with_capacity(split.test.len());
    let mut truths = Vec::with_capacity(split.test.len());
    for &i in &split.test {
        let sample = &dataset.samples[i];
        let mut features = build_feature_tensor(&sample.csi).map_err(numeric_err)?;
        saved.norm.apply(&mut features);
        let p = predict(&saved.model, &features).map_err(numeric_err)?;
        predictions.push(saved.norm.denormalize_label(p));
        truths.push(sample.position);
    }
    let mut report = build_report(
        &predictions,
        &truths,
        cfg.radio().wavelength_mm(),
        dataset.n_antennas,
        cfg.fingerprint(),
    )?;
    report.param_count = Some(param_count(&saved.model));
    write_eval_report(&report, out)?;

    // Baseline: nearest training sample in raw CSI space.
    let train_samples: Vec<_> = split.train.iter().map(|&i| dataset.samples[i].clone()).collect();
    let test_samples: Vec<_> = split.test.iter().map(|&i| dataset.samples[i].clone()).collect();
    let nn_preds = nn_baseline(&train_samples, &test_samples);
    let (nn_mm, nn_lambda) = csipos_core::evalkit::mean_error(
        &nn_preds,
        &truths,
        cfg.radio().wavelength_mm(),
    )?;
    let mut baseline = String::from("me_mm\tme_lambda\n");
    let _ = writeln!(baseline, "{nn_mm:.6}\t{nn_lambda:.6}");
    fs::write(out.join("baseline_nn.tsv"), baseline)?;
    Ok(report)
}

/// `letters`: waypoints for the text, plus a prediction overlay when a
/// model and dataset are supplied.
pub fn letters_cmd(
    cfg: &RunConfig,
    out: &Path,
    model_path: Option<&Path>,
    dataset_path: Option<&Path>,
) -> Result<usize, CommandError> {
    write_run_stamp(out, "letters", cfg)?;
    let waypoints = letter_path(&cfg.letters_text, &cfg.area(), cfg.letters_spacing_mm)?;

    let overlay = match (model_path, dataset_path) {
        (Some(mp), Some(dp)) => {
            let saved = load_model(mp)?;
            let dataset = load_dataset_checked(dp)?;
            let dataset = maybe_subsample(cfg, dataset)?;
            if saved.arch.n_antennas != dataset.n_antennas {
                return Err(CommandError::Data(format!(
                    "model expects {} antennas but the dataset has {}",
                    saved.arch.n_antennas, dataset.n_antennas
                )));
            }
            let mut rows = Vec::with_capacity(waypoints.len());
            for wp in &waypoints {
                // Nearest dataset sample stands in for measuring at the
                // waypoint itself.
                let (mut best_d, mut best_i) = (f64::INFINITY, 0usize);
                for (i, s) in dataset.samples.iter().enumerate() {
                    let dx = s.position[0] - wp[0];
                    let dy = s.position[1] - wp[1];
                    let d = dx * dx + dy * dy;
                    if d < best_d {
                        best_d = d;
                        best_i = i;
                    }
                }
                let sample = &dataset.samples[best_i];
                let mut features =
                    build_feature_tensor(&sample.csi).map_err(numeric_err)?;
                saved.norm.apply(&mut features);
                let p = predict(&saved.model, &features).map_err(numeric_err)?;
                let pred = saved.norm.denormalize_label(p);
                let dx = pred[0] - sample.position[0];
                let dy = pred[1] - sample.position[1];
                rows.push(LetterOverlayRow {
                    waypoint: *wp,
                    sample: sample.position,
                    prediction: pred,
                    error_mm: (dx * dx + dy * dy).sqrt(),
                });
            }
            Some(rows)
        }
        _ => None,
    };
    write_letter_overlay(&waypoints, overlay.as_deref(), out)?;

    if let Some(rows) = &overlay {
        let me: f64 = rows.iter().map(|r| r.error_mm).sum::<f64>() / rows.len() as f64;
        let mut s = String::from("me_mm\tpoints\n");
        let _ = writeln!(s, "{me:.6}\t{}", rows.len());
        fs::write(out.join("letters_me.tsv"), s)?;
    }
    Ok(waypoints.len())
}

/// `gradcheck`: the finite-difference suite over every layer kind;
/// numeric failure when any case reaches 1e-4 relative error.
pub fn gradcheck_cmd(out: &Path) -> Result<(), CommandError> {
    fs::create_dir_all(out)?;
    let seeds = [1u64, 2, 3, 4, 5];
    let cases = layer_kind_suite(&seeds, 1e-5).map_err(numeric_err)?;
    let mut table = String::from("kind\tseed\tmax_rel_error\tpass\n");
    let mut worst: f64 = 0.0;
    for c in &cases {
        let pass = c.max_rel_error < 1e-4;
        let _ = writeln!(
            table,
            "{}\t{}\t{:.3e}\t{}",
            c.kind, c.seed, c.max_rel_error, pass
        );
        worst = worst.max(c.max_rel_error);
    }
    let _ = writeln!(table, "# worst = {worst:.3e}");
    fs::write(out.join("gradcheck.tsv"), &table)?;
    print!("{table}");
    if worst >= 1e-4 {
        return Err(CommandError::Numeric(format!(
            "gradient check failed: worst relative error {worst:.3e} >= 1e-4"
        )));
    }
    Ok(())
}
