//! Dataset splitting, the supervised training loop, and the
//! transfer-learning protocol with restricted sample budgets.

use crate::channel::{Area, Dataset};
use crate::features::{build_feature_tensor, FeatureTensor, LabelMap, Normalization};
use crate::numerics::{
    mse_loss_grad, AdamConfig, AdamState, Gradients, Model, NumericsError, Phase, Tensor,
};
use crate::posnet::split_for_transfer;
use crate::rng::{derive_seed, rng_from_seed, Rng};
use rand::seq::SliceRandom;
use rayon::prelude::*;

/// Fixed gradient-accumulation chunk: per-chunk sums run in parallel and
/// combine in chunk order, so results do not depend on thread count.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("split leaves the {which} fold empty")]
    EmptySplit { which: &'static str },
    #[error("training diverged (non-finite loss); last finite epoch was {last_finite_epoch}")]
    Diverged { last_finite_epoch: usize },
    #[error(
        "model expects {expected} antennas but the dataset has {actual}; \
         subsample the dataset antennas or match the architecture config"
    )]
    AntennaMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Split fractions; defaults follow the evaluation protocol
/// (85% train / 10% validation / 5% test).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_frac: 0.85,
            val_frac: 0.10,
            test_frac: 0.05,
            seed: 0,
        }
    }
}

/// Index partition of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded uniform shuffle followed by a contiguous cut. Sizes are the
/// rounded train/val fractions; the test fold takes the remainder.
pub fn split_dataset(n_samples: usize, cfg: &SplitConfig) -> Result<Split, TrainError> {
    if n_samples == 0 {
        return Err(TrainError::Config("dataset is empty".into()));
    }
    let sum = cfg.train_frac + cfg.val_frac + cfg.test_frac;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(TrainError::Config(format!(
            "split fractions must sum to 1, got {sum}"
        )));
    }
    let n_train = (n_samples as f64 * cfg.train_frac).round() as usize;
    let n_val = (n_samples as f64 * cfg.val_frac).round() as usize;
    if n_train + n_val > n_samples {
        return Err(TrainError::Config(
            "rounded train+val exceed the dataset".into(),
        ));
    }
    let n_test = n_samples - n_train - n_val;
    for (count, which) in [(n_train, "train"), (n_val, "val"), (n_test, "test")] {
        if count == 0 {
            return Err(TrainError::EmptySplit { which });
        }
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut rng_from_seed(cfg.seed));
    Ok(Split {
        train: order[..n_train].to_vec(),
        val: order[n_train..n_train + n_val].to_vec(),
        test: order[n_train + n_val..].to_vec(),
    })
}

/// One split's worth of ready-to-train data: normalized feature tensors,
/// normalized targets, and the mm ground truth for metric reporting.
#[derive(Debug, Clone)]
pub struct Fold {
    pub inputs: Vec<Tensor>,
    pub targets: Vec<[f64; 2]>,
    pub positions_mm: Vec<[f64; 2]>,
    pub label_map: LabelMap,
}

impl Fold {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn subset(&self, indices: &[usize]) -> Fold {
        Fold {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            positions_mm: indices.iter().map(|&i| self.positions_mm[i]).collect(),
            label_map: self.label_map,
        }
    }
}

/// Builds feature tensors for the whole dataset, fits normalization on the
/// training indices only, and materializes the three folds.
pub fn prepare_folds(
    dataset: &Dataset,
    split: &Split,
    area: &Area,
) -> Result<(Fold, Fold, Fold, Normalization), TrainError> {
    let features = build_all_features(dataset)?;
    let train_features: Vec<FeatureTensor> = split
        .train
        .iter()
        .map(|&i| features[i].clone())
        .collect();
    let norm = Normalization::fit(&train_features, area)?;
    drop(train_features);
    let (train, val, test) = materialize_folds(dataset, split, &features, &norm);
    Ok((train, val, test, norm))
}

/// Materializes folds under an externally supplied normalization —
/// the transfer protocol reuses the pretrained statistics so frozen
/// stage-1 filters see the distribution they were trained on.
pub fn prepare_folds_with(
    dataset: &Dataset,
    split: &Split,
    norm: &Normalization,
) -> Result<(Fold, Fold, Fold), TrainError> {
    let features = build_all_features(dataset)?;
    Ok(materialize_folds(dataset, split, &features, norm))
}

fn build_all_features(dataset: &Dataset) -> Result<Vec<FeatureTensor>, TrainError> {
    let features: Result<Vec<FeatureTensor>, NumericsError> = dataset
        .samples
        .par_iter()
        .map(|s| build_feature_tensor(&s.csi))
        .collect();
    Ok(features?)
}

fn materialize_folds(
    dataset: &Dataset,
    split: &Split,
    features: &[FeatureTensor],
    norm: &Normalization,
) -> (Fold, Fold, Fold) {
    let make_fold = |indices: &[usize]| -> Fold {
        let mut inputs = Vec::with_capacity(indices.len());
        let mut targets = Vec::with_capacity(indices.len());
        let mut positions = Vec::with_capacity(indices.len());
        for &i in indices {
            let mut f = features[i].clone();
            norm.apply(&mut f);
            inputs.push(f.tensor);
            let pos = dataset.samples[i].position;
            targets.push(norm.normalize_label(pos));
            positions.push(pos);
        }
        Fold {
            inputs,
            targets,
            positions_mm: positions,
            label_map: norm.label_map,
        }
    };
    (
        make_fold(&split.train),
        make_fold(&split.val),
        make_fold(&split.test),
    )
}

/// How transfer budgets pick their subset of the new training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetStrategy {
    /// Seeded uniform draw without replacement.
    Uniform,
    /// Spatially even coverage: samples ordered by (x, y), then evenly
    /// spaced indices.
    Stratified,
}

/// Per-epoch learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from the configured Adam lr down to `min_lr` over the
    /// epoch budget.
    Cosine { min_lr: f64 },
}

impl LrSchedule {
    fn lr_at(&self, base_lr: f64, epoch: usize, total_epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base_lr,
            LrSchedule::Cosine { min_lr } => {
                if total_epochs <= 1 {
                    return base_lr;
                }
                let progress = epoch as f64 / (total_epochs - 1) as f64;
                let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                min_lr + (base_lr - min_lr) * cos
            }
        }
    }
}

/// Training-loop knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub lr_schedule: LrSchedule,
    /// Stop after this many epochs without a validation-ME improvement;
    /// 0 disables early stopping.
    pub patience: usize,
    pub seed: u64,
    pub budget_strategy: BudgetStrategy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 32,
            adam: AdamConfig::default(),
            lr_schedule: LrSchedule::Cosine { min_lr: 1e-5 },
            patience: 20,
            seed: 0,
            budget_strategy: BudgetStrategy::Uniform,
        }
    }
}

/// Per-epoch record emitted into the history table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_me_mm: f64,
}

/// Result of a training run. Parameters of the best-validation-ME epoch
/// are restored into the model before this is returned.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_me_mm: f64,
}

fn batch_gradients(
    model: &Model,
    fold: &Fold,
    batch: &[usize],
    dropout_seeds: &[u64],
) -> Result<(f64, Gradients), TrainError> {
    let chunks: Result<Vec<(f64, Gradients)>, NumericsError> = batch
        .par_chunks(GRAD_CHUNK)
        .enumerate()
        .map(|(chunk_idx, chunk)| {
            let mut sum: Option<Gradients> = None;
            let mut loss_sum = 0.0;
            for (j, &idx) in chunk.iter().enumerate() {
                let flat = chunk_idx * GRAD_CHUNK + j;
                let phase = Phase::Train {
                    dropout_seed: dropout_seeds[flat],
                };
                let acts = model.forward(&fold.inputs[idx], phase)?;
                let target = Tensor::from_vec(&[2], fold.targets[idx].to_vec())?;
                let (loss, grad_out) = mse_loss_grad(acts.output(), &target)?;
                let grads = model.backward_trainable(&acts, &grad_out)?;
                loss_sum += loss;
                match &mut sum {
                    Some(s) => s.accumulate(&grads),
                    None => sum = Some(grads),
                }
            }
            Ok((loss_sum, sum.expect("non-empty chunk")))
        })
        .collect();
    let mut total: Option<Gradients> = None;
    let mut loss = 0.0;
    for (l, g) in chunks? {
        loss += l;
        match &mut total {
            Some(t) => t.accumulate(&g),
            None => total = Some(g),
        }
    }
    let mut grads = total.expect("non-empty batch");
    let scale = 1.0 / batch.len() as f64;
    grads.scale(scale);
    Ok((loss * scale, grads))
}

/// Mean validation loss and mean Euclidean error in mm.
pub fn evaluate_fold(model: &Model, fold: &Fold) -> Result<(f64, f64), TrainError> {
    let results: Result<Vec<(f64, f64)>, NumericsError> = fold
        .inputs
        .par_iter()
        .enumerate()
        .map(|(i, input)| {
            let out = model.infer(input)?;
            let target = Tensor::from_vec(&[2], fold.targets[i].to_vec())?;
            let loss = crate::numerics::mse_loss(&out, &target)?;
            let pred_mm = fold
                .label_map
                .denormalize([out.data()[0], out.data()[1]]);
            let truth = fold.positions_mm[i];
            let dx = pred_mm[0] - truth[0];
            let dy = pred_mm[1] - truth[1];
            Ok((loss, (dx * dx + dy * dy).sqrt()))
        })
        .collect();
    let results = results?;
    let n = results.len() as f64;
    let loss = results.iter().map(|r| r.0).sum::<f64>() / n;
    let me = results.iter().map(|r| r.1).sum::<f64>() / n;
    Ok((loss, me))
}

/// Supervised training with Adam, seeded shuffling, early stopping on
/// validation ME, and best-epoch parameter restore.
pub fn train(
    model: &mut Model,
    train_fold: &Fold,
    val_fold: &Fold,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if train_fold.is_empty() || val_fold.is_empty() {
        return Err(TrainError::EmptySplit {
            which: if train_fold.is_empty() { "train" } else { "val" },
        });
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::Config("batch size must be >= 1".into()));
    }
    let expected_antennas = model.input_shape[0];
    let actual_antennas = train_fold.inputs[0].shape()[0];
    if expected_antennas != actual_antennas {
        return Err(TrainError::AntennaMismatch {
            expected: expected_antennas,
            actual: actual_antennas,
        });
    }

    let mut adam = AdamState::new(model, cfg.adam)?;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_params = model.flat_params();
    let mut best_me = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut stale_epochs = 0usize;
    let mut order: Vec<usize> = (0..train_fold.len()).collect();

    for epoch in 0..cfg.epochs {
        adam.set_lr(cfg.lr_schedule.lr_at(cfg.adam.lr, epoch, cfg.epochs))?;
        let mut rng: Rng = rng_from_seed(derive_seed(cfg.seed, 0x0e90 + epoch as u64));
        order.shuffle(&mut rng);
        let dropout_base = derive_seed(cfg.seed, 0xd809 + epoch as u64);

        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let dropout_seeds: Vec<u64> = (0..batch.len())
                .map(|i| derive_seed(dropout_base, (n_batches * cfg.batch_size + i) as u64))
                .collect();
            let (loss, grads) = batch_gradients(model, train_fold, batch, &dropout_seeds)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    last_finite_epoch: epoch.saturating_sub(1),
                });
            }
            adam.update(model, &grads)?;
            epoch_loss += loss;
            n_batches += 1;
        }
        epoch_loss /= n_batches as f64;
        if !epoch_loss.is_finite() {
            return Err(TrainError::Diverged {
                last_finite_epoch: epoch.saturating_sub(1),
            });
        }

        let (val_loss, val_me) = evaluate_fold(model, val_fold)?;
        history.push(EpochStats {
            epoch,
            train_loss: epoch_loss,
            val_loss,
            val_me_mm: val_me,
        });
        if val_me < best_me {
            best_me = val_me;
            best_epoch = epoch;
            best_params = model.flat_params();
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if cfg.patience > 0 && stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    model.set_flat_params(&best_params)?;
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_me_mm: best_me,
    })
}

/// Draws the budgeted subset of a training fold.
pub fn budget_indices(
    fold_len: usize,
    n_samples: usize,
    strategy: BudgetStrategy,
    positions_mm: &[[f64; 2]],
    seed: u64,
) -> Result<Vec<usize>, TrainError> {
    if n_samples == 0 {
        return Err(TrainError::Config("sample budget must be >= 1".into()));
    }
    if n_samples > fold_len {
        return Err(TrainError::Config(format!(
            "sample budget {n_samples} exceeds the training split ({fold_len})"
        )));
    }
    match strategy {
        BudgetStrategy::Uniform => {
            let mut order: Vec<usize> = (0..fold_len).collect();
            order.shuffle(&mut rng_from_seed(derive_seed(seed, 0xb0d9)));
            let mut picked = order[..n_samples].to_vec();
            picked.sort_unstable();
            Ok(picked)
        }
        BudgetStrategy::Stratified => {
            let mut order: Vec<usize> = (0..fold_len).collect();
            order.sort_by(|&a, &b| {
                let pa = positions_mm[a];
                let pb = positions_mm[b];
                pa.partial_cmp(&pb).expect("finite positions")
            });
            let mut picked: Vec<usize> = (0..n_samples)
                .map(|i| order[i * fold_len / n_samples])
                .collect();
            picked.sort_unstable();
            Ok(picked)
        }
    }
}

/// Transfer learning: freezes everything below `freeze_boundary`, draws a
/// seeded subset of exactly `n_samples` from the new training fold, and
/// fine-tunes only the unfrozen layers (warm-started, never re-initialized).
pub fn transfer_train(
    model: &mut Model,
    new_train: &Fold,
    val_fold: &Fold,
    n_samples: usize,
    freeze_boundary: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if !new_train.is_empty() {
        let expected = model.input_shape[0];
        let actual = new_train.inputs[0].shape()[0];
        if expected != actual {
            return Err(TrainError::AntennaMismatch { expected, actual });
        }
    }
    split_for_transfer(model, freeze_boundary)?;
    let indices = budget_indices(
        new_train.len(),
        n_samples,
        cfg.budget_strategy,
        &new_train.positions_mm,
        cfg.seed,
    )?;
    let sub = new_train.subset(&indices);
    train(model, &sub, val_fold, cfg)
}
