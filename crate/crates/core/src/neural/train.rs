use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::{architecture_registry, StackRole, StackSpec};
use super::data::{SequenceDataset, Window};
use super::math::cross_entropy_indices;
use super::model::{DrowsyModel, TrainedStack};
use super::{clip_global_norm, Adam, AdamConfig, FusionDnn, LstmStack};
use crate::dsp::FeatureConfig;
use crate::error::{Error, Result};
use crate::motion::{derive_seed, ActionKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Learning rate multiplier applied after every epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    /// Fraction of `Normal`-labelled windows kept in each epoch.
    pub normal_keep: f64,
    pub short_hidden: usize,
    pub long_hidden: usize,
    pub fusion_hidden: usize,
    pub fusion_epochs: usize,
    pub fusion_learning_rate: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-3,
            lr_decay: 0.9,
            batch_size: 32,
            epochs: 8,
            seed: 0,
            clip_norm: 5.0,
            patience: 3,
            train_fraction: 0.9,
            validation_fraction: 0.1,
            normal_keep: 0.35,
            short_hidden: 64,
            long_hidden: 64,
            fusion_hidden: 16,
            fusion_epochs: 300,
            fusion_learning_rate: 1e-2,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("lr_decay", self.lr_decay),
            ("clip_norm", self.clip_norm),
            ("train_fraction", self.train_fraction),
            ("normal_keep", self.normal_keep),
            ("fusion_learning_rate", self.fusion_learning_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("patience", self.patience),
            ("short_hidden", self.short_hidden),
            ("long_hidden", self.long_hidden),
            ("fusion_hidden", self.fusion_hidden),
            ("fusion_epochs", self.fusion_epochs),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be positive"));
            }
        }
        if self.batch_size < 2 {
            return Err(Error::param("batch_size", "batch normalization needs at least 2"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction)
            || (self.train_fraction + self.validation_fraction - 1.0).abs() > 1e-9
        {
            return Err(Error::param(
                "validation_fraction",
                "train and validation fractions must sum to 1",
            ));
        }
        if self.normal_keep > 1.0 {
            return Err(Error::param("normal_keep", "must be at most 1"));
        }
        Ok(())
    }

    fn hidden_for(&self, role: StackRole) -> usize {
        match role {
            StackRole::Short | StackRole::Joint => self.short_hidden,
            StackRole::Long => self.long_hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackHistory {
    pub role: StackRole,
    pub layers: usize,
    pub timesteps: usize,
    pub train_windows: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    /// Wall clock; left out of serialized reports.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub architecture: String,
    pub fit_records: usize,
    pub validation_records: usize,
    pub stacks: Vec<StackHistory>,
    pub fusion_windows: usize,
    pub fusion_loss_initial: f64,
    pub fusion_loss_final: f64,
    #[serde(skip)]
    pub seconds: f64,
}

/// Windows whose class is not `Normal`, plus a seeded `keep` fraction of the rest.
fn subsample(data: &SequenceDataset, windows: &[Window], spec: &StackSpec, keep: f64, rng: &mut ChaCha8Rng) -> Vec<Window> {
    let normal = spec.normal_index();
    windows
        .iter()
        .copied()
        .filter(|&w| spec.class_index(data.label(w)) != normal || rng.random::<f64>() < keep)
        .collect()
}

fn labels(data: &SequenceDataset, windows: &[Window], spec: &StackSpec) -> Vec<usize> {
    windows.iter().map(|&w| spec.class_index(data.label(w))).collect()
}

/// Mean final-step cross-entropy of `net` (inference mode) on `windows`.
pub fn evaluate_stack_loss(net: &LstmStack, data: &SequenceDataset, spec: &StackSpec, windows: &[Window]) -> Result<f64> {
    let mut total = 0.0;
    for chunk in windows.chunks(256) {
        let x = data.gather(chunk, spec.timesteps);
        let p = net.infer(&x, chunk.len(), false)?;
        total += cross_entropy_indices(&p, &labels(data, chunk, spec)) * chunk.len() as f64;
    }
    Ok(total / windows.len().max(1) as f64)
}

/// Mini-batch BPTT with Adam, gradient clipping and early stopping on
/// `val` (when non-empty). The parameters of the best validation epoch are
/// kept.
pub fn fit_stack(
    net: &mut LstmStack,
    data: &SequenceDataset,
    spec: &StackSpec,
    train: &[Window],
    val: &[Window],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<StackHistory> {
    let start = Instant::now();
    let distinct: std::collections::BTreeSet<usize> = labels(data, train, spec).into_iter().collect();
    if distinct.len() < 2 {
        return Err(Error::DegenerateDataset(format!(
            "{:?} stack sees only class {:?} in {} windows",
            spec.role,
            distinct.iter().map(|&k| spec.classes[k].name()).collect::<Vec<_>>(),
            train.len()
        )));
    }
    let mut val_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    let val = subsample(data, val, spec, cfg.normal_keep, &mut val_rng);
    let mut adam = Adam::new(net, cfg.adam);
    let mut history = StackHistory {
        role: spec.role,
        layers: spec.layers,
        timesteps: spec.timesteps,
        train_windows: 0,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        seconds: 0.0,
    };
    let mut best: Option<(f64, LstmStack)> = None;
    let mut stale = 0;
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, epoch as u64));
        let mut selected = subsample(data, train, spec, cfg.normal_keep, &mut rng);
        selected.shuffle(&mut rng);
        history.train_windows = selected.len();
        let (mut sum, mut count) = (0.0, 0usize);
        for batch in selected.chunks(cfg.batch_size).filter(|b| b.len() >= 2) {
            let x = data.gather(batch, spec.timesteps);
            let mut step = net.train_step(&x, batch.len(), &labels(data, batch, spec))?;
            clip_global_norm(&mut step.grads, cfg.clip_norm);
            adam.update(net, &step.grads, lr);
            net.update_running(&step.stats);
            sum += step.loss * batch.len() as f64;
            count += batch.len();
        }
        history.train_loss.push(sum / count.max(1) as f64);
        lr *= cfg.lr_decay;
        if val.is_empty() {
            history.best_epoch = epoch;
            log::info!(
                "{:?} stack epoch {epoch}: train loss {:.4}",
                spec.role,
                history.train_loss[epoch]
            );
            continue;
        }
        let v = evaluate_stack_loss(net, data, spec, &val)?;
        history.val_loss.push(v);
        log::info!(
            "{:?} stack epoch {epoch}: train loss {:.4}, validation loss {v:.4}",
            spec.role,
            history.train_loss[epoch]
        );
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, net.clone()));
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, b)) = best {
        *net = b;
    }
    history.seconds = start.elapsed().as_secs_f64();
    Ok(history)
}

/// Full-batch Adam on binary cross-entropy; returns the loss curve.
pub fn fit_fusion(dnn: &mut FusionDnn, x: &Array2<f64>, targets: &[f64], cfg: &TrainConfig) -> Result<Vec<f64>> {
    let mut adam = Adam::new(dnn, cfg.adam);
    let mut losses = Vec::with_capacity(cfg.fusion_epochs + 1);
    for _ in 0..cfg.fusion_epochs {
        let (loss, cache) = dnn.forward_train(x, targets)?;
        let mut grads = dnn.zeros_like();
        dnn.backward(&cache, &mut grads);
        clip_global_norm(&mut grads, cfg.clip_norm);
        adam.update(dnn, &grads, cfg.fusion_learning_rate);
        losses.push(loss);
    }
    losses.push(dnn.loss(x, targets)?);
    Ok(losses)
}

/// Stratified split of `records` into (fit, validation) by action.
pub fn split_records(data: &SequenceDataset, records: &[usize], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<ActionKind, Vec<usize>> = BTreeMap::new();
    for &r in records {
        by_class.entry(data.records[r].action).or_default().push(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fit, mut val) = (Vec::new(), Vec::new());
    for (_, mut idx) in by_class {
        idx.shuffle(&mut rng);
        let n_val = (idx.len() as f64 * val_fraction).round() as usize;
        val.extend_from_slice(&idx[..n_val]);
        fit.extend_from_slice(&idx[n_val..]);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

/// Train every stack of `architecture` on `records`, then the fusion DNN on
/// the frozen stacks' outputs against drowsy/normal window labels.
pub fn train(
    data: &SequenceDataset,
    records: &[usize],
    architecture: &str,
    dsp: &FeatureConfig,
    cfg: &TrainConfig,
) -> Result<(DrowsyModel, TrainReport)> {
    cfg.validate()?;
    let arch = architecture_registry().get(architecture)?;
    if records.is_empty() || data.dim == 0 {
        return Err(Error::DegenerateDataset("no training records".into()));
    }
    let start = Instant::now();
    let (fit, val) = split_records(data, records, cfg.validation_fraction, derive_seed(cfg.seed, 1));
    let fit_windows = data.windows(&fit);
    let val_windows = data.windows(&val);
    let mut stacks = Vec::new();
    let mut histories = Vec::new();
    for (i, spec) in arch.stacks().into_iter().enumerate() {
        let stack_seed = derive_seed(cfg.seed, 100 + i as u64);
        let mut net = LstmStack::new(
            data.dim,
            cfg.hidden_for(spec.role),
            spec.layers,
            spec.timesteps,
            spec.class_names(),
            stack_seed,
        )?;
        let h = fit_stack(&mut net, data, &spec, &fit_windows, &val_windows, cfg, derive_seed(stack_seed, 1))?;
        histories.push(h);
        stacks.push(TrainedStack { spec, net });
    }

    let width: usize = stacks.iter().map(|s| s.spec.classes.len()).sum();
    let mut model = DrowsyModel {
        architecture: arch.name().to_string(),
        dsp: dsp.clone(),
        stacks,
        fusion: FusionDnn::new(width, cfg.fusion_hidden, derive_seed(cfg.seed, 200))?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 201));
    let fusion_windows: Vec<Window> = fit_windows
        .iter()
        .copied()
        .filter(|&w| data.label(w).is_drowsy() || rng.random::<f64>() < cfg.normal_keep)
        .collect();
    let targets: Vec<f64> = fusion_windows
        .iter()
        .map(|&w| if data.label(w).is_drowsy() { 1.0 } else { 0.0 })
        .collect();
    if targets.iter().all(|&t| t == targets[0]) {
        return Err(Error::DegenerateDataset(
            "fusion targets contain a single class".into(),
        ));
    }
    let (d, _) = model.infer_windows(data, &fusion_windows)?;
    let losses = fit_fusion(&mut model.fusion, &d, &targets, cfg)?;
    log::info!(
        "fusion: {} windows, loss {:.4} -> {:.4}",
        fusion_windows.len(),
        losses[0],
        losses[losses.len() - 1]
    );
    let report = TrainReport {
        architecture: model.architecture.clone(),
        fit_records: fit.len(),
        validation_records: val.len(),
        stacks: histories,
        fusion_windows: fusion_windows.len(),
        fusion_loss_initial: losses[0],
        fusion_loss_final: losses[losses.len() - 1],
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}
