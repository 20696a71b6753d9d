//! Supervised fine-tuning: Adam, cross-entropy, and learning-rate decay on
//! a validation-loss plateau.

use std::collections::BTreeMap;

use candle_core::{DType, Tensor};
use rand::seq::SliceRandom;
use roofsense_core::augment::AugmentParams;
use roofsense_core::rng::{derive_seed, item_seed, rng_from_seed};
use roofsense_core::split::{stratified_split, SplitParams};
use roofsense_core::{Country, PixelGrid, Split};
use serde::{Deserialize, Serialize};

use super::input::{prepare, prepared_tensor};
use super::Model;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    /// Share of the training rows held out for the plateau monitor when no
    /// validation set is given.
    pub val_fraction: f64,
    pub augment: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            batch_size: 32,
            max_epochs: 30,
            plateau_factor: 0.1,
            plateau_patience: 7,
            val_fraction: 0.1,
            augment: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.plateau_factor > 0.0
            && self.plateau_factor < 1.0
            && self.plateau_patience > 0;
        if !positive {
            return Err(Error::Invalid(format!("training hyperparameters must be positive: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Invalid(format!("val_fraction {} outside [0, 1)", self.val_fraction)));
        }
        Ok(())
    }

    /// True when the plateau rule can fire within the epoch budget.
    pub fn plateau_reachable(&self) -> bool {
        self.plateau_patience < self.max_epochs
    }
}

/// Decays the learning rate by `factor` once the monitored loss has failed
/// to improve for `patience` consecutive epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub factor: f64,
    pub patience: usize,
    pub best: Option<f64>,
    pub bad_epochs: usize,
}

impl Plateau {
    /// Relative improvement needed to reset the counter.
    pub const THRESHOLD: f64 = 1e-4;

    pub fn new(factor: f64, patience: usize) -> Self {
        Plateau { factor, patience, best: None, bad_epochs: 0 }
    }

    /// Records one epoch's loss and returns the learning rate for the next.
    pub fn step(&mut self, loss: f64, lr: f64) -> f64 {
        let improved = match self.best {
            None => true,
            Some(b) => loss < b - Self::THRESHOLD * b.abs(),
        };
        if improved {
            self.best = Some(loss);
            self.bad_epochs = 0;
            return lr;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience {
            self.bad_epochs = 0;
            lr * self.factor
        } else {
            lr
        }
    }
}

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: BTreeMap<String, Tensor>,
    pub v: BTreeMap<String, Tensor>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }
}

impl Adam {
    pub fn update(&mut self, model: &Model, grads: &candle_core::backprop::GradStore, lr: f64) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let (c1, c2) = (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t));
        for (name, var) in model.trainable() {
            let Some(g) = grads.get(var.as_tensor()) else { continue };
            let g = &g.detach();
            let m = match self.m.get(&name) {
                Some(m) => ((m * self.beta1)? + (g * (1.0 - self.beta1))?)?,
                None => (g * (1.0 - self.beta1))?,
            };
            let v = match self.v.get(&name) {
                Some(v) => ((v * self.beta2)? + (g.sqr()? * (1.0 - self.beta2))?)?,
                None => (g.sqr()? * (1.0 - self.beta2))?,
            };
            let step = ((&m / c1)? / ((&v / c2)?.sqrt()? + self.eps)?)?;
            var.set(&(var.as_tensor() - (step * lr)?)?)?;
            self.m.insert(name.clone(), m.detach());
            self.v.insert(name, v.detach());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

/// Optimiser and schedule state carried between runs.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub epochs_done: usize,
    pub lr: f64,
    pub plateau: Plateau,
    pub adam: Adam,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    pub fn fresh(cfg: &TrainConfig) -> Self {
        TrainState {
            epochs_done: 0,
            lr: cfg.learning_rate,
            plateau: Plateau::new(cfg.plateau_factor, cfg.plateau_patience),
            adam: Adam::default(),
            history: Vec::new(),
        }
    }
}

/// Labelled patches of one modality.
#[derive(Debug, Clone, Default)]
pub struct Examples {
    pub ids: Vec<String>,
    pub patches: Vec<PixelGrid>,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Examples {
        Examples {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            patches: idx.iter().map(|&i| self.patches[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Splits off a stratified validation share.
pub fn hold_out(data: &Examples, fraction: f64, seed: u64, task: roofsense_core::Task) -> Result<(Examples, Examples)> {
    let labels: Vec<Option<usize>> = data.labels.iter().map(|&l| Some(l)).collect();
    let countries = vec![Country::Other; data.len()];
    let params = SplitParams { train_frac: 1.0 - fraction, seed: derive_seed(seed, "holdout"), region: None };
    let a = stratified_split(&labels, &countries, task, &params)?;
    Ok((data.subset(&a.indices(Split::Train)), data.subset(&a.indices(Split::Test))))
}

fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let target = Tensor::new(labels.iter().map(|&l| l as u32).collect::<Vec<_>>(), logits.device())?;
    Ok(candle_nn::loss::cross_entropy(logits, &target)?)
}

fn mean_loss(model: &Model, data: &[PixelGrid], labels: &[usize], batch: usize) -> Result<f64> {
    let mut total = 0.0;
    for (chunk, lab) in data.chunks(batch).zip(labels.chunks(batch)) {
        let x = prepared_tensor(chunk, &model.norm)?;
        let (_, logits) = model.forward(&x, false, 0)?;
        total += cross_entropy(&logits, lab)?.to_dtype(DType::F64)?.to_scalar::<f64>()? * chunk.len() as f64;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Trains `model` for the remaining epochs of `cfg`. Without `val`, a
/// stratified share of `train` is held out for the plateau monitor.
pub fn train(
    model: &mut Model,
    train: &Examples,
    val: Option<&Examples>,
    cfg: &TrainConfig,
    state: Option<TrainState>,
) -> Result<TrainState> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    let k = model.spec.num_classes;
    if let Some(&bad) = train.labels.iter().chain(val.iter().flat_map(|v| &v.labels)).find(|&&l| l >= k) {
        return Err(roofsense_core::Error::LabelOutOfRange { label: bad, classes: k }.into());
    }
    let mut state = state.unwrap_or_else(|| TrainState::fresh(cfg));
    if state.epochs_done >= cfg.max_epochs {
        return Ok(state);
    }
    let (fit, held);
    let (fit, val) = match val {
        Some(v) => (train, v),
        None if cfg.val_fraction > 0.0 && train.len() >= 10 => {
            (fit, held) = hold_out(train, cfg.val_fraction, cfg.seed, model.task)?;
            (&fit, &held)
        }
        None => (train, train),
    };
    let side = model.spec.input_side;
    let prepared: Vec<PixelGrid> = fit.patches.iter().map(|p| prepare(p, side)).collect::<Result<_>>()?;
    let val_prepared: Vec<PixelGrid> = val.patches.iter().map(|p| prepare(p, side)).collect::<Result<_>>()?;
    let aug_seed = derive_seed(cfg.seed, "augment");
    let drop_seed = derive_seed(cfg.seed, "dropout");
    let shuffle_seed = derive_seed(cfg.seed, "shuffle");

    for epoch in state.epochs_done..cfg.max_epochs {
        let mut order: Vec<usize> = (0..fit.len()).collect();
        order.shuffle(&mut rng_from_seed(item_seed(shuffle_seed, "epoch", epoch as u64)));
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let patches: Vec<PixelGrid> = batch
                .iter()
                .map(|&i| {
                    if cfg.augment {
                        let mut rng = rng_from_seed(item_seed(aug_seed, &fit.ids[i], epoch as u64));
                        AugmentParams::draw(&mut rng).apply(&prepared[i])
                    } else {
                        prepared[i].clone()
                    }
                })
                .collect();
            let labels: Vec<usize> = batch.iter().map(|&i| fit.labels[i]).collect();
            let x = prepared_tensor(&patches, &model.norm)?;
            let step = (epoch * order.len().div_ceil(cfg.batch_size) + b) as u64;
            let (_, logits) = model.forward(&x, true, item_seed(drop_seed, "step", step))?;
            let loss = cross_entropy(&logits, &labels)?;
            total += loss.to_dtype(DType::F64)?.to_scalar::<f64>()? * batch.len() as f64;
            let grads = loss.backward()?;
            state.adam.update(model, &grads, state.lr)?;
        }
        let train_loss = total / fit.len() as f64;
        let val_loss = mean_loss(model, &val_prepared, &val.labels, cfg.batch_size)?;
        let lr = state.lr;
        state.lr = state.plateau.step(val_loss, lr);
        state.history.push(EpochRecord { epoch: epoch + 1, train_loss, val_loss, lr });
        state.epochs_done = epoch + 1;
    }
    Ok(state)
}

/// Fraction of `data` whose argmax prediction matches its label.
pub fn accuracy(model: &Model, data: &Examples) -> Result<f64> {
    let p = model.predict_softmax(&data.patches)?;
    let hits = p.iter_rows().zip(&data.labels).filter(|(row, &l)| roofsense_core::fusion::argmax(row) == l).count();
    Ok(hits as f64 / data.len().max(1) as f64)
}
