//! On-disk checkpoints: weights, optimiser moments and run metadata.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use candle_core::{Device, Tensor};
use roofsense_core::Task;
use serde::{Deserialize, Serialize};

use super::train::{Adam, EpochRecord, Plateau, TrainConfig, TrainState};
use super::{init, BackboneSpec, InitInfo, Model, Normalization, Offline};
use crate::{Error, Result};

pub const WEIGHTS_FILE: &str = "model.safetensors";
pub const OPTIMIZER_FILE: &str = "optimizer.safetensors";
pub const META_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub spec: BackboneSpec,
    pub task: Task,
    pub modality: super::Modality,
    pub normalization: Normalization,
    pub init: InitInfo,
    pub config: TrainConfig,
    pub dataset_hash: Option<String>,
    pub epochs_done: usize,
    pub lr: f64,
    pub plateau: Plateau,
    pub adam_step: u64,
    pub history: Vec<EpochRecord>,
    pub weights_sha256: String,
}

/// Writes the model, optimiser state and metadata into `dir`.
pub fn save(
    dir: &Path,
    model: &Model,
    modality: super::Modality,
    config: &TrainConfig,
    state: &TrainState,
    dataset_hash: Option<String>,
) -> Result<CheckpointMeta> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let weights: HashMap<String, Tensor> = model.tensors().into_iter().collect();
    let path = dir.join(WEIGHTS_FILE);
    candle_core::safetensors::save(&weights, &path).map_err(|e| Error::format(&path, e))?;
    let mut moments = HashMap::new();
    for (name, t) in &state.adam.m {
        moments.insert(format!("m.{name}"), t.clone());
    }
    for (name, t) in &state.adam.v {
        moments.insert(format!("v.{name}"), t.clone());
    }
    let path = dir.join(OPTIMIZER_FILE);
    candle_core::safetensors::save(&moments, &path).map_err(|e| Error::format(&path, e))?;
    let meta = CheckpointMeta {
        spec: model.spec.clone(),
        task: model.task,
        modality,
        normalization: model.norm.clone(),
        init: model.init.clone(),
        config: config.clone(),
        dataset_hash,
        epochs_done: state.epochs_done,
        lr: state.lr,
        plateau: state.plateau.clone(),
        adam_step: state.adam.step,
        history: state.history.clone(),
        weights_sha256: model.weights_hash()?,
    };
    let path = dir.join(META_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&path, e))?;
    Ok(meta)
}

pub fn read_meta(dir: &Path) -> Result<CheckpointMeta> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
}

/// Restores the model from `dir`, checking the stored weight hash.
pub fn load(dir: &Path) -> Result<(Model, CheckpointMeta)> {
    let meta = read_meta(dir)?;
    let spec = BackboneSpec { pretrained: false, ..meta.spec.clone() };
    let mut model = Model::build(&spec, meta.task, meta.init.seed, &Offline)?;
    init::load_into(model.vars(), &dir.join(WEIGHTS_FILE))?;
    model.spec = meta.spec.clone();
    model.init = meta.init.clone();
    model.norm = meta.normalization.clone();
    let hash = model.weights_hash()?;
    if hash != meta.weights_sha256 {
        return Err(Error::format(dir.join(WEIGHTS_FILE), "weights do not match the recorded hash"));
    }
    Ok((model, meta))
}

/// Restores model and optimiser state to continue training.
pub fn resume(dir: &Path) -> Result<(Model, CheckpointMeta, TrainState)> {
    let (model, meta) = load(dir)?;
    let path = dir.join(OPTIMIZER_FILE);
    let loaded = candle_core::safetensors::load(&path, &Device::Cpu).map_err(|e| Error::format(&path, e))?;
    let (mut m, mut v) = (BTreeMap::new(), BTreeMap::new());
    for (key, t) in loaded {
        if let Some(name) = key.strip_prefix("m.") {
            m.insert(name.to_string(), t);
        } else if let Some(name) = key.strip_prefix("v.") {
            v.insert(name.to_string(), t);
        }
    }
    let state = TrainState {
        epochs_done: meta.epochs_done,
        lr: meta.lr,
        plateau: meta.plateau.clone(),
        adam: Adam { step: meta.adam_step, m, v, ..Adam::default() },
        history: meta.history.clone(),
    };
    Ok((model, meta, state))
}

/// Per-epoch losses as CSV.
pub fn history_csv(history: &[EpochRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in history {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
