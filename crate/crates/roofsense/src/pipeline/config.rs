//! Run configuration: defaults, a TOML file, then `key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use roofsense_core::downstream::Family;
use roofsense_core::{Country, Task};
use serde::{Deserialize, Serialize};

use crate::models::train::TrainConfig;
use crate::models::{Arch, Modality};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    /// A georeferenced survey area that `extract` crops.
    Scene,
    /// Ready-made patch pairs.
    Patches,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    RgbOnly,
    LidarOnly,
    FeatureConcat,
    SoftmaxMean,
    SoftmaxConcat,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::RgbOnly, Strategy::LidarOnly, Strategy::FeatureConcat, Strategy::SoftmaxMean, Strategy::SoftmaxConcat];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::RgbOnly => "rgb_only",
            Strategy::LidarOnly => "lidar_only",
            Strategy::FeatureConcat => "feature_concat",
            Strategy::SoftmaxMean => "softmax_mean",
            Strategy::SoftmaxConcat => "softmax_concat",
        }
    }

    pub fn modalities(self) -> &'static [Modality] {
        match self {
            Strategy::RgbOnly => &[Modality::Rgb],
            Strategy::LidarOnly => &[Modality::Lidar],
            _ => &[Modality::Rgb, Modality::Lidar],
        }
    }

    /// True when a downstream classifier is searched and fitted.
    pub fn uses_downstream(self) -> bool {
        matches!(self, Strategy::FeatureConcat | Strategy::SoftmaxConcat)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown fusion strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealData {
    /// Orthophotos; each footprint is cropped from the first one it overlaps.
    pub rgb: Vec<PathBuf>,
    /// Precomputed nDSM. When absent it is derived from `dsm` and `dtm`.
    pub ndsm: Option<PathBuf>,
    pub dsm: Option<PathBuf>,
    pub dtm: Option<PathBuf>,
    pub footprints: Option<PathBuf>,
    /// CSV joined on building_id; overrides labels in the footprint file.
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub mode: SynthMode,
    pub n: usize,
    /// Patch side for `patches` mode.
    pub side: usize,
    pub difficulty: f32,
    pub dominica_share: f64,
    pub rgb_cell_size: f64,
    pub lidar_cell_size: f64,
    pub spacing: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            mode: SynthMode::Scene,
            n: 200,
            side: 32,
            difficulty: 0.5,
            dominica_share: 0.75,
            rgb_cell_size: 0.25,
            lidar_cell_size: 0.5,
            spacing: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: Source,
    pub real: RealData,
    pub synthetic: SynthConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { source: Source::Synthetic, real: RealData::default(), synthetic: SynthConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub scale: f64,
    pub clamp_negative: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { scale: 1.5, clamp_negative: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_frac: f64,
    /// Country every test sample must come from.
    pub region: Option<Country>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_frac: 0.75, region: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    /// Defaults to the best RGB backbone for the task.
    pub rgb: Option<Arch>,
    /// Defaults to the best LiDAR backbone for the task.
    pub lidar: Option<Arch>,
    /// Input side and embedding width for `tiny_test`.
    pub side: Option<usize>,
    pub embedding_dim: Option<usize>,
    /// Overrides the per-architecture default.
    pub pretrained: Option<bool>,
    /// Permits pairings other than the per-task defaults.
    pub allow_any_pairing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub strategy: Strategy,
    pub family: Family,
    pub rgb_checkpoint: Option<PathBuf>,
    pub lidar_checkpoint: Option<PathBuf>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { strategy: Strategy::FeatureConcat, family: Family::Lr, rgb_checkpoint: None, lidar_checkpoint: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/dataset`.
    pub dataset_dir: Option<PathBuf>,
    /// Omits wall-clock timestamps so reruns produce identical files.
    pub deterministic: bool,
    pub data: DataConfig,
    pub extract: ExtractConfig,
    pub split: SplitConfig,
    pub models: ModelsConfig,
    pub train: TrainConfig,
    pub fusion: FusionConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::RoofType,
            seed: 0,
            output_dir: PathBuf::from("runs"),
            dataset_dir: None,
            deterministic: false,
            data: DataConfig::default(),
            extract: ExtractConfig::default(),
            split: SplitConfig::default(),
            models: ModelsConfig::default(),
            train: TrainConfig::default(),
            fusion: FusionConfig::default(),
        }
    }
}

/// Backbones fused for each task when nothing else is configured.
pub fn default_pair(task: Task) -> (Arch, Arch) {
    match task {
        Task::RoofMaterial => (Arch::EfficientNetB0, Arch::InceptionV3),
        Task::RoofType | Task::Joint => (Arch::ResNet50, Arch::InceptionV3),
    }
}

impl RunConfig {
    /// Defaults, overlaid by `file` when given, overlaid by `overrides`
    /// (`dotted.key=value`, value parsed as TOML with a bare-string fallback).
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut value = toml::Value::try_from(RunConfig::default()).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let file_value: toml::Value =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            merge(&mut value, file_value);
        }
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            set_path(&mut value, key.trim(), parse_scalar(raw.trim()))?;
        }
        let cfg: RunConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Field-level checks that need no filesystem access.
    pub fn check(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.split.train_frac > 0.0 && self.split.train_frac <= 1.0) {
            return Err(Error::Config(format!("split.train_frac {} outside (0, 1]", self.split.train_frac)));
        }
        if self.extract.scale.is_nan() || self.extract.scale < 1.0 {
            return Err(Error::Config(format!("extract.scale {} must be >= 1", self.extract.scale)));
        }
        let (rgb, lidar) = (self.arch(Modality::Rgb), self.arch(Modality::Lidar));
        let paper = |a: Arch| a != Arch::TinyTest;
        if !self.models.allow_any_pairing && paper(rgb) && paper(lidar) && (rgb, lidar) != default_pair(self.task) {
            return Err(Error::Config(format!(
                "{} fuses {} (RGB) with {} (LiDAR); set models.allow_any_pairing to use {} with {}",
                self.task.as_str(),
                default_pair(self.task).0.as_str(),
                default_pair(self.task).1.as_str(),
                rgb.as_str(),
                lidar.as_str()
            )));
        }
        Ok(())
    }

    /// Checks that the configured input files exist.
    pub fn check_inputs(&self) -> Result<()> {
        if self.data.source != Source::Real {
            return Ok(());
        }
        let r = &self.data.real;
        if r.rgb.is_empty() {
            return Err(Error::Config("data.real.rgb lists no rasters".into()));
        }
        if r.ndsm.is_none() && (r.dsm.is_none() || r.dtm.is_none()) {
            return Err(Error::Config("data.real needs ndsm, or both dsm and dtm".into()));
        }
        if r.footprints.is_none() {
            return Err(Error::Config("data.real.footprints is required".into()));
        }
        let paths = r.rgb.iter().chain(&r.ndsm).chain(&r.dsm).chain(&r.dtm).chain(&r.footprints).chain(&r.labels);
        for p in paths {
            if !p.exists() {
                return Err(Error::Config(format!("input {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn arch(&self, modality: Modality) -> Arch {
        let (rgb, lidar) = default_pair(self.task);
        match modality {
            Modality::Rgb => self.models.rgb.unwrap_or(rgb),
            Modality::Lidar => self.models.lidar.unwrap_or(lidar),
        }
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.dataset_dir.clone().unwrap_or_else(|| self.output_dir.join("dataset"))
    }

    pub fn synth_dir(&self) -> PathBuf {
        self.output_dir.join("synth")
    }

    pub fn checkpoint_dir(&self, modality: Modality) -> PathBuf {
        let configured = match modality {
            Modality::Rgb => &self.fusion.rgb_checkpoint,
            Modality::Lidar => &self.fusion.lidar_checkpoint,
        };
        configured.clone().unwrap_or_else(|| {
            self.output_dir.join("checkpoints").join(format!("{}_{}", modality.as_str(), self.arch(modality).as_str()))
        })
    }

    pub fn run_dir(&self, name: &str) -> PathBuf {
        self.output_dir.join("runs").join(name)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| Error::Config(format!("{key}: {part} is not a table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        cur = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(Error::Config("empty override key".into()))
}
