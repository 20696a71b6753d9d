//! Convolutional backbones, single-channel adaptation, training and
//! embedding/softmax extraction.

mod efficientnet;
mod inception;
pub mod init;
pub mod input;
mod layers;
mod resnet;
pub mod checkpoint;
mod tiny;
pub mod train;

use std::fmt;
use std::str::FromStr;

use candle_core::{DType, Device, Tensor, Var};
use candle_nn::{Linear, Module, VarMap};
use roofsense_core::{Matrix, PixelGrid, Task};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use efficientnet::EfficientNetB0;
pub use inception::InceptionV3;
pub use init::{DirectoryWeights, Offline, WeightProvider};
pub use input::{Modality, Normalization};
pub use resnet::ResNet50;
pub use tiny::TinyNet;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arch {
    #[serde(rename = "resnet50")]
    ResNet50,
    #[serde(rename = "inceptionv3")]
    InceptionV3,
    #[serde(rename = "efficientnet_b0")]
    EfficientNetB0,
    #[serde(rename = "tiny_test")]
    TinyTest,
}

impl Arch {
    pub const PAPER: [Arch; 3] = [Arch::ResNet50, Arch::InceptionV3, Arch::EfficientNetB0];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::ResNet50 => "resnet50",
            Arch::InceptionV3 => "inceptionv3",
            Arch::EfficientNetB0 => "efficientnet_b0",
            Arch::TinyTest => "tiny_test",
        }
    }

    pub fn default_side(self) -> usize {
        match self {
            Arch::InceptionV3 => 299,
            Arch::TinyTest => 32,
            _ => 224,
        }
    }

    pub fn default_embedding(self) -> usize {
        match self {
            Arch::ResNet50 => ResNet50::EMBEDDING,
            Arch::InceptionV3 => InceptionV3::EMBEDDING,
            Arch::EfficientNetB0 => EfficientNetB0::EMBEDDING,
            Arch::TinyTest => 16,
        }
    }

    pub fn default_dropout(self) -> f64 {
        match self {
            Arch::ResNet50 => 0.5,
            _ => 0.0,
        }
    }

    pub fn first_conv_name(self) -> &'static str {
        match self {
            Arch::ResNet50 => ResNet50::FIRST_CONV,
            Arch::InceptionV3 => InceptionV3::FIRST_CONV,
            Arch::EfficientNetB0 => EfficientNetB0::FIRST_CONV,
            Arch::TinyTest => TinyNet::FIRST_CONV,
        }
    }

    fn head_prefix(self) -> &'static str {
        match self {
            Arch::EfficientNetB0 => "classifier.1",
            _ => "fc",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "resnet50" => Ok(Arch::ResNet50),
            "inceptionv3" | "inception_v3" => Ok(Arch::InceptionV3),
            "efficientnet_b0" | "efficientnetb0" => Ok(Arch::EfficientNetB0),
            "tiny_test" | "tiny" => Ok(Arch::TinyTest),
            other => Err(Error::Invalid(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Architecture identity and shape contract of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub arch: Arch,
    pub input_side: usize,
    pub in_channels: usize,
    pub embedding_dim: usize,
    pub pretrained: bool,
    pub dropout_before_fc: f64,
    pub num_classes: usize,
}

impl BackboneSpec {
    /// Defaults of `arch`: input side, embedding width and head dropout.
    pub fn new(arch: Arch, in_channels: usize, num_classes: usize) -> Self {
        BackboneSpec {
            arch,
            input_side: arch.default_side(),
            in_channels,
            embedding_dim: arch.default_embedding(),
            pretrained: arch != Arch::TinyTest,
            dropout_before_fc: arch.default_dropout(),
            num_classes,
        }
    }

    pub fn tiny(side: usize, embedding_dim: usize, in_channels: usize, num_classes: usize) -> Self {
        BackboneSpec { input_side: side, embedding_dim, ..Self::new(Arch::TinyTest, in_channels, num_classes) }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.in_channels, 1 | 3) {
            return Err(Error::Invalid(format!("in_channels must be 1 or 3, got {}", self.in_channels)));
        }
        if self.num_classes < 2 {
            return Err(Error::Invalid(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        if !(0.0..1.0).contains(&self.dropout_before_fc) {
            return Err(Error::Invalid(format!("dropout {} outside [0, 1)", self.dropout_before_fc)));
        }
        if self.arch != Arch::TinyTest && self.embedding_dim != self.arch.default_embedding() {
            return Err(Error::Invalid(format!(
                "{} has embedding width {}, not {}",
                self.arch,
                self.arch.default_embedding(),
                self.embedding_dim
            )));
        }
        if self.input_side < 8 || self.embedding_dim == 0 {
            return Err(Error::Invalid(format!("input side {} too small", self.input_side)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant, clippy::enum_variant_names)]
enum Net {
    ResNet(ResNet50),
    Inception(InceptionV3),
    Efficient(EfficientNetB0),
    Tiny(TinyNet),
}

/// How parameters were initialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitInfo {
    pub seed: u64,
    /// `seeded-random` or the weight provider used.
    pub weights: String,
    /// False when pretrained weights were requested but unavailable.
    pub comparable: bool,
}

/// A backbone with its classification head and input normalisation.
pub struct Model {
    pub spec: BackboneSpec,
    pub task: Task,
    pub init: InitInfo,
    pub norm: Normalization,
    vars: VarMap,
    net: Net,
    head: Linear,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model").field("spec", &self.spec).field("task", &self.task).field("init", &self.init).finish()
    }
}

/// Batch size used for inference.
const EVAL_BATCH: usize = 32;

impl Model {
    /// Builds an untrained model. Pretrained tensors come from `provider`
    /// when `spec.pretrained` is set; anything missing is seeded from `seed`.
    pub fn build(spec: &BackboneSpec, task: Task, seed: u64, provider: &dyn WeightProvider) -> Result<Model> {
        spec.validate()?;
        if task.num_classes() != spec.num_classes {
            return Err(Error::Invalid(format!(
                "{} has {} classes but the head has {}",
                task.as_str(),
                task.num_classes(),
                spec.num_classes
            )));
        }
        let pretrained = if spec.pretrained { provider.load(spec.arch)? } else { None };
        let init = InitInfo {
            seed,
            weights: if pretrained.is_some() { provider.describe() } else { "seeded-random".into() },
            comparable: !spec.pretrained || pretrained.is_some(),
        };
        // The pretrained head has the wrong width, so it is always seeded.
        let pretrained = pretrained.map(|mut p| {
            let head = format!("{}.", spec.arch.head_prefix());
            p.retain(|k, _| !k.starts_with(&head));
            p
        });
        let adapt = (spec.in_channels == 1).then(|| spec.arch.first_conv_name().to_string());
        let vars = VarMap::new();
        let vb = init::seeded_builder(&vars, seed, pretrained, adapt);
        let c = spec.in_channels;
        let net = match spec.arch {
            Arch::ResNet50 => Net::ResNet(ResNet50::new(&vb, c)?),
            Arch::InceptionV3 => Net::Inception(InceptionV3::new(&vb, c)?),
            Arch::EfficientNetB0 => Net::Efficient(EfficientNetB0::new(&vb, c)?),
            Arch::TinyTest => Net::Tiny(TinyNet::new(&vb, c, spec.embedding_dim)?),
        };
        let head = candle_nn::linear(spec.embedding_dim, spec.num_classes, vb.pp(spec.arch.head_prefix()))?;
        let norm = Normalization::default_for(if c == 1 { Modality::Lidar } else { Modality::Rgb }, spec.pretrained);
        Ok(Model { spec: spec.clone(), task, init, norm, vars, net, head })
    }

    pub fn vars(&self) -> &VarMap {
        &self.vars
    }

    /// First convolution weights, `[c_out, in_channels, k, k]`.
    pub fn first_conv(&self) -> &Tensor {
        match &self.net {
            Net::ResNet(n) => n.first_conv(),
            Net::Inception(n) => n.first_conv(),
            Net::Efficient(n) => n.first_conv(),
            Net::Tiny(n) => n.first_conv(),
        }
    }

    /// Pooled embedding and logits for a normalised `[n, c, side, side]`
    /// batch. `dropout_seed` is only used in training mode.
    pub fn forward(&self, x: &Tensor, train: bool, dropout_seed: u64) -> Result<(Tensor, Tensor)> {
        let (_, c, h, w) = x.dims4()?;
        if c != self.spec.in_channels || h != self.spec.input_side || w != self.spec.input_side {
            return Err(Error::Invalid(format!(
                "input {c}x{h}x{w} does not match {}x{}x{}",
                self.spec.in_channels, self.spec.input_side, self.spec.input_side
            )));
        }
        let emb = match &self.net {
            Net::ResNet(n) => n.features(x, train)?,
            Net::Inception(n) => n.features(x, train)?,
            Net::Efficient(n) => n.features(x, train)?,
            Net::Tiny(n) => n.features(x, train)?,
        };
        let h = if train { layers::dropout(&emb, self.spec.dropout_before_fc, dropout_seed)? } else { emb.clone() };
        Ok((emb, self.head.forward(&h)?))
    }

    /// Pads, resizes and normalises patches into a batch tensor.
    pub fn batch(&self, patches: &[&PixelGrid]) -> Result<Tensor> {
        input::batch_tensor(patches, self.spec.input_side, self.spec.in_channels, &self.norm)
    }

    fn eval_rows(&self, patches: &[PixelGrid], softmax: bool) -> Result<Matrix> {
        let width = if softmax { self.spec.num_classes } else { self.spec.embedding_dim };
        let mut data = Vec::with_capacity(patches.len() * width);
        for chunk in patches.chunks(EVAL_BATCH) {
            let refs: Vec<&PixelGrid> = chunk.iter().collect();
            let (emb, logits) = self.forward(&self.batch(&refs)?, false, 0)?;
            let out = if softmax { candle_nn::ops::softmax_last_dim(&logits.to_dtype(DType::F64)?)? } else { emb };
            data.extend(out.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?);
        }
        Ok(Matrix::new(patches.len(), width, data)?)
    }

    /// Softmax rows, one per patch, in inference mode.
    pub fn predict_softmax(&self, patches: &[PixelGrid]) -> Result<Matrix> {
        self.eval_rows(patches, true)
    }

    /// Global-average-pool activations, one row per patch.
    pub fn extract_embeddings(&self, patches: &[PixelGrid]) -> Result<Matrix> {
        self.eval_rows(patches, false)
    }

    /// Variables updated by the optimiser, sorted by name.
    pub fn trainable(&self) -> Vec<(String, Var)> {
        let data = self.vars.data().lock().expect("var map lock");
        let mut out: Vec<(String, Var)> = data
            .iter()
            .filter(|(k, _)| !k.ends_with("running_mean") && !k.ends_with("running_var"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Every tensor, sorted by name.
    pub fn tensors(&self) -> Vec<(String, Tensor)> {
        init::sorted_tensors(&self.vars)
    }

    /// SHA-256 over names, shapes and little-endian values of all tensors.
    pub fn weights_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for (name, t) in self.tensors() {
            h.update(name.as_bytes());
            for d in t.dims() {
                h.update((*d as u64).to_le_bytes());
            }
            for v in t.to_dtype(DType::F32)?.flatten_all()?.to_vec1::<f32>()? {
                h.update(v.to_le_bytes());
            }
        }
        Ok(hex::encode(h.finalize()))
    }

    pub fn device(&self) -> Device {
        Device::Cpu
    }
}
