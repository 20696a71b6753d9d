//! Deterministic parameter creation.
//!
//! Every variable is initialised from a seed derived from the model seed and
//! the variable name, so the result does not depend on construction order.
//! A [`WeightProvider`] can supply pretrained tensors by name; single-channel
//! models get their first convolution through `adapt_first_layer`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Result as CResult, Shape, Tensor, Var};
use candle_nn::init::{Init, NormalOrUniform};
use candle_nn::var_builder::SimpleBackend;
use candle_nn::{VarBuilder, VarMap};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use roofsense_core::adapt::{adapt_first_layer, ConvWeights};
use roofsense_core::rng::{item_seed, rng_from_seed};

use super::Arch;

/// Environment variable naming the directory holding pretrained weights as
/// `<arch>.safetensors`.
pub const WEIGHTS_DIR_ENV: &str = "ROOFSENSE_WEIGHTS_DIR";

/// Source of pretrained tensors.
pub trait WeightProvider {
    /// Tensors keyed by parameter name, or `None` when unavailable.
    fn load(&self, arch: Arch) -> crate::Result<Option<HashMap<String, Tensor>>>;
    /// Short description recorded in checkpoints.
    fn describe(&self) -> String;
}

/// Always unavailable; models fall back to seeded random initialisation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Offline;

impl WeightProvider for Offline {
    fn load(&self, _: Arch) -> crate::Result<Option<HashMap<String, Tensor>>> {
        Ok(None)
    }

    fn describe(&self) -> String {
        "offline".into()
    }
}

/// Reads `<dir>/<arch>.safetensors`.
#[derive(Debug, Clone)]
pub struct DirectoryWeights {
    pub dir: PathBuf,
}

impl DirectoryWeights {
    pub fn from_env() -> Option<Self> {
        std::env::var_os(WEIGHTS_DIR_ENV).map(|d| DirectoryWeights { dir: d.into() })
    }

    pub fn path(&self, arch: Arch) -> PathBuf {
        self.dir.join(format!("{}.safetensors", arch.as_str()))
    }
}

impl WeightProvider for DirectoryWeights {
    fn load(&self, arch: Arch) -> crate::Result<Option<HashMap<String, Tensor>>> {
        let p = self.path(arch);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(candle_core::safetensors::load(&p, &Device::Cpu).map_err(|e| crate::Error::format(&p, e))?))
    }

    fn describe(&self) -> String {
        format!("dir:{}", self.dir.display())
    }
}

pub(crate) fn sample_init(init: Init, shape: &Shape, seed: u64) -> CResult<Tensor> {
    let n = shape.elem_count();
    let mut rng = rng_from_seed(seed);
    let normal = |rng: &mut roofsense_core::rng::Rng, mean: f64, std: f64| -> Vec<f32> {
        (0..n).map(|_| (mean + std * Distribution::<f64>::sample(&StandardNormal, rng)) as f32).collect()
    };
    let uniform = |rng: &mut roofsense_core::rng::Rng, lo: f64, up: f64| -> Vec<f32> {
        (0..n).map(|_| rng.random_range(lo..=up) as f32).collect()
    };
    let data = match init {
        Init::Const(v) => vec![v as f32; n],
        Init::Randn { mean, stdev } => normal(&mut rng, mean, stdev),
        Init::Uniform { lo, up } => uniform(&mut rng, lo, up),
        Init::Kaiming { dist, fan, non_linearity } => {
            let fan = fan.for_shape(shape).max(1) as f64;
            let std = non_linearity.gain() / fan.sqrt();
            match dist {
                NormalOrUniform::Normal => normal(&mut rng, 0.0, std),
                NormalOrUniform::Uniform => {
                    let bound = 3f64.sqrt() * std;
                    uniform(&mut rng, -bound, bound)
                }
            }
        }
    };
    Tensor::from_vec(data, shape.clone(), &Device::Cpu)
}

/// Tensors in the var map, sorted by name.
pub fn sorted_tensors(vars: &VarMap) -> Vec<(String, Tensor)> {
    let data = vars.data().lock().expect("var map lock");
    let mut out: Vec<(String, Tensor)> = data.iter().map(|(k, v)| (k.clone(), v.as_tensor().clone())).collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

struct SeededBackend {
    vars: VarMap,
    seed: u64,
    pretrained: Option<HashMap<String, Tensor>>,
    /// Name of the first convolution weight when it must be adapted to one
    /// input channel.
    adapt: Option<String>,
}

impl SeededBackend {
    fn initial(&self, shape: &Shape, name: &str, init: Init) -> CResult<Tensor> {
        if let Some(t) = self.pretrained.as_ref().and_then(|p| p.get(name)) {
            let t = t.to_dtype(DType::F32)?;
            let t = if self.adapt.as_deref() == Some(name) && t.dims().get(1) == Some(&3) {
                let dims = t.dims4()?;
                let w = ConvWeights { shape: [dims.0, dims.1, dims.2, dims.3], data: t.flatten_all()?.to_vec1()? };
                let a = adapt_first_layer(&w).map_err(candle_core::Error::wrap)?;
                Tensor::from_vec(a.data, a.shape.to_vec(), &Device::Cpu)?
            } else {
                t
            };
            if t.shape() == shape {
                return Ok(t);
            }
        }
        sample_init(init, shape, item_seed(self.seed, name, 0))
    }
}

impl SimpleBackend for SeededBackend {
    fn get(&self, s: Shape, name: &str, h: Init, dtype: DType, dev: &Device) -> CResult<Tensor> {
        let mut data = self.vars.data().lock().expect("var map lock");
        if let Some(v) = data.get(name) {
            let t = v.as_tensor();
            if t.shape() != &s {
                candle_core::bail!("shape mismatch for {name}: {:?} vs {s:?}", t.shape());
            }
            return Ok(t.clone());
        }
        let t = self.initial(&s, name, h)?.to_dtype(dtype)?.to_device(dev)?;
        let v = Var::from_tensor(&t)?;
        let out = v.as_tensor().clone();
        data.insert(name.to_string(), v);
        Ok(out)
    }

    fn get_unchecked(&self, name: &str, _: DType, _: &Device) -> CResult<Tensor> {
        let data = self.vars.data().lock().expect("var map lock");
        match data.get(name) {
            Some(v) => Ok(v.as_tensor().clone()),
            None => candle_core::bail!("no variable named {name}"),
        }
    }

    fn contains_tensor(&self, name: &str) -> bool {
        self.vars.data().lock().expect("var map lock").contains_key(name)
    }
}

/// Var builder whose missing variables are created in `vars` from `seed`
/// or from `pretrained`.
pub(crate) fn seeded_builder(
    vars: &VarMap,
    seed: u64,
    pretrained: Option<HashMap<String, Tensor>>,
    adapt: Option<String>,
) -> VarBuilder<'static> {
    let backend = SeededBackend { vars: vars.clone(), seed, pretrained, adapt };
    VarBuilder::from_backend(Box::new(backend), DType::F32, Device::Cpu)
}

/// Overwrites every variable with the tensor of the same name in `path`.
pub fn load_into(vars: &VarMap, path: &Path) -> crate::Result<()> {
    let loaded = candle_core::safetensors::load(path, &Device::Cpu).map_err(|e| crate::Error::format(path, e))?;
    let data = vars.data().lock().expect("var map lock");
    for (name, var) in data.iter() {
        let t = loaded.get(name).ok_or_else(|| crate::Error::format(path, format!("missing tensor {name}")))?;
        if t.shape() != var.shape() {
            return Err(crate::Error::format(path, format!("shape mismatch for {name}")));
        }
        var.set(t)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_depends_on_name_not_order() {
        let a = VarMap::new();
        let vb = seeded_builder(&a, 3, None, None);
        let x = vb.get_with_hints((4, 3), "x", candle_nn::init::DEFAULT_KAIMING_NORMAL).unwrap();
        let _ = vb.get_with_hints(5, "y", Init::Const(1.0)).unwrap();
        let b = VarMap::new();
        let vb = seeded_builder(&b, 3, None, None);
        let _ = vb.get_with_hints(5, "y", Init::Const(1.0)).unwrap();
        let x2 = vb.get_with_hints((4, 3), "x", candle_nn::init::DEFAULT_KAIMING_NORMAL).unwrap();
        assert_eq!(x.to_vec2::<f32>().unwrap(), x2.to_vec2::<f32>().unwrap());
    }

    #[test]
    fn pretrained_first_conv_is_adapted() {
        let w = Tensor::arange(0f32, 24.0, &Device::Cpu).unwrap().reshape((2, 3, 2, 2)).unwrap();
        let pre = HashMap::from([("conv.weight".to_string(), w.clone())]);
        let vars = VarMap::new();
        let vb = seeded_builder(&vars, 0, Some(pre), Some("conv.weight".into()));
        let got = vb.get_with_hints((2, 1, 2, 2), "conv.weight", Init::Const(0.0)).unwrap();
        let want = (w.sum_keepdim(1).unwrap() / 3.0).unwrap();
        let diff = (got - want).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
        assert!(diff < 1e-6);
    }
}
