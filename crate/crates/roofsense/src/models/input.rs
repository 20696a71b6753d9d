//! Patch preprocessing: square padding, resizing and value normalisation.

use candle_core::{Device, Tensor};
use roofsense_core::PixelGrid;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Rgb,
    Lidar,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Rgb => "rgb",
            Modality::Lidar => "lidar",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            Modality::Rgb => 3,
            Modality::Lidar => 1,
        }
    }

    pub fn patch(self, s: &roofsense_core::BuildingSample) -> &PixelGrid {
        match self {
            Modality::Rgb => &s.rgb,
            Modality::Lidar => &s.lidar,
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rgb" => Ok(Modality::Rgb),
            "lidar" | "ndsm" => Ok(Modality::Lidar),
            other => Err(Error::Invalid(format!("unknown modality {other:?}"))),
        }
    }
}

pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];
/// Heights are divided by this many meters and clipped to [0, 1].
pub const LIDAR_HEIGHT_SCALE: f32 = 30.0;

/// `((clip(v / scale)) - mean[c]) / std[c]` per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f32,
    pub clip: bool,
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Normalization {
    pub fn default_for(modality: Modality, pretrained: bool) -> Self {
        match modality {
            Modality::Rgb if pretrained => {
                Normalization { scale: 255.0, clip: false, mean: IMAGENET_MEAN.to_vec(), std: IMAGENET_STD.to_vec() }
            }
            Modality::Rgb => Normalization { scale: 255.0, clip: false, mean: vec![0.5; 3], std: vec![0.25; 3] },
            Modality::Lidar => {
                Normalization { scale: LIDAR_HEIGHT_SCALE, clip: true, mean: vec![0.0], std: vec![1.0] }
            }
        }
    }

    fn scaled(&self, v: f32) -> f32 {
        let s = v / self.scale;
        if self.clip {
            s.clamp(0.0, 1.0)
        } else {
            s
        }
    }

    /// Replaces mean and std with the per-channel statistics of `patches`.
    pub fn fit(&mut self, patches: &[&PixelGrid]) {
        let c = self.mean.len();
        let mut sum = vec![0.0f64; c];
        let mut sq = vec![0.0f64; c];
        let mut n = 0usize;
        for p in patches {
            for ch in 0..c.min(p.channels()) {
                for &v in p.channel(ch) {
                    let s = self.scaled(v) as f64;
                    sum[ch] += s;
                    sq[ch] += s * s;
                }
            }
            n += p.height() * p.width();
        }
        if n == 0 {
            return;
        }
        for ch in 0..c {
            let m = sum[ch] / n as f64;
            let var = (sq[ch] / n as f64 - m * m).max(0.0);
            self.mean[ch] = m as f32;
            self.std[ch] = if var > 1e-12 { var.sqrt() as f32 } else { 1.0 };
        }
    }

    pub fn apply_into(&self, p: &PixelGrid, out: &mut Vec<f32>) {
        for ch in 0..p.channels() {
            let (m, s) = (self.mean[ch], self.std[ch]);
            out.extend(p.channel(ch).iter().map(|&v| (self.scaled(v) - m) / s));
        }
    }
}

/// Zero-pads to a square and resizes to `side`.
pub fn prepare(p: &PixelGrid, side: usize) -> Result<PixelGrid> {
    let sq = p.pad_to_square();
    if sq.height() == side {
        Ok(sq)
    } else {
        Ok(sq.resize(side)?)
    }
}

/// Batch tensor `[n, channels, side, side]` from raw patches.
pub fn batch_tensor(patches: &[&PixelGrid], side: usize, channels: usize, norm: &Normalization) -> Result<Tensor> {
    let mut data = Vec::with_capacity(patches.len() * channels * side * side);
    for p in patches {
        if p.channels() != channels {
            return Err(Error::Invalid(format!("patch has {} channels, model expects {channels}", p.channels())));
        }
        let ready = if p.height() == side && p.width() == side { (*p).clone() } else { prepare(p, side)? };
        norm.apply_into(&ready, &mut data);
    }
    Ok(Tensor::from_vec(data, (patches.len(), channels, side, side), &Device::Cpu)?)
}

/// Batch tensor from patches already at `side`.
pub fn prepared_tensor(patches: &[PixelGrid], norm: &Normalization) -> Result<Tensor> {
    let Some(first) = patches.first() else {
        return Err(Error::Invalid("empty batch".into()));
    };
    let (c, h, w) = (first.channels(), first.height(), first.width());
    let mut data = Vec::with_capacity(patches.len() * c * h * w);
    for p in patches {
        norm.apply_into(p, &mut data);
    }
    Ok(Tensor::from_vec(data, (patches.len(), c, h, w), &Device::Cpu)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lidar_is_scaled_and_clipped() {
        let n = Normalization::default_for(Modality::Lidar, true);
        let p = PixelGrid::new(1, 1, 3, vec![-1.0, 15.0, 90.0]).unwrap();
        let mut out = Vec::new();
        n.apply_into(&p, &mut out);
        assert_eq!(out, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn fitted_stats_standardise() {
        let mut n = Normalization::default_for(Modality::Rgb, false);
        let p = PixelGrid::from_fn(3, 4, 4, |c, y, _| (c * 50 + y * 20) as f32);
        n.fit(&[&p]);
        let mut out = Vec::new();
        n.apply_into(&p, &mut out);
        for ch in out.chunks(16) {
            let m: f32 = ch.iter().sum::<f32>() / 16.0;
            assert!(m.abs() < 1e-5);
        }
    }

    #[test]
    fn batch_shapes_and_channel_check() {
        let n = Normalization::default_for(Modality::Lidar, false);
        let p = PixelGrid::filled(1, 5, 3, 3.0);
        let t = batch_tensor(&[&p, &p], 8, 1, &n).unwrap();
        assert_eq!(t.dims(), &[2, 1, 8, 8]);
        assert!(batch_tensor(&[&p], 8, 3, &n).is_err());
    }
}
