//! Building blocks shared by the backbones.

use candle_core::{Result, Tensor, D};
use candle_nn::{init, BatchNorm, BatchNormConfig, ModuleT, VarBuilder};
use rand::Rng as _;
use roofsense_core::rng::rng_from_seed;

/// Convolution with independent vertical and horizontal zero padding.
#[derive(Debug, Clone)]
pub struct Conv {
    weight: Tensor,
    bias: Option<Tensor>,
    stride: usize,
    pad: (usize, usize),
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        vb: &VarBuilder,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: usize,
        pad: (usize, usize),
        bias: bool,
    ) -> Result<Self> {
        let weight = vb.get_with_hints((c_out, c_in, kernel.0, kernel.1), "weight", init::DEFAULT_KAIMING_NORMAL)?;
        let bias = if bias {
            let bound = 1.0 / ((c_in * kernel.0 * kernel.1) as f64).sqrt();
            Some(vb.get_with_hints(c_out, "bias", init::Init::Uniform { lo: -bound, up: bound })?)
        } else {
            None
        };
        Ok(Self { weight, bias, stride, pad })
    }

    pub fn square(vb: &VarBuilder, c_in: usize, c_out: usize, k: usize, stride: usize, pad: usize, bias: bool) -> Result<Self> {
        Self::new(vb, c_in, c_out, (k, k), stride, (pad, pad), bias)
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (ph, pw) = self.pad;
        let y = if ph == pw {
            x.conv2d(&self.weight, ph, self.stride, 1, 1)?
        } else {
            x.pad_with_zeros(2, ph, ph)?.pad_with_zeros(3, pw, pw)?.conv2d(&self.weight, 0, self.stride, 1, 1)?
        };
        match &self.bias {
            Some(b) => y.broadcast_add(&b.reshape((1, (), 1, 1))?),
            None => Ok(y),
        }
    }
}

/// Depthwise convolution written as a sum of shifted, per-channel scaled
/// views; weights are `[c, 1, k, k]`.
#[derive(Debug, Clone)]
pub struct DepthwiseConv {
    weight: Tensor,
    k: usize,
    stride: usize,
}

impl DepthwiseConv {
    pub fn new(vb: &VarBuilder, c: usize, k: usize, stride: usize) -> Result<Self> {
        let weight = vb.get_with_hints((c, 1, k, k), "weight", init::DEFAULT_KAIMING_NORMAL)?;
        Ok(Self { weight, k, stride })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let pad = (self.k - 1) / 2;
        let xp = x.pad_with_zeros(2, pad, pad)?.pad_with_zeros(3, pad, pad)?;
        let (_, c, h, w) = xp.dims4()?;
        let (oh, ow) = (h + 1 - self.k, w + 1 - self.k);
        let mut acc: Option<Tensor> = None;
        for i in 0..self.k {
            for j in 0..self.k {
                let tap = self.weight.narrow(2, i, 1)?.narrow(3, j, 1)?.reshape((1, c, 1, 1))?;
                let term = xp.narrow(2, i, oh)?.narrow(3, j, ow)?.broadcast_mul(&tap)?;
                acc = Some(match acc {
                    Some(a) => (a + term)?,
                    None => term,
                });
            }
        }
        let y = acc.expect("kernel has taps");
        if self.stride == 1 {
            return Ok(y);
        }
        let rows: Vec<u32> = (0..oh as u32).step_by(self.stride).collect();
        let cols: Vec<u32> = (0..ow as u32).step_by(self.stride).collect();
        let rows = Tensor::new(rows.as_slice(), y.device())?;
        let cols = Tensor::new(cols.as_slice(), y.device())?;
        y.index_select(&rows, 2)?.index_select(&cols, 3)
    }
}

pub fn batch_norm(vb: &VarBuilder, c: usize, eps: f64) -> Result<BatchNorm> {
    candle_nn::batch_norm(c, BatchNormConfig { eps, remove_mean: true, affine: true, momentum: 0.1 }, vb.clone())
}

/// Convolution without bias, batch norm, then an optional activation.
#[derive(Debug, Clone)]
pub struct ConvBn {
    pub conv: Conv,
    bn: BatchNorm,
    act: Act,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Act {
    None,
    Relu,
    Silu,
}

impl Act {
    pub fn apply(self, x: &Tensor) -> Result<Tensor> {
        match self {
            Act::None => Ok(x.clone()),
            Act::Relu => x.relu(),
            Act::Silu => x.silu(),
        }
    }
}

impl ConvBn {
    /// `conv` and `bn` are the variable prefixes of the two layers.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        vb: &VarBuilder,
        conv: &str,
        bn: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: usize,
        pad: (usize, usize),
        eps: f64,
        act: Act,
    ) -> Result<Self> {
        Ok(Self {
            conv: Conv::new(&vb.pp(conv), c_in, c_out, kernel, stride, pad, false)?,
            bn: batch_norm(&vb.pp(bn), c_out, eps)?,
            act,
        })
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let y = self.bn.forward_t(&self.conv.forward(x)?, train)?;
        self.act.apply(&y)
    }
}

/// Max pooling; `pad` zero-pads first, which equals -inf padding on
/// non-negative (post-ReLU) inputs.
pub fn max_pool(x: &Tensor, k: usize, stride: usize, pad: usize) -> Result<Tensor> {
    let x = if pad > 0 { x.pad_with_zeros(2, pad, pad)?.pad_with_zeros(3, pad, pad)? } else { x.clone() };
    x.max_pool2d_with_stride(k, stride)
}

/// Average pooling counting padded zeros.
pub fn avg_pool(x: &Tensor, k: usize, stride: usize, pad: usize) -> Result<Tensor> {
    let x = if pad > 0 { x.pad_with_zeros(2, pad, pad)?.pad_with_zeros(3, pad, pad)? } else { x.clone() };
    x.avg_pool2d_with_stride(k, stride)
}

pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    x.mean(D::Minus1)?.mean(D::Minus1)
}

/// Inverted dropout with a mask drawn from `seed`.
pub fn dropout(x: &Tensor, p: f64, seed: u64) -> Result<Tensor> {
    if p <= 0.0 {
        return Ok(x.clone());
    }
    let mut rng = rng_from_seed(seed);
    let keep = 1.0 / (1.0 - p);
    let mask: Vec<f32> =
        (0..x.elem_count()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep as f32 }).collect();
    x.mul(&Tensor::from_vec(mask, x.shape(), x.device())?)
}
