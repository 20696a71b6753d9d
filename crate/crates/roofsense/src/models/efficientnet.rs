//! EfficientNet-B0 feature extractor with torchvision parameter names.

use candle_core::{Result, Tensor};
use candle_nn::{BatchNorm, ModuleT, VarBuilder};

use super::layers::{batch_norm, global_avg_pool, Act, Conv, ConvBn, DepthwiseConv};

const EPS: f64 = 1e-5;

/// (expand ratio, kernel, stride, in, out, repeats) per stage.
const STAGES: [(usize, usize, usize, usize, usize, usize); 7] = [
    (1, 3, 1, 32, 16, 1),
    (6, 3, 2, 16, 24, 2),
    (6, 5, 2, 24, 40, 2),
    (6, 3, 2, 40, 80, 3),
    (6, 5, 1, 80, 112, 3),
    (6, 5, 2, 112, 192, 4),
    (6, 3, 1, 192, 320, 1),
];

#[derive(Debug, Clone)]
struct MbConv {
    expand: Option<ConvBn>,
    dw: DepthwiseConv,
    dw_bn: BatchNorm,
    se_reduce: Conv,
    se_expand: Conv,
    project: ConvBn,
    residual: bool,
}

impl MbConv {
    fn new(vb: &VarBuilder, expand: usize, k: usize, stride: usize, c_in: usize, c_out: usize) -> Result<Self> {
        let hidden = c_in * expand;
        let mut idx = 0;
        let mut next = || {
            idx += 1;
            vb.pp(format!("block.{}", idx - 1))
        };
        let expand = if expand != 1 {
            Some(ConvBn::new(&next(), "0", "1", c_in, hidden, (1, 1), 1, (0, 0), EPS, Act::Silu)?)
        } else {
            None
        };
        let dw_vb = next();
        let dw = DepthwiseConv::new(&dw_vb.pp("0"), hidden, k, stride)?;
        let dw_bn = batch_norm(&dw_vb.pp("1"), hidden, EPS)?;
        let se_vb = next();
        let squeeze = (c_in / 4).max(1);
        let se_reduce = Conv::square(&se_vb.pp("fc1"), hidden, squeeze, 1, 1, 0, true)?;
        let se_expand = Conv::square(&se_vb.pp("fc2"), squeeze, hidden, 1, 1, 0, true)?;
        let project = ConvBn::new(&next(), "0", "1", hidden, c_out, (1, 1), 1, (0, 0), EPS, Act::None)?;
        Ok(Self { expand, dw, dw_bn, se_reduce, se_expand, project, residual: stride == 1 && c_in == c_out })
    }

    fn forward(&self, x: &Tensor, t: bool) -> Result<Tensor> {
        let mut y = match &self.expand {
            Some(e) => e.forward(x, t)?,
            None => x.clone(),
        };
        y = self.dw_bn.forward_t(&self.dw.forward(&y)?, t)?.silu()?;
        let s = y.mean_keepdim(3)?.mean_keepdim(2)?;
        let s = candle_nn::ops::sigmoid(&self.se_expand.forward(&self.se_reduce.forward(&s)?.silu()?)?)?;
        y = y.broadcast_mul(&s)?;
        y = self.project.forward(&y, t)?;
        if self.residual {
            y = (y + x)?;
        }
        Ok(y)
    }
}

#[derive(Debug, Clone)]
pub struct EfficientNetB0 {
    stem: ConvBn,
    blocks: Vec<MbConv>,
    head: ConvBn,
}

impl EfficientNetB0 {
    pub const EMBEDDING: usize = 1280;
    pub const FIRST_CONV: &'static str = "features.0.0.weight";

    pub fn new(vb: &VarBuilder, in_channels: usize) -> Result<Self> {
        let f = vb.pp("features");
        let stem = ConvBn::new(&f.pp("0"), "0", "1", in_channels, 32, (3, 3), 2, (1, 1), EPS, Act::Silu)?;
        let mut blocks = Vec::new();
        for (s, &(e, k, stride, c_in, c_out, n)) in STAGES.iter().enumerate() {
            for i in 0..n {
                let (cin, st) = if i == 0 { (c_in, stride) } else { (c_out, 1) };
                blocks.push(MbConv::new(&f.pp(format!("{}.{i}", s + 1)), e, k, st, cin, c_out)?);
            }
        }
        let head = ConvBn::new(&f.pp("8"), "0", "1", 320, Self::EMBEDDING, (1, 1), 1, (0, 0), EPS, Act::Silu)?;
        Ok(Self { stem, blocks, head })
    }

    pub fn first_conv(&self) -> &Tensor {
        self.stem.conv.weight()
    }

    pub fn features(&self, x: &Tensor, t: bool) -> Result<Tensor> {
        let mut y = self.stem.forward(x, t)?;
        for b in &self.blocks {
            y = b.forward(&y, t)?;
        }
        global_avg_pool(&self.head.forward(&y, t)?)
    }
}
