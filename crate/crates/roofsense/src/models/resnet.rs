//! ResNet-50 feature extractor with torchvision parameter names.

use candle_core::{Result, Tensor};
use candle_nn::VarBuilder;

use super::layers::{global_avg_pool, max_pool, Act, ConvBn};

const EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
struct Bottleneck {
    c1: ConvBn,
    c2: ConvBn,
    c3: ConvBn,
    downsample: Option<ConvBn>,
}

impl Bottleneck {
    fn new(vb: &VarBuilder, c_in: usize, width: usize, stride: usize) -> Result<Self> {
        let c_out = width * 4;
        let downsample = if stride != 1 || c_in != c_out {
            Some(ConvBn::new(&vb.pp("downsample"), "0", "1", c_in, c_out, (1, 1), stride, (0, 0), EPS, Act::None)?)
        } else {
            None
        };
        Ok(Self {
            c1: ConvBn::new(vb, "conv1", "bn1", c_in, width, (1, 1), 1, (0, 0), EPS, Act::Relu)?,
            c2: ConvBn::new(vb, "conv2", "bn2", width, width, (3, 3), stride, (1, 1), EPS, Act::Relu)?,
            c3: ConvBn::new(vb, "conv3", "bn3", width, c_out, (1, 1), 1, (0, 0), EPS, Act::None)?,
            downsample,
        })
    }

    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let y = self.c3.forward(&self.c2.forward(&self.c1.forward(x, train)?, train)?, train)?;
        let skip = match &self.downsample {
            Some(d) => d.forward(x, train)?,
            None => x.clone(),
        };
        (y + skip)?.relu()
    }
}

#[derive(Debug, Clone)]
pub struct ResNet50 {
    stem: ConvBn,
    blocks: Vec<Bottleneck>,
}

impl ResNet50 {
    pub const EMBEDDING: usize = 2048;
    pub const FIRST_CONV: &'static str = "conv1.weight";

    pub fn new(vb: &VarBuilder, in_channels: usize) -> Result<Self> {
        let stem = ConvBn::new(vb, "conv1", "bn1", in_channels, 64, (7, 7), 2, (3, 3), EPS, Act::Relu)?;
        let mut blocks = Vec::new();
        let mut c_in = 64;
        for (layer, (width, depth)) in [(64, 3), (128, 4), (256, 6), (512, 3)].into_iter().enumerate() {
            for b in 0..depth {
                let stride = if b == 0 && layer > 0 { 2 } else { 1 };
                blocks.push(Bottleneck::new(&vb.pp(format!("layer{}.{b}", layer + 1)), c_in, width, stride)?);
                c_in = width * 4;
            }
        }
        Ok(Self { stem, blocks })
    }

    pub fn first_conv(&self) -> &Tensor {
        self.stem.conv.weight()
    }

    pub fn features(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut y = max_pool(&self.stem.forward(x, train)?, 3, 2, 1)?;
        for b in &self.blocks {
            y = b.forward(&y, train)?;
        }
        global_avg_pool(&y)
    }
}
