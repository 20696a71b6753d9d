//! Small convolutional network for desk-scale runs and tests.

use candle_core::{Result, Tensor};
use candle_nn::VarBuilder;

use super::layers::{global_avg_pool, max_pool, Act, ConvBn};

const EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct TinyNet {
    convs: Vec<ConvBn>,
}

impl TinyNet {
    pub const FIRST_CONV: &'static str = "conv1.weight";

    pub fn new(vb: &VarBuilder, in_channels: usize, embedding: usize) -> Result<Self> {
        let widths = [in_channels, 16, 32, embedding];
        let convs = (0..3)
            .map(|i| {
                let (c, b) = (format!("conv{}", i + 1), format!("bn{}", i + 1));
                ConvBn::new(vb, &c, &b, widths[i], widths[i + 1], (3, 3), 1, (1, 1), EPS, Act::Relu)
            })
            .collect::<Result<_>>()?;
        Ok(Self { convs })
    }

    pub fn first_conv(&self) -> &Tensor {
        self.convs[0].conv.weight()
    }

    pub fn features(&self, x: &Tensor, t: bool) -> Result<Tensor> {
        let mut y = x.clone();
        for (i, c) in self.convs.iter().enumerate() {
            y = c.forward(&y, t)?;
            if i + 1 < self.convs.len() && y.dim(2)? >= 2 {
                y = max_pool(&y, 2, 2, 0)?;
            }
        }
        global_avg_pool(&y)
    }
}
