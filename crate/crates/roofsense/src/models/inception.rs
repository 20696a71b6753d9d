//! Inception-v3 feature extractor with torchvision parameter names. The
//! auxiliary classifier is not built.

use candle_core::{Result, Tensor};
use candle_nn::VarBuilder;

use super::layers::{avg_pool, global_avg_pool, max_pool, Act, ConvBn};

const EPS: f64 = 1e-3;

fn basic(vb: &VarBuilder, name: &str, c_in: usize, c_out: usize, k: (usize, usize), stride: usize, pad: (usize, usize)) -> Result<ConvBn> {
    ConvBn::new(&vb.pp(name), "conv", "bn", c_in, c_out, k, stride, pad, EPS, Act::Relu)
}

fn chain(x: &Tensor, layers: &[ConvBn], train: bool) -> Result<Tensor> {
    layers.iter().try_fold(x.clone(), |y, l| l.forward(&y, train))
}

#[derive(Debug, Clone)]
struct BlockA {
    b1: ConvBn,
    b5: [ConvBn; 2],
    b3: [ConvBn; 3],
    pool: ConvBn,
}

impl BlockA {
    fn new(vb: &VarBuilder, c_in: usize, pool: usize) -> Result<Self> {
        Ok(Self {
            b1: basic(vb, "branch1x1", c_in, 64, (1, 1), 1, (0, 0))?,
            b5: [basic(vb, "branch5x5_1", c_in, 48, (1, 1), 1, (0, 0))?, basic(vb, "branch5x5_2", 48, 64, (5, 5), 1, (2, 2))?],
            b3: [
                basic(vb, "branch3x3dbl_1", c_in, 64, (1, 1), 1, (0, 0))?,
                basic(vb, "branch3x3dbl_2", 64, 96, (3, 3), 1, (1, 1))?,
                basic(vb, "branch3x3dbl_3", 96, 96, (3, 3), 1, (1, 1))?,
            ],
            pool: basic(vb, "branch_pool", c_in, pool, (1, 1), 1, (0, 0))?,
        })
    }

    fn forward(&self, x: &Tensor, t: bool) -> Result<Tensor> {
        let p = self.pool.forward(&avg_pool(x, 3, 1, 1)?, t)?;
        Tensor::cat(&[self.b1.forward(x, t)?, chain(x, &self.b5, t)?, chain(x, &self.b3, t)?, p], 1)
    }
}

#[derive(Debug, Clone)]
struct BlockB {
    b3: ConvBn,
    dbl: [ConvBn; 3],
}

impl BlockB {
    fn new(vb: &VarBuilder, c_in: usize) -> Result<Self> {
        Ok(Self {
            b3: basic(vb, "branch3x3", c_in, 384, (3, 3), 2, (0, 0))?,
            dbl: [
                basic(vb, "branch3x3dbl_1", c_in, 64, (1, 1), 1, (0, 0))?,
                basic(vb, "branch3x3dbl_2", 64, 96, (3, 3), 1, (1, 1))?,
                basic(vb, "branch3x3dbl_3", 96, 96, (3, 3), 2, (0, 0))?,
            ],
        })
    }

    fn forward(&self, x: &Tensor, t: bool) -> Result<Tensor> {
        Tensor::cat(&[self.b3.forward(x, t)?, chain(x, &self.dbl, t)?, max_pool(x, 3, 2, 0)?], 1)
    }
}

#[derive(Debug, Clone)]
struct BlockC {
    b1: ConvBn,
    b7: [ConvBn; 3],
    dbl: [ConvBn; 5],
    pool: ConvBn,
}

impl BlockC {
    fn new(vb: &VarBuilder, c_in: usize, c7: usize) -> Result<Self> {
        let (h, v) = (((1, 7), (0, 3)), ((7, 1), (3, 0)));
        Ok(Self {
            b1: basic(vb, "branch1x1", c_in, 192, (1, 1), 1, (0, 0))?,
            b7: [
                basic(vb, "branch7x7_1", c_in, c7, (1, 1), 1, (0, 0))?,
                basic(vb, "branch7x7_2", c7, c7, h.0, 1, h.1)?,
                basic(vb, "branch7x7_3", c7, 192, v.0, 1, v.1)?,
            ],
            dbl: [
                basic(vb, "branch7x7dbl_1", c_in, c7, (1, 1), 1, (0, 0))?,
                basic(vb, "branch7x7dbl_2", c7, c7, v.0, 1, v.1)?,
                basic(vb, "branch7x7dbl_3", c7, c7, h.0, 1, h.1)?,
                basic(vb, "branch7x7dbl_4", c7, c7, v.0, 1, v.1)?,
                basic(vb, "branch7x7dbl_5", c7, 192, h.0, 1, h.1)?,
            ],
            pool: basic(vb, "branch_pool", c_in, 192, (1, 1), 1, (0, 0))?,
        })
    }

    fn forward(&self, x: &Tensor, t: bool) -> Result<Tensor> {
        let p = self.pool.forward(&avg_pool(x, 3, 1, 1)?, t)?;
        Tensor::cat(&[self.b1.forward(x, t)?, chain(x, &self.b7, t)?, chain(x, &self.dbl, t)?, p], 1)
    }
}

#[derive(Debug, Clone)]
struct BlockD {
    b3: [ConvBn; 2],
    b7: [ConvBn; 4],
}

impl BlockD {
    fn new(vb: &VarBuilder, c_in: usize) -> Result<Self> {
        Ok(Self {
            b3: [basic(vb, "branch3x3_1", c_in, 192, (1, 1), 1, (0, 0))?, basic(vb, "branch3x3_2", 192, 320, (3, 3), 2, (0, 0))?],
            b7: [
                basic(vb, "branch7x7x3_1", c_in, 192, (1, 1), 1, (0, 0))?,
                basic(vb, "branch7x7x3_2", 192, 192, (1, 7), 1, (0, 3))?,
                basic(vb, "branch7x7x3_3", 192, 192, (7, 1), 1, (3, 0))?,
                basic(vb, "branch7x7x3_4", 192, 192, (3, 3), 2, (0, 0))?,
            ],
        })
    }

    fn forward(&self, x: &Tensor, t: bool) -> Result<Tensor> {
        Tensor::cat(&[chain(x, &self.b3, t)?, chain(x, &self.b7, t)?, max_pool(x, 3, 2, 0)?], 1)
    }
}

#[derive(Debug, Clone)]
struct BlockE {
    b1: ConvBn,
    b3_1: ConvBn,
    b3_2: [ConvBn; 2],
    dbl_1: [ConvBn; 2],
    dbl_3: [ConvBn; 2],
    pool: ConvBn,
}

impl BlockE {
    fn new(vb: &VarBuilder, c_in: usize) -> Result<Self> {
        let split = |a: &str, b: &str, c: usize| -> Result<[ConvBn; 2]> {
            Ok([basic(vb, a, c, 384, (1, 3), 1, (0, 1))?, basic(vb, b, c, 384, (3, 1), 1, (1, 0))?])
        };
        Ok(Self {
            b1: basic(vb, "branch1x1", c_in, 320, (1, 1), 1, (0, 0))?,
            b3_1: basic(vb, "branch3x3_1", c_in, 384, (1, 1), 1, (0, 0))?,
            b3_2: split("branch3x3_2a", "branch3x3_2b", 384)?,
            dbl_1: [
                basic(vb, "branch3x3dbl_1", c_in, 448, (1, 1), 1, (0, 0))?,
                basic(vb, "branch3x3dbl_2", 448, 384, (3, 3), 1, (1, 1))?,
            ],
            dbl_3: split("branch3x3dbl_3a", "branch3x3dbl_3b", 384)?,
            pool: basic(vb, "branch_pool", c_in, 192, (1, 1), 1, (0, 0))?,
        })
    }

    fn forward(&self, x: &Tensor, t: bool) -> Result<Tensor> {
        let a = self.b3_1.forward(x, t)?;
        let b = chain(x, &self.dbl_1, t)?;
        let p = self.pool.forward(&avg_pool(x, 3, 1, 1)?, t)?;
        Tensor::cat(
            &[
                self.b1.forward(x, t)?,
                self.b3_2[0].forward(&a, t)?,
                self.b3_2[1].forward(&a, t)?,
                self.dbl_3[0].forward(&b, t)?,
                self.dbl_3[1].forward(&b, t)?,
                p,
            ],
            1,
        )
    }
}

#[derive(Debug, Clone)]
pub struct InceptionV3 {
    stem: Vec<ConvBn>,
    a: Vec<BlockA>,
    b: BlockB,
    c: Vec<BlockC>,
    d: BlockD,
    e: Vec<BlockE>,
}

impl InceptionV3 {
    pub const EMBEDDING: usize = 2048;
    pub const FIRST_CONV: &'static str = "Conv2d_1a_3x3.conv.weight";

    pub fn new(vb: &VarBuilder, in_channels: usize) -> Result<Self> {
        let stem = vec![
            basic(vb, "Conv2d_1a_3x3", in_channels, 32, (3, 3), 2, (0, 0))?,
            basic(vb, "Conv2d_2a_3x3", 32, 32, (3, 3), 1, (0, 0))?,
            basic(vb, "Conv2d_2b_3x3", 32, 64, (3, 3), 1, (1, 1))?,
            basic(vb, "Conv2d_3b_1x1", 64, 80, (1, 1), 1, (0, 0))?,
            basic(vb, "Conv2d_4a_3x3", 80, 192, (3, 3), 1, (0, 0))?,
        ];
        Ok(Self {
            stem,
            a: vec![
                BlockA::new(&vb.pp("Mixed_5b"), 192, 32)?,
                BlockA::new(&vb.pp("Mixed_5c"), 256, 64)?,
                BlockA::new(&vb.pp("Mixed_5d"), 288, 64)?,
            ],
            b: BlockB::new(&vb.pp("Mixed_6a"), 288)?,
            c: vec![
                BlockC::new(&vb.pp("Mixed_6b"), 768, 128)?,
                BlockC::new(&vb.pp("Mixed_6c"), 768, 160)?,
                BlockC::new(&vb.pp("Mixed_6d"), 768, 160)?,
                BlockC::new(&vb.pp("Mixed_6e"), 768, 192)?,
            ],
            d: BlockD::new(&vb.pp("Mixed_7a"), 768)?,
            e: vec![BlockE::new(&vb.pp("Mixed_7b"), 1280)?, BlockE::new(&vb.pp("Mixed_7c"), 2048)?],
        })
    }

    pub fn first_conv(&self) -> &Tensor {
        self.stem[0].conv.weight()
    }

    pub fn features(&self, x: &Tensor, t: bool) -> Result<Tensor> {
        let mut y = chain(x, &self.stem[..3], t)?;
        y = max_pool(&y, 3, 2, 0)?;
        y = chain(&y, &self.stem[3..], t)?;
        y = max_pool(&y, 3, 2, 0)?;
        for a in &self.a {
            y = a.forward(&y, t)?;
        }
        y = self.b.forward(&y, t)?;
        for c in &self.c {
            y = c.forward(&y, t)?;
        }
        y = self.d.forward(&y, t)?;
        for e in &self.e {
            y = e.forward(&y, t)?;
        }
        global_avg_pool(&y)
    }
}
