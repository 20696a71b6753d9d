//! Single-channel adaptation of a pretrained RGB first convolution.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Convolution kernel laid out `[out, in, kh, kw]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub shape: [usize; 4],
    pub data: Vec<f32>,
}

impl ConvWeights {
    pub fn new(shape: [usize; 4], data: Vec<f32>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!("{} values for kernel {shape:?}", data.len())));
        }
        Ok(Self { shape, data })
    }
}

/// Replaces the three input-channel slices of every filter by their mean,
/// giving a `[out, 1, kh, kw]` kernel for single-band input.
pub fn adapt_first_layer(weights: &ConvWeights) -> Result<ConvWeights> {
    let [out, cin, kh, kw] = weights.shape;
    if cin != 3 {
        return Err(Error::BandCount { expected: 3, found: cin });
    }
    let plane = kh * kw;
    let mut data = Vec::with_capacity(out * plane);
    for filter in weights.data.chunks_exact(3 * plane) {
        let (r, rest) = filter.split_at(plane);
        let (g, b) = rest.split_at(plane);
        data.extend(r.iter().zip(g).zip(b).map(|((r, g), b)| (r + g + b) / 3.0));
    }
    ConvWeights::new([out, 1, kh, kw], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn equal_slices_are_unchanged() {
        let w = [0.25f32, -1.0, 3.0, 0.5];
        let data: Vec<f32> = core::iter::repeat_n(w, 3).flatten().collect();
        let a = adapt_first_layer(&ConvWeights::new([1, 3, 2, 2], data).unwrap()).unwrap();
        assert_eq!(a.data, w);
    }

    #[test]
    fn elementwise_mean() {
        let data = vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let a = adapt_first_layer(&ConvWeights::new([1, 3, 1, 2], data).unwrap()).unwrap();
        assert_eq!(a.data, vec![(1.0 + 4.0 + 16.0) / 3.0, (2.0 + 8.0 + 32.0) / 3.0]);
    }

    #[test]
    fn shape_contract() {
        let w = ConvWeights::new([64, 3, 7, 7], vec![0.1; 64 * 3 * 49]).unwrap();
        assert_eq!(adapt_first_layer(&w).unwrap().shape, [64, 1, 7, 7]);
        let bad = ConvWeights::new([4, 1, 3, 3], vec![0.0; 36]).unwrap();
        assert!(matches!(adapt_first_layer(&bad), Err(Error::BandCount { expected: 3, found: 1 })));
    }
}
