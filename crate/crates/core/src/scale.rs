//! Column scalers fitted on training rows only.

use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScalerKind {
    None,
    MinMax,
    Standard,
    Robust,
}

impl ScalerKind {
    pub const ALL: [ScalerKind; 4] = [ScalerKind::None, ScalerKind::MinMax, ScalerKind::Standard, ScalerKind::Robust];

    pub fn as_str(self) -> &'static str {
        match self {
            ScalerKind::None => "none",
            ScalerKind::MinMax => "minmax",
            ScalerKind::Standard => "standard",
            ScalerKind::Robust => "robust",
        }
    }
}

impl fmt::Display for ScalerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-column affine map `x -> (x - offset) / divisor`; a zero divisor marks
/// a constant training column, which maps to 0.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalerParams {
    pub kind: ScalerKind,
    pub offset: Vec<f64>,
    pub divisor: Vec<f64>,
}

impl ScalerParams {
    /// Fits on the rows of `train`.
    pub fn fit(kind: ScalerKind, train: &Matrix) -> Result<Self> {
        if train.rows() == 0 {
            return Err(Error::Empty("scaler training matrix"));
        }
        let n = train.rows();
        let cols = train.transposed_data();
        let mut offset = Vec::with_capacity(train.cols());
        let mut divisor = Vec::with_capacity(train.cols());
        for col in cols.chunks(n) {
            let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let constant = lo == hi;
            let (off, div) = match kind {
                ScalerKind::None => (0.0, 1.0),
                ScalerKind::MinMax => (lo, hi - lo),
                ScalerKind::Standard => {
                    let mean = col.iter().sum::<f64>() / n as f64;
                    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                    (mean, libm::sqrt(var))
                }
                ScalerKind::Robust => {
                    let mut sorted = col.to_vec();
                    sorted.sort_by(f64::total_cmp);
                    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
                    // a zero IQR on a varying column only centers it
                    let div = if iqr == 0.0 && !constant { 1.0 } else { iqr };
                    (quantile(&sorted, 0.5), div)
                }
            };
            let div = if constant && kind != ScalerKind::None { 0.0 } else { div };
            offset.push(off);
            divisor.push(div);
        }
        Ok(Self { kind, offset, divisor })
    }

    pub fn width(&self) -> usize {
        self.offset.len()
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        if self.kind == ScalerKind::None {
            out.copy_from_slice(row);
            return;
        }
        for ((o, &x), (&off, &div)) in out.iter_mut().zip(row).zip(self.offset.iter().zip(&self.divisor)) {
            *o = if div == 0.0 { 0.0 } else { (x - off) / div };
        }
    }

    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.width() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "scaler fitted on {} columns applied to {}",
                self.width(),
                m.cols()
            )));
        }
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            self.transform_row(m.row(i), out.row_mut(i));
        }
        Ok(out)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let t = pos - lo as f64;
    sorted[lo] + t * (sorted[hi] - sorted[lo])
}

/// Fits `method` on `train` and applies it to both matrices.
pub fn scale_features(train: &Matrix, apply_to: &Matrix, method: ScalerKind) -> Result<(Matrix, Matrix, ScalerParams)> {
    let params = ScalerParams::fit(method, train)?;
    Ok((params.transform(train)?, params.transform(apply_to)?, params))
}
