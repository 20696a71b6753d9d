//! Feature-level and decision-level fusion of the two modalities.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Matrix, Result};

/// Tolerance on softmax row sums.
pub const SOFTMAX_SUM_TOLERANCE: f64 = 1e-5;

/// Matrix rows keyed by building id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IdRows {
    pub ids: Vec<String>,
    pub values: Matrix,
}

impl IdRows {
    pub fn new(ids: Vec<String>, values: Matrix) -> Result<Self> {
        if ids.len() != values.rows() {
            return Err(Error::ShapeMismatch(format!("{} ids for {} rows", ids.len(), values.rows())));
        }
        Ok(Self { ids, values })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn width(&self) -> usize {
        self.values.cols()
    }
}

fn check_aligned(a: &IdRows, b: &IdRows) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {} rows", a.len(), b.len())));
    }
    if let Some(row) = (0..a.len()).find(|&i| a.ids[i] != b.ids[i]) {
        return Err(Error::IdMismatch { row, left: a.ids[row].clone(), right: b.ids[row].clone() });
    }
    Ok(())
}

fn hstack(a: &IdRows, b: &IdRows) -> Result<IdRows> {
    let cols = a.width() + b.width();
    let mut data = Vec::with_capacity(a.len() * cols);
    for (ra, rb) in a.values.iter_rows().zip(b.values.iter_rows()) {
        data.extend_from_slice(ra);
        data.extend_from_slice(rb);
    }
    IdRows::new(a.ids.clone(), Matrix::new(a.len(), cols, data)?)
}

/// Checks every row is finite, non-negative and sums to 1 within
/// [`SOFTMAX_SUM_TOLERANCE`].
pub fn check_softmax(m: &Matrix) -> Result<()> {
    for (row, r) in m.iter_rows().enumerate() {
        if let Some(v) = r.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution { row, reason: format!("entry {v}") });
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > SOFTMAX_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution { row, reason: format!("sums to {sum}") });
        }
    }
    Ok(())
}

/// Row `i` becomes `[rgb_i | lidar_i]`; the RGB block always comes first.
pub fn concat_features(rgb: &IdRows, lidar: &IdRows) -> Result<IdRows> {
    check_aligned(rgb, lidar)?;
    hstack(rgb, lidar)
}

fn check_softmax_pair(p1: &IdRows, p2: &IdRows) -> Result<()> {
    check_aligned(p1, p2)?;
    if p1.width() != p2.width() {
        return Err(Error::ShapeMismatch(format!("K={} vs K={}", p1.width(), p2.width())));
    }
    check_softmax(&p1.values)?;
    check_softmax(&p2.values)
}

/// Element-wise mean of two softmax matrices.
pub fn mean_softmax(p1: &IdRows, p2: &IdRows) -> Result<IdRows> {
    check_softmax_pair(p1, p2)?;
    let data = p1.values.data().iter().zip(p2.values.data()).map(|(a, b)| (a + b) / 2.0).collect();
    IdRows::new(p1.ids.clone(), Matrix::new(p1.len(), p1.width(), data)?)
}

/// Row `i` becomes `[p1_i | p2_i]`, width `2K`.
pub fn concat_softmax(p1: &IdRows, p2: &IdRows) -> Result<IdRows> {
    check_softmax_pair(p1, p2)?;
    hstack(p1, p2)
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// How a fusion vector was assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FusionSource {
    FeatureConcat,
    SoftmaxConcat,
    SoftmaxMean,
}

impl fmt::Display for FusionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionSource::FeatureConcat => "feature_concat",
            FusionSource::SoftmaxConcat => "softmax_concat",
            FusionSource::SoftmaxMean => "softmax_mean",
        })
    }
}

/// Width and order of the blocks inside a fusion vector.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VectorLayout {
    pub source: FusionSource,
    /// `(block name, width)` in vector order.
    pub blocks: Vec<(String, usize)>,
}

impl VectorLayout {
    pub fn width(&self) -> usize {
        self.blocks.iter().map(|(_, w)| w).sum()
    }
}

/// One building's fused vector and label, the unit the downstream
/// classifier trains on.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionRecord {
    pub building_id: String,
    pub vector: Vec<f64>,
    pub source: FusionSource,
    pub label: usize,
}

/// Pairs fused rows with labels.
pub fn to_records(rows: &IdRows, labels: &[usize], source: FusionSource) -> Result<Vec<FusionRecord>> {
    if labels.len() != rows.len() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} rows", labels.len(), rows.len())));
    }
    Ok(rows
        .ids
        .iter()
        .zip(rows.values.iter_rows())
        .zip(labels)
        .map(|((id, v), &label)| FusionRecord { building_id: id.clone(), vector: v.to_vec(), source, label })
        .collect())
}
