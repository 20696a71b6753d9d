//! Confusion matrices and macro-averaged classification scores.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// `K x K` counts; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self { k, counts: vec![0; k * k] }
    }

    /// From row-major counts.
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::ShapeMismatch(format!("{} counts for K={k}", counts.len())));
        }
        Ok(Self { k, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class * self.k..(class + 1) * self.k].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        (0..self.k).map(|i| self.get(i, class)).sum()
    }

    /// One-vs-rest counts for `class`.
    pub fn one_vs_rest(&self, class: usize) -> BinaryCounts {
        let tp = self.get(class, class);
        let fp = self.col_sum(class) - tp;
        let fn_ = self.row_sum(class) - tp;
        let tn = self.total() - tp - fp - fn_;
        BinaryCounts { tp, fp, fn_, tn }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

/// Counts `(truth, prediction)` pairs into a `K x K` matrix.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(k);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label >= k {
                return Err(Error::LabelOutOfRange { label, classes: k });
            }
        }
        cm.counts[t * k + p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// One-vs-rest accuracy `(TP + TN) / total`.
    pub accuracy: f64,
    pub support: u64,
    /// Set when any of the ratios above had a zero denominator and was
    /// reported as 0.
    pub zero_division: bool,
}

/// Per-class and macro-averaged scores.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Multiclass accuracy, trace / total.
    pub accuracy: f64,
    pub total: u64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    /// Classes whose scores hit the zero-denominator convention.
    pub fn zero_division_classes(&self) -> Vec<usize> {
        self.per_class.iter().enumerate().filter(|(_, m)| m.zero_division).map(|(i, _)| i).collect()
    }
}

fn ratio(num: f64, den: f64, flag: &mut bool) -> f64 {
    if den == 0.0 {
        *flag = true;
        0.0
    } else {
        num / den
    }
}

/// Precision, recall, F1 and one-vs-rest accuracy per class, their
/// unweighted means, and trace/total accuracy. Zero denominators give 0.
pub fn macro_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let total = cm.total();
    let per_class: Vec<ClassMetrics> = (0..cm.num_classes())
        .map(|c| {
            let b = cm.one_vs_rest(c);
            let mut zero_division = false;
            let precision = ratio(b.tp as f64, (b.tp + b.fp) as f64, &mut zero_division);
            let recall = ratio(b.tp as f64, (b.tp + b.fn_) as f64, &mut zero_division);
            let f1 = ratio(2.0 * precision * recall, precision + recall, &mut zero_division);
            let accuracy = ratio((b.tp + b.tn) as f64, total as f64, &mut zero_division);
            ClassMetrics { precision, recall, f1, accuracy, support: b.tp + b.fn_, zero_division }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if per_class.is_empty() {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / per_class.len() as f64
        }
    };
    MetricsReport {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy: if total == 0 { 0.0 } else { cm.trace() as f64 / total as f64 },
        per_class,
        total,
        confusion: cm.clone(),
    }
}

/// Macro F1 of predictions against truth.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<f64> {
    Ok(macro_metrics(&confusion_matrix(y_true, y_pred, k)?).macro_f1)
}
