//! Downstream classifiers trained on fusion vectors, and the
//! cross-validated hyperparameter search that selects them.

mod forest;
mod linear;
mod search;

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::rng::derive_seed;
use crate::scale::{ScalerKind, ScalerParams};
use crate::{Error, Matrix, Result};

pub use forest::{Forest, Node, Tree};
pub use linear::LinearModel;
pub use search::{
    fit_downstream, fit_downstream_logged, stratified_folds, AccessLog, AccessPhase, CvRow, CvTable, SearchMode,
    SearchOutcome, SearchProtocol, SearchSpace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Family {
    Lr,
    Rf,
    Svm,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Lr, Family::Rf, Family::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Lr => "LR",
            Family::Rf => "RF",
            Family::Svm => "SVM",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Ok(Family::Lr),
            "rf" | "forest" | "random_forest" => Ok(Family::Rf),
            "svm" | "linear_svm" => Ok(Family::Svm),
            other => Err(Error::InvalidParameter(format!("unknown downstream family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Solver {
    /// Multinomial, L2 only.
    Lbfgs,
    /// One-vs-rest coordinate descent, L1 or L2.
    Liblinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Criterion {
    Gini,
    Entropy,
}

/// Hyperparameters of one downstream model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum ModelSpec {
    Logistic { penalty: Penalty, c: f64, solver: Solver },
    LinearSvm { penalty: Penalty, c: f64 },
    Forest { n_trees: usize, max_depth: usize, criterion: Criterion },
}

impl ModelSpec {
    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Logistic { .. } => Family::Lr,
            ModelSpec::LinearSvm { .. } => Family::Svm,
            ModelSpec::Forest { .. } => Family::Rf,
        }
    }

    /// L1 with the multinomial L-BFGS solver has no implementation.
    pub fn is_compatible(&self) -> bool {
        !matches!(self, ModelSpec::Logistic { penalty: Penalty::L1, solver: Solver::Lbfgs, .. })
    }

    /// Smaller is simpler: regularisation strength for linear models, depth
    /// then tree count for forests.
    pub(crate) fn complexity(&self) -> (f64, f64) {
        match *self {
            ModelSpec::Logistic { c, .. } | ModelSpec::LinearSvm { c, .. } => (c, 0.0),
            ModelSpec::Forest { n_trees, max_depth, .. } => (max_depth as f64, n_trees as f64),
        }
    }
}

/// A model specification plus the scaler applied before it.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candidate {
    pub model: ModelSpec,
    pub scaler: ScalerKind,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FittedModel {
    Linear(LinearModel),
    Forest(Forest),
}

/// A fitted scaler and model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Classifier {
    pub candidate: Candidate,
    pub num_classes: usize,
    pub scaler: ScalerParams,
    pub model: FittedModel,
}

impl Classifier {
    /// Fits `candidate` on `x`/`y`. `seed` only affects forests.
    pub fn fit(candidate: &Candidate, x: &Matrix, y: &[usize], k: usize, seed: u64) -> Result<Classifier> {
        if x.rows() == 0 {
            return Err(Error::Empty("training rows"));
        }
        if x.rows() != y.len() {
            return Err(Error::ShapeMismatch(format!("{} rows vs {} labels", x.rows(), y.len())));
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= k) {
            return Err(Error::LabelOutOfRange { label: bad, classes: k });
        }
        if !candidate.model.is_compatible() {
            return Err(Error::InvalidParameter(format!("incompatible specification {:?}", candidate.model)));
        }
        let scaler = ScalerParams::fit(candidate.scaler, x)?;
        let xs = scaler.transform(x)?;
        let model = match candidate.model {
            ModelSpec::Logistic { c, solver: Solver::Lbfgs, .. } => FittedModel::Linear(linear::fit_multinomial_lbfgs(
                &xs,
                y,
                k,
                &linear::LbfgsSettings { c, max_iter: 200, memory: 10, tol: 1e-4 },
            )),
            ModelSpec::Logistic { penalty, c, solver: Solver::Liblinear } => FittedModel::Linear(linear::fit_ovr_cd(
                &xs,
                y,
                k,
                &linear::CdSettings { loss: linear::Loss::Logistic, penalty, c, max_epochs: 200, tol: 1e-4 },
            )),
            ModelSpec::LinearSvm { penalty, c } => FittedModel::Linear(linear::fit_ovr_cd(
                &xs,
                y,
                k,
                &linear::CdSettings { loss: linear::Loss::SquaredHinge, penalty, c, max_epochs: 200, tol: 1e-4 },
            )),
            ModelSpec::Forest { n_trees, max_depth, criterion } => FittedModel::Forest(forest::fit_forest(
                &xs,
                y,
                k,
                &forest::ForestSettings { n_trees, max_depth, criterion, seed: derive_seed(seed, "forest") },
            )),
        };
        Ok(Classifier { candidate: *candidate, num_classes: k, scaler, model })
    }

    pub fn width(&self) -> usize {
        self.scaler.width()
    }

    /// One class index per row of `x`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        if x.cols() != self.width() {
            return Err(Error::ShapeMismatch(format!(
                "classifier expects width {}, got {}",
                self.width(),
                x.cols()
            )));
        }
        let mut buf = alloc::vec![0.0; x.cols()];
        Ok(x.iter_rows()
            .map(|row| {
                self.scaler.transform_row(row, &mut buf);
                match &self.model {
                    FittedModel::Linear(m) => m.predict_row(&buf),
                    FittedModel::Forest(f) => f.predict_row(&buf),
                }
            })
            .collect())
    }

    /// Predictions for fusion records.
    pub fn predict_records(&self, records: &[crate::fusion::FusionRecord]) -> Result<Vec<usize>> {
        let x = Matrix::from_rows(self.width(), records.iter().map(|r| &r.vector))?;
        self.predict(&x)
    }
}

/// One class index per record.
pub fn predict_downstream(classifier: &Classifier, records: &[crate::fusion::FusionRecord]) -> Result<Vec<usize>> {
    classifier.predict_records(records)
}
