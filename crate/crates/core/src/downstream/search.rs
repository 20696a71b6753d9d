//! Grid and randomized cross-validated search over downstream candidates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};

use super::{Candidate, Classifier, Criterion, Family, ModelSpec, Penalty, Solver};
use crate::fusion::FusionRecord;
use crate::metrics::macro_f1;
use crate::rng::{component_rng, derive_seed, item_seed};
use crate::scale::ScalerKind;
use crate::{Error, Matrix, Result};

pub const PAPER_C: [f64; 4] = [0.001, 0.01, 0.1, 1.0];

/// Value lists whose product forms the search space of one family.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub family: Family,
    pub penalties: Vec<Penalty>,
    pub c: Vec<f64>,
    pub solvers: Vec<Solver>,
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub criteria: Vec<Criterion>,
    pub scalers: Vec<ScalerKind>,
}

impl SearchSpace {
    pub fn paper(family: Family) -> SearchSpace {
        SearchSpace {
            family,
            penalties: vec![Penalty::L1, Penalty::L2],
            c: PAPER_C.to_vec(),
            solvers: vec![Solver::Lbfgs, Solver::Liblinear],
            n_trees: (100..=1000).step_by(50).collect(),
            max_depth: (3..=10).collect(),
            criteria: vec![Criterion::Gini, Criterion::Entropy],
            scalers: ScalerKind::ALL.to_vec(),
        }
    }

    /// Every compatible candidate in enumeration order.
    pub fn candidates(&self) -> Vec<Candidate> {
        let mut models = Vec::new();
        match self.family {
            Family::Lr => {
                for &penalty in &self.penalties {
                    for &c in &self.c {
                        for &solver in &self.solvers {
                            models.push(ModelSpec::Logistic { penalty, c, solver });
                        }
                    }
                }
            }
            Family::Svm => {
                for &penalty in &self.penalties {
                    for &c in &self.c {
                        models.push(ModelSpec::LinearSvm { penalty, c });
                    }
                }
            }
            Family::Rf => {
                for &n_trees in &self.n_trees {
                    for &max_depth in &self.max_depth {
                        for &criterion in &self.criteria {
                            models.push(ModelSpec::Forest { n_trees, max_depth, criterion });
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        for model in models.into_iter().filter(ModelSpec::is_compatible) {
            for &scaler in &self.scalers {
                out.push(Candidate { model, scaler });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SearchMode {
    Grid,
    /// Draws `n_iter` distinct candidates without replacement.
    Randomized { n_iter: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchProtocol {
    pub folds: usize,
    pub mode: SearchMode,
    pub seed: u64,
}

impl SearchProtocol {
    pub const FOLDS: usize = 5;
    pub const N_RANDOM: usize = 30;

    /// Grid for linear families, 30 random draws for forests.
    pub fn for_family(family: Family, seed: u64) -> SearchProtocol {
        let mode = match family {
            Family::Lr | Family::Svm => SearchMode::Grid,
            Family::Rf => SearchMode::Randomized { n_iter: Self::N_RANDOM },
        };
        SearchProtocol { folds: Self::FOLDS, mode, seed }
    }
}

/// Fold index of every sample; each class is shuffled then dealt round-robin,
/// continuing the deal across classes so fold sizes stay balanced.
pub fn stratified_folds(y: &[usize], k: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &label) in y.iter().enumerate() {
        if label >= k {
            return Err(Error::LabelOutOfRange { label, classes: k });
        }
        by_class[label].push(i);
    }
    for (class, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < folds {
            return Err(Error::TooFewPerClass { class, count: members.len(), folds });
        }
    }
    let mut rng = component_rng(seed, "cv-folds");
    let mut assignment = vec![0; y.len()];
    let mut next = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Which rows a search step touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessPhase {
    CvFit { candidate: usize, fold: usize },
    CvValidate { candidate: usize, fold: usize },
    Refit,
}

/// Observer of every row subset the search reads.
pub trait AccessLog {
    fn record(&mut self, phase: AccessPhase, rows: &[usize]);
}

impl AccessLog for () {
    fn record(&mut self, _: AccessPhase, _: &[usize]) {}
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CvRow {
    /// Position in the enumerated search space.
    pub index: usize,
    pub candidate: Candidate,
    pub fold_scores: Vec<f64>,
    pub mean_f1: f64,
    pub std_f1: f64,
    /// 1 for the selected row.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CvTable {
    pub rows: Vec<CvRow>,
}

impl CvTable {
    pub fn best(&self) -> &CvRow {
        self.rows.iter().find(|r| r.rank == 1).expect("non-empty table")
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub classifier: Classifier,
    pub best: Candidate,
    pub table: CvTable,
}

fn evaluated_candidates(space: &SearchSpace, protocol: &SearchProtocol) -> Vec<(usize, Candidate)> {
    let all = space.candidates();
    match protocol.mode {
        SearchMode::Grid => all.into_iter().enumerate().collect(),
        SearchMode::Randomized { n_iter } => {
            let mut rng = component_rng(protocol.seed, "search-sample");
            let take = n_iter.min(all.len());
            let mut picks = index::sample(&mut rng, all.len(), take).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| (i, all[i])).collect()
        }
    }
}

/// Runs the search over `x`/`y`, picks the best mean macro F1 and refits it
/// on every row.
pub fn fit_downstream_logged(
    x: &Matrix,
    y: &[usize],
    k: usize,
    space: &SearchSpace,
    protocol: &SearchProtocol,
    log: &mut dyn AccessLog,
) -> Result<SearchOutcome> {
    if x.rows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} rows vs {} labels", x.rows(), y.len())));
    }
    if x.rows() == 0 {
        return Err(Error::Empty("downstream training rows"));
    }
    let candidates = evaluated_candidates(space, protocol);
    if candidates.is_empty() {
        return Err(Error::Empty("search space"));
    }
    let fold_of = stratified_folds(y, k, protocol.folds, protocol.seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..protocol.folds)
        .map(|f| {
            let (val, fit): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold_of[i] == f);
            (fit, val)
        })
        .collect();
    let model_seed = derive_seed(protocol.seed, "search-model");

    let mut rows = Vec::with_capacity(candidates.len());
    for (pos, &(index, candidate)) in candidates.iter().enumerate() {
        let mut fold_scores = Vec::with_capacity(protocol.folds);
        for (fold, (fit, val)) in splits.iter().enumerate() {
            log.record(AccessPhase::CvFit { candidate: pos, fold }, fit);
            let fit_y: Vec<usize> = fit.iter().map(|&i| y[i]).collect();
            let clf = Classifier::fit(&candidate, &x.select_rows(fit), &fit_y, k, item_seed(model_seed, "fold", fold as u64))?;
            log.record(AccessPhase::CvValidate { candidate: pos, fold }, val);
            let pred = clf.predict(&x.select_rows(val))?;
            let val_y: Vec<usize> = val.iter().map(|&i| y[i]).collect();
            fold_scores.push(macro_f1(&val_y, &pred, k)?);
        }
        let n = fold_scores.len() as f64;
        let mean_f1 = fold_scores.iter().sum::<f64>() / n;
        let std_f1 = libm::sqrt(fold_scores.iter().map(|s| (s - mean_f1) * (s - mean_f1)).sum::<f64>() / n);
        rows.push(CvRow { index, candidate, fold_scores, mean_f1, std_f1, rank: 0 });
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&rows[a], &rows[b]);
        rb.mean_f1
            .total_cmp(&ra.mean_f1)
            .then_with(|| {
                let (ca, cb) = (ra.candidate.model.complexity(), rb.candidate.model.complexity());
                ca.0.total_cmp(&cb.0).then(ca.1.total_cmp(&cb.1))
            })
            .then(ra.index.cmp(&rb.index))
    });
    for (rank, &i) in order.iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    let best = rows[order[0]].candidate;

    let all: Vec<usize> = (0..y.len()).collect();
    log.record(AccessPhase::Refit, &all);
    let classifier = Classifier::fit(&best, x, y, k, item_seed(model_seed, "refit", 0))?;
    Ok(SearchOutcome { classifier, best, table: CvTable { rows } })
}

/// Search over fusion records.
pub fn fit_downstream(
    records: &[FusionRecord],
    k: usize,
    space: &SearchSpace,
    protocol: &SearchProtocol,
) -> Result<SearchOutcome> {
    let (x, y) = records_matrix(records)?;
    fit_downstream_logged(&x, &y, k, space, protocol, &mut ())
}

pub(crate) fn records_matrix(records: &[FusionRecord]) -> Result<(Matrix, Vec<usize>)> {
    let width = records.first().map_or(0, |r| r.vector.len());
    let x = Matrix::from_rows(width, records.iter().map(|r| &r.vector))?;
    Ok((x, records.iter().map(|r| r.label).collect()))
}
