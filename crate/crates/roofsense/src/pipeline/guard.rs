//! Split-tagged data access. Records every row subset the downstream search
//! reads and fails when a test building shows up before evaluation.

use std::collections::BTreeSet;

use roofsense_core::downstream::{AccessLog, AccessPhase};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessEvent {
    /// `load_train`, `cv_fit`, `cv_validate`, `refit`, `load_test` or `evaluate`.
    pub phase: String,
    pub candidate: Option<usize>,
    pub fold: Option<usize>,
    pub rows: usize,
    /// Test buildings among the rows.
    pub test_rows: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LeakageGuard {
    test_ids: BTreeSet<String>,
    /// Building ids of the records handed to the search, in row order.
    fit_ids: Vec<String>,
    test_open: bool,
    pub events: Vec<AccessEvent>,
}

impl LeakageGuard {
    pub fn new(test_ids: impl IntoIterator<Item = String>) -> Self {
        LeakageGuard { test_ids: test_ids.into_iter().collect(), ..Self::default() }
    }

    fn push(&mut self, phase: &str, candidate: Option<usize>, fold: Option<usize>, ids: &[&str]) {
        let test_rows = ids.iter().filter(|id| self.test_ids.contains(**id)).count();
        self.events.push(AccessEvent { phase: phase.into(), candidate, fold, rows: ids.len(), test_rows });
    }

    /// Registers the training records; row indices reported by the search
    /// refer to this order.
    pub fn load_train(&mut self, ids: &[String]) {
        self.fit_ids = ids.to_vec();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        self.push("load_train", None, None, &refs);
    }

    /// Marks the end of fitting. Test data may be read from here on.
    pub fn open_test(&mut self, ids: &[String]) {
        self.test_open = true;
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        self.push("load_test", None, None, &refs);
    }

    pub fn evaluate(&mut self, rows: usize) {
        self.events.push(AccessEvent { phase: "evaluate".into(), candidate: None, fold: None, rows, test_rows: rows });
    }

    /// Events before the test split was opened that touched test rows.
    pub fn violations(&self) -> Vec<&AccessEvent> {
        let cut = self.events.iter().position(|e| e.phase == "load_test").unwrap_or(self.events.len());
        self.events[..cut].iter().filter(|e| e.test_rows > 0).collect()
    }

    pub fn check(&self) -> Result<()> {
        match self.violations().first() {
            None => Ok(()),
            Some(e) => Err(Error::Leakage(format!(
                "{} test rows read during {} (candidate {:?}, fold {:?})",
                e.test_rows, e.phase, e.candidate, e.fold
            ))),
        }
    }

    pub fn test_opened(&self) -> bool {
        self.test_open
    }
}

impl AccessLog for LeakageGuard {
    fn record(&mut self, phase: AccessPhase, rows: &[usize]) {
        let ids: Vec<String> = rows.iter().map(|&r| self.fit_ids[r].clone()).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        match phase {
            AccessPhase::CvFit { candidate, fold } => self.push("cv_fit", Some(candidate), Some(fold), &refs),
            AccessPhase::CvValidate { candidate, fold } => self.push("cv_validate", Some(candidate), Some(fold), &refs),
            AccessPhase::Refit => self.push("refit", None, None, &refs),
        }
    }
}
