//! Result summaries and the plain-text results table.

use std::fmt::Write as _;
use std::path::Path;

use roofsense_core::downstream::{Candidate, Family};
use roofsense_core::fusion::VectorLayout;
use roofsense_core::metrics::MetricsReport;
use roofsense_core::Task;
use serde::{Deserialize, Serialize};

use super::config::Strategy;
use super::experiment::Evaluation;
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics.json";

/// One row of the results table, persisted as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub task: Task,
    pub strategy: Strategy,
    pub family: Option<Family>,
    pub group: String,
    pub row: String,
    pub layout: VectorLayout,
    pub best: Option<Candidate>,
    pub metrics: MetricsReport,
}

impl EvalSummary {
    pub fn from_evaluation(e: &Evaluation) -> EvalSummary {
        let family = e.family.map(|f| f.as_str().to_ascii_uppercase());
        let arch = e.layout.blocks.first().and_then(|(name, _)| name.split(':').nth(1)).unwrap_or("?").to_string();
        let (group, row) = match e.strategy {
            Strategy::RgbOnly => ("RGB".to_string(), arch),
            Strategy::LidarOnly => ("LiDAR".to_string(), arch),
            Strategy::FeatureConcat => ("Feature-level fusion".to_string(), family.unwrap_or_default()),
            Strategy::SoftmaxMean => ("Decision-level integration".to_string(), "Mean".to_string()),
            Strategy::SoftmaxConcat => ("Decision-level integration".to_string(), family.unwrap_or_default()),
        };
        EvalSummary {
            task: e.task,
            strategy: e.strategy,
            family: e.family,
            group,
            row,
            layout: e.layout.clone(),
            best: e.search.as_ref().map(|s| s.best),
            metrics: e.metrics.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<EvalSummary> {
        let path = if path.is_dir() { path.join(METRICS_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// Percentages with two decimals, grouped by task then block; the best F1
/// in each block is wrapped in `**`.
pub fn render_table(rows: &[EvalSummary]) -> String {
    let rank = |r: &EvalSummary| {
        let g = ["RGB", "LiDAR", "Feature-level fusion", "Decision-level integration"].iter().position(|g| *g == r.group);
        let row = ["Mean", "LR", "RF", "SVM"].iter().position(|x| *x == r.row);
        (g.unwrap_or(usize::MAX), row.unwrap_or(usize::MAX), r.row.clone())
    };
    let mut rows = rows.to_vec();
    rows.sort_by_key(rank);
    let mut out = String::new();
    let mut tasks: Vec<Task> = Vec::new();
    for r in &rows {
        if !tasks.contains(&r.task) {
            tasks.push(r.task);
        }
    }
    for task in tasks {
        let _ = writeln!(out, "{}", task.as_str());
        let _ = writeln!(out, "{:<28} {:<18} {:>10} {:>10} {:>10} {:>10}", "", "", "F1 score", "Precision", "Recall", "Accuracy");
        let mut groups: Vec<&str> = Vec::new();
        for r in rows.iter().filter(|r| r.task == task) {
            if !groups.contains(&r.group.as_str()) {
                groups.push(&r.group);
            }
        }
        for g in groups {
            let block: Vec<&EvalSummary> = rows.iter().filter(|r| r.task == task && r.group == g).collect();
            let best = block.iter().map(|r| r.metrics.macro_f1).fold(f64::NEG_INFINITY, f64::max);
            for (i, r) in block.iter().enumerate() {
                let m = &r.metrics;
                let f1 = if m.macro_f1 == best { format!("**{}**", pct(m.macro_f1)) } else { pct(m.macro_f1) };
                let label = if i == 0 { g } else { "" };
                let _ = writeln!(
                    out,
                    "{:<28} {:<18} {:>10} {:>10} {:>10} {:>10}",
                    label,
                    r.row,
                    f1,
                    pct(m.macro_precision),
                    pct(m.macro_recall),
                    pct(m.accuracy)
                );
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use roofsense_core::fusion::FusionSource;
    use roofsense_core::metrics::{confusion_matrix, macro_metrics};

    fn summary(row: &str, pred: &[usize]) -> EvalSummary {
        EvalSummary {
            task: Task::RoofType,
            strategy: Strategy::FeatureConcat,
            family: Some(Family::Lr),
            group: "Feature-level fusion".into(),
            row: row.into(),
            layout: VectorLayout { source: FusionSource::FeatureConcat, blocks: vec![] },
            best: None,
            metrics: macro_metrics(&confusion_matrix(&[0, 1, 2, 3], pred, 4).unwrap()),
        }
    }

    #[test]
    fn best_f1_is_bold_and_values_are_percent() {
        let t = render_table(&[summary("LR", &[0, 1, 2, 3]), summary("RF", &[0, 1, 2, 2])]);
        assert!(t.contains("**100.00**"));
        assert!(t.contains(" 75.00"));
        assert_eq!(t.matches("**").count(), 2);
    }
}
