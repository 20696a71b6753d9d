//! CSV tables: label files, CV results and training histories.

use std::collections::BTreeMap;
use std::path::Path;

use roofsense_core::downstream::{CvTable, ModelSpec};
use roofsense_core::{Country, Task};

use crate::{Error, Result};

/// Labels keyed by building id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelRow {
    pub roof_type: Option<u8>,
    pub roof_material: Option<u8>,
    pub country: Option<Country>,
}

/// Reads a CSV with a `building_id` column and optional `roof_type`,
/// `roof_material` and `country` columns. Class names or indices accepted.
pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, LabelRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = col("building_id").ok_or_else(|| Error::format(path, "missing column building_id"))?;
    let (type_col, mat_col, country_col) = (col("roof_type"), col("roof_material"), col("country"));
    let mut out = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: Option<usize>| c.and_then(|c| rec.get(c)).map(str::trim).filter(|s| !s.is_empty());
        let parse = |task: Task, c: Option<usize>| -> Result<Option<u8>> {
            let Some(v) = field(c) else { return Ok(None) };
            let schema = task.schema();
            let idx = match v.parse::<usize>() {
                Ok(i) if i < schema.len() => Some(i),
                Ok(_) => None,
                Err(_) => schema.index_of(v),
            };
            idx.map(|i| Some(i as u8))
                .ok_or_else(|| Error::format(path, format!("row {}: unknown {} class {v:?}", line + 2, task.as_str())))
        };
        let id = rec.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::format(path, format!("row {}: empty building_id", line + 2)));
        }
        let row = LabelRow {
            roof_type: parse(Task::RoofType, type_col)?,
            roof_material: parse(Task::RoofMaterial, mat_col)?,
            country: field(country_col).map(Country::parse),
        };
        if out.insert(id.clone(), row).is_some() {
            return Err(Error::format(path, format!("duplicate building_id {id:?}")));
        }
    }
    Ok(out)
}

fn spec_fields(m: &ModelSpec) -> [String; 7] {
    let s = |v: &dyn std::fmt::Debug| format!("{v:?}").to_lowercase();
    match m {
        ModelSpec::Logistic { penalty, c, solver } => {
            ["LR".into(), s(penalty), c.to_string(), s(solver), String::new(), String::new(), String::new()]
        }
        ModelSpec::LinearSvm { penalty, c } => {
            ["SVM".into(), s(penalty), c.to_string(), String::new(), String::new(), String::new(), String::new()]
        }
        ModelSpec::Forest { n_trees, max_depth, criterion } => [
            "RF".into(),
            String::new(),
            String::new(),
            String::new(),
            n_trees.to_string(),
            max_depth.to_string(),
            s(criterion),
        ],
    }
}

/// CV table as CSV text, one row per evaluated candidate in search order.
pub fn cv_table_csv(table: &CvTable) -> Result<String> {
    let folds = table.rows.first().map_or(0, |r| r.fold_scores.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> =
        ["index", "family", "penalty", "c", "solver", "n_trees", "max_depth", "criterion", "scaler"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    header.extend((1..=folds).map(|f| format!("fold_{f}")));
    header.extend(["mean_f1", "std_f1", "rank"].map(String::from));
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(spec_fields(&r.candidate.model));
        rec.push(r.candidate.scaler.as_str().into());
        rec.extend(r.fold_scores.iter().map(|s| s.to_string()));
        rec.extend([r.mean_f1.to_string(), r.std_f1.to_string(), r.rank.to_string()]);
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_accept_names_and_indices() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        std::fs::write(&p, "building_id,roof_type,roof_material,country\na,Gable,,Dominica\nb,3,BlueTarpaulin,Saint Lucia\n").unwrap();
        let l = read_labels(&p).unwrap();
        assert_eq!(l["a"], LabelRow { roof_type: Some(0), roof_material: None, country: Some(Country::Dominica) });
        assert_eq!(l["b"].roof_material, Some(3));
        assert_eq!(l["b"].country, Some(Country::SaintLucia));
    }

    #[test]
    fn unknown_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        std::fs::write(&p, "building_id,roof_type\na,Dome\n").unwrap();
        assert!(read_labels(&p).unwrap_err().to_string().contains("Dome"));
    }
}
