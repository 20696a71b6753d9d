//! Stratified train/test assignment.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::rng::component_rng;
use crate::{BuildingSample, Country, Error, Result, Split, Task};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitParams {
    pub train_frac: f64,
    pub seed: u64,
    /// When set, every test sample must come from this country.
    pub region: Option<Country>,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self { train_frac: 0.75, seed: 0, region: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassCounts {
    pub train: usize,
    pub test: usize,
}

/// Result of [`stratified_split`]: one [`Split`] per input sample plus
/// per-class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub params: SplitParams,
    pub splits: Vec<Split>,
    pub counts: Vec<ClassCounts>,
}

impl SplitAssignment {
    pub fn indices(&self, which: Split) -> Vec<usize> {
        self.splits.iter().enumerate().filter(|(_, &s)| s == which).map(|(i, _)| i).collect()
    }
}

/// Number of test samples for a class of `n` samples: `n` minus the train
/// share rounded half up.
pub fn test_quota(n: usize, train_frac: f64) -> usize {
    let train = libm::floor(n as f64 * train_frac + 0.5) as usize;
    n - train.min(n)
}

/// Splits labelled samples class by class so each class keeps `train_frac`
/// of its samples in the train partition (within one sample).
///
/// Unlabelled entries (`None`) stay [`Split::Unassigned`]. With a region
/// constraint, test samples are drawn only from that country; a class
/// without enough such samples makes the whole split fail.
pub fn stratified_split(
    labels: &[Option<usize>],
    countries: &[Country],
    task: Task,
    params: &SplitParams,
) -> Result<SplitAssignment> {
    if labels.len() != countries.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels vs {} countries",
            labels.len(),
            countries.len()
        )));
    }
    if !(0.0..=1.0).contains(&params.train_frac) {
        return Err(Error::InvalidParameter(format!("train fraction {} outside [0, 1]", params.train_frac)));
    }
    let k = task.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, label) in labels.iter().enumerate() {
        if let Some(l) = *label {
            task.schema().check(l)?;
            by_class[l].push(i);
        }
    }

    let mut rng = component_rng(params.seed, "split");
    let mut splits = vec![Split::Unassigned; labels.len()];
    let mut counts = Vec::with_capacity(k);
    let mut deficient: Vec<String> = Vec::new();

    for (class, members) in by_class.iter().enumerate() {
        let quota = test_quota(members.len(), params.train_frac);
        let (mut eligible, rest): (Vec<usize>, Vec<usize>) = match params.region {
            Some(region) => members.iter().partition(|&&i| countries[i] == region),
            None => (members.clone(), Vec::new()),
        };
        if eligible.len() < quota {
            deficient.push(format!(
                "{} (needs {quota} test samples, {} eligible)",
                task.classes()[class],
                eligible.len()
            ));
            continue;
        }
        eligible.shuffle(&mut rng);
        for (j, &i) in eligible.iter().enumerate() {
            splits[i] = if j < quota { Split::Test } else { Split::Train };
        }
        for &i in &rest {
            splits[i] = Split::Train;
        }
        counts.push(ClassCounts { train: members.len() - quota, test: quota });
    }
    if !deficient.is_empty() {
        return Err(Error::InfeasibleRegionQuota(deficient));
    }
    Ok(SplitAssignment { params: *params, splits, counts })
}

/// Runs [`stratified_split`] on samples and writes the result into their
/// `split` fields.
pub fn split_samples(samples: &mut [BuildingSample], task: Task, params: &SplitParams) -> Result<SplitAssignment> {
    let labels: Vec<_> = samples.iter().map(|s| s.label(task)).collect();
    let countries: Vec<_> = samples.iter().map(|s| s.country).collect();
    let assignment = stratified_split(&labels, &countries, task, params)?;
    for (s, &split) in samples.iter_mut().zip(&assignment.splits) {
        s.split = split;
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_from_totals(totals: &[usize]) -> Vec<Option<usize>> {
        totals.iter().enumerate().flat_map(|(c, &n)| core::iter::repeat_n(Some(c), n)).collect()
    }

    #[test]
    fn quota_rounding() {
        assert_eq!(test_quota(3118, 0.75), 779);
        assert_eq!(test_quota(1910, 0.75), 477);
        assert_eq!(test_quota(10, 1.0), 0);
        assert_eq!(test_quota(10, 0.0), 10);
    }

    #[test]
    fn full_train_fraction_leaves_test_empty() {
        let labels = labels_from_totals(&[5, 7, 3, 2]);
        let countries = vec![Country::Other; labels.len()];
        let a = stratified_split(&labels, &countries, Task::RoofType, &SplitParams { train_frac: 1.0, ..Default::default() }).unwrap();
        assert!(a.splits.iter().all(|&s| s == Split::Train));
    }

    #[test]
    fn region_constraint_and_infeasibility() {
        let labels = labels_from_totals(&[8, 8, 8, 8]);
        let mut countries = vec![Country::SaintLucia; labels.len()];
        for i in (0..labels.len()).step_by(2) {
            countries[i] = Country::Dominica;
        }
        let params = SplitParams { region: Some(Country::Dominica), ..Default::default() };
        let a = stratified_split(&labels, &countries, Task::RoofType, &params).unwrap();
        for i in a.indices(Split::Test) {
            assert_eq!(countries[i], Country::Dominica);
        }
        // class 3 has no Dominica samples at all
        for c in &mut countries[24..32] {
            *c = Country::SaintLucia;
        }
        let err = stratified_split(&labels, &countries, Task::RoofType, &params).unwrap_err();
        match err {
            Error::InfeasibleRegionQuota(classes) => {
                assert_eq!(classes.len(), 1);
                assert!(classes[0].starts_with("NoRoof"));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unlabelled_stay_unassigned() {
        let labels = vec![Some(0), None, Some(0), Some(1), Some(1), None];
        let countries = vec![Country::Other; 6];
        let a = stratified_split(&labels, &countries, Task::RoofType, &SplitParams::default()).unwrap();
        assert_eq!(a.splits[1], Split::Unassigned);
        assert_eq!(a.splits[5], Split::Unassigned);
        assert!(stratified_split(&[Some(9)], &[Country::Other], Task::RoofType, &SplitParams::default()).is_err());
    }
}
