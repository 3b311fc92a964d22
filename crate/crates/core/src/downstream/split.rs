use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// Keep only this share of each class's training rows (few-shot setting).
    pub few_shot_fraction: Option<f64>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, few_shot_fraction: None }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.train_fraction) {
            return Err(Error::Config("split.train_fraction must lie strictly between 0 and 1".into()));
        }
        if self.few_shot_fraction.is_some_and(|f| !ok(f)) {
            return Err(Error::Config("split.few_shot_fraction must lie strictly between 0 and 1".into()));
        }
        Ok(())
    }
}

/// Row indices of a train/test split, each sorted ascending. Training rows
/// whose labels the few-shot setting withholds land in `unlabeled`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// All non-test rows, labelled or not.
    pub fn pool(&self) -> Vec<usize> {
        let mut rows = [self.train.as_slice(), self.unlabeled.as_slice()].concat();
        rows.sort_unstable();
        rows
    }
}

/// Per-class split. Classes with at least two rows contribute to both
/// sides; a singleton class goes to training.
pub fn stratified_split(labels: &[usize], num_classes: usize, spec: &SplitSpec, seed: u64) -> Result<Split> {
    spec.validate()?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty label vector".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut train = Vec::new();
    let mut unlabeled = Vec::new();
    let mut test = Vec::new();
    for class in 0..num_classes {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.is_empty() {
            continue;
        }
        rows.shuffle(&mut rng);
        let n = rows.len();
        let n_train = if n == 1 { 1 } else { ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1) };
        let keep = match spec.few_shot_fraction {
            Some(f) => ((f * n_train as f64).round() as usize).max(1),
            None => n_train,
        };
        train.extend_from_slice(&rows[..keep]);
        unlabeled.extend_from_slice(&rows[keep..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    if test.is_empty() {
        return Err(Error::InvalidArgument("split leaves no test rows".into()));
    }
    train.sort_unstable();
    unlabeled.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, unlabeled, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportions_and_disjointness() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i % 4 == 0)).collect();
        let s = stratified_split(&labels, 2, &SplitSpec::default(), 1).unwrap();
        assert_eq!(s.train.len(), 80);
        assert_eq!(s.test.len(), 20);
        assert!(s.unlabeled.is_empty());
        assert_eq!(s.train.iter().filter(|&&i| labels[i] == 1).count(), 20);
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
    }

    #[test]
    fn few_shot_keeps_every_class() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i < 5)).collect();
        let spec = SplitSpec { few_shot_fraction: Some(0.1), ..Default::default() };
        let s = stratified_split(&labels, 2, &spec, 2).unwrap();
        assert_eq!(s.train.len(), 4 + 1);
        assert_eq!(s.unlabeled.len(), 32 + 3);
        assert_eq!(s.test.len(), 10);
        assert_eq!(s.pool().len(), 40);
    }

    #[test]
    fn seeded() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let spec = SplitSpec::default();
        assert_eq!(stratified_split(&labels, 3, &spec, 5).unwrap(), stratified_split(&labels, 3, &spec, 5).unwrap());
        assert_ne!(stratified_split(&labels, 3, &spec, 5).unwrap(), stratified_split(&labels, 3, &spec, 6).unwrap());
    }

    #[test]
    fn invalid_fractions() {
        let spec = SplitSpec { train_fraction: 1.0, few_shot_fraction: None };
        assert!(stratified_split(&[0, 1], 2, &spec, 0).is_err());
    }
}
