use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Opaque sample identifier, unique within one party's table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub String);

impl SampleId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SampleId {
    fn from(s: &str) -> Self {
        SampleId(s.to_owned())
    }
}

impl From<String> for SampleId {
    fn from(s: String) -> Self {
        SampleId(s)
    }
}

pub(crate) fn check_unique_ids(ids: &[SampleId]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.0.clone()));
        }
    }
    Ok(())
}

/// Sample-indexed feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: Vec<SampleId>,
    cols: Vec<String>,
    values: Matrix,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<SampleId>, cols: Vec<String>, values: Matrix) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::Shape(format!(
                "feature matrix needs at least one row and column, got {}x{}",
                rows.len(),
                cols.len()
            )));
        }
        if values.shape() != (rows.len(), cols.len()) {
            return Err(Error::Shape(format!(
                "values are {}x{} but index is {}x{}",
                values.rows(),
                values.cols(),
                rows.len(),
                cols.len()
            )));
        }
        if !values.is_finite() {
            return Err(Error::InvalidArgument("feature matrix contains NaN or infinite values".into()));
        }
        check_unique_ids(&rows)?;
        Ok(FeatureMatrix { rows, cols, values })
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.rows
    }

    pub fn columns(&self) -> &[String] {
        &self.cols
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.cols.iter().position(|c| c == name)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<FeatureMatrix> {
        FeatureMatrix::new(
            idx.iter().map(|&i| self.rows[i].clone()).collect(),
            self.cols.clone(),
            self.values.select_rows(idx),
        )
    }

    /// Keep the named columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::Schema(format!("unknown column '{n}'"))))
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(self.rows.clone(), names.to_vec(), self.values.select_cols(&idx))
    }

    /// Keep the first `k` columns.
    pub fn first_columns(&self, k: usize) -> Result<FeatureMatrix> {
        if k == 0 || k > self.n_cols() {
            return Err(Error::InvalidArgument(format!("cannot keep {k} of {} columns", self.n_cols())));
        }
        let names = self.cols[..k].to_vec();
        self.select_columns(&names)
    }

    pub fn with_values(&self, values: Matrix) -> Result<FeatureMatrix> {
        FeatureMatrix::new(self.rows.clone(), self.cols.clone(), values)
    }
}

/// Integer class labels aligned with a [`FeatureMatrix`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    rows: Vec<SampleId>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(rows: Vec<SampleId>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidArgument("num_classes must be positive".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Shape(format!("{} ids but {} labels", rows.len(), labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside [0, {num_classes})")));
        }
        Ok(LabelVector { rows, labels, num_classes })
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.rows
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> LabelVector {
        LabelVector {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    pub fn aligned_with(&self, m: &FeatureMatrix) -> bool {
        self.rows == m.ids()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Task,
    Data,
}

/// One hospital's local view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyState {
    pub party_id: String,
    pub role: Role,
    pub features: FeatureMatrix,
    pub labels: Option<LabelVector>,
}

impl PartyState {
    pub fn task(party_id: impl Into<String>, features: FeatureMatrix, labels: LabelVector) -> Result<Self> {
        if !labels.aligned_with(&features) {
            return Err(Error::Schema("task labels are not aligned with the feature rows".into()));
        }
        Ok(PartyState { party_id: party_id.into(), role: Role::Task, features, labels: Some(labels) })
    }

    pub fn data(party_id: impl Into<String>, features: FeatureMatrix) -> Self {
        PartyState { party_id: party_id.into(), role: Role::Data, features, labels: None }
    }
}

/// A task party together with its collaborating data parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub task: PartyState,
    pub data: Vec<PartyState>,
}

impl Dataset {
    pub fn new(task: PartyState, data: Vec<PartyState>) -> Result<Self> {
        if task.role != Role::Task || task.labels.is_none() {
            return Err(Error::Schema(format!("party '{}' is not a labelled task party", task.party_id)));
        }
        let mut seen = HashSet::new();
        seen.insert(task.party_id.clone());
        for d in &data {
            if d.role != Role::Data {
                return Err(Error::Schema(format!("party '{}' is not a data party", d.party_id)));
            }
            if !seen.insert(d.party_id.clone()) {
                return Err(Error::Schema(format!("party id '{}' is used twice", d.party_id)));
            }
        }
        Ok(Dataset { task, data })
    }

    /// Keep the task party's first `k` feature columns.
    pub fn with_task_features(&self, k: usize) -> Result<Self> {
        let mut out = self.clone();
        out.task.features = self.task.features.first_columns(k)?;
        Ok(out)
    }

    /// Keep the first `k` feature columns of every data party.
    pub fn with_data_features(&self, k: usize) -> Result<Self> {
        let mut out = self.clone();
        for d in &mut out.data {
            d.features = d.features.first_columns(k)?;
        }
        Ok(out)
    }

    /// Keep the first `k` data parties.
    pub fn with_data_parties(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.data.len() {
            return Err(Error::InvalidArgument(format!("{k} data parties requested, {} available", self.data.len())));
        }
        let mut out = self.clone();
        out.data.truncate(k);
        Ok(out)
    }
}

/// Shared sample ids between a task party and one data party, with row
/// positions into each party's feature table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapIndex {
    pub overlapping_ids: Vec<SampleId>,
    pub task_rows: Vec<usize>,
    pub data_rows: Vec<usize>,
}

impl OverlapIndex {
    pub fn len(&self) -> usize {
        self.overlapping_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overlapping_ids.is_empty()
    }
}
