use serde::{Deserialize, Serialize};

use super::types::{FeatureMatrix, LabelVector, OverlapIndex, PartyState, Role};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Column projection applied in cross-domain mode: overlapping rows keep
/// `ol_columns`, non-overlapping rows keep `nl_columns`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSplit {
    pub ol_columns: Vec<String>,
    pub nl_columns: Vec<String>,
}

/// The task party's data cut along the overlap boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskPartitions {
    /// Rows in overlap order (row `i` is `overlapping_ids[i]`).
    pub h_ol: FeatureMatrix,
    /// Remaining rows in the task party's original order.
    pub h_nl: FeatureMatrix,
    pub y_nl: LabelVector,
    pub y_ol: LabelVector,
}

pub fn split_partitions(
    task: &PartyState,
    overlap: &OverlapIndex,
    columns: Option<&ColumnSplit>,
) -> Result<TaskPartitions> {
    if task.role != Role::Task {
        return Err(Error::InvalidArgument(format!("party '{}' is not the task party", task.party_id)));
    }
    let labels = task.labels.as_ref().ok_or_else(|| Error::InvalidArgument("task party carries no labels".into()))?;
    let n = task.features.n_rows();
    let mut in_overlap = vec![false; n];
    for (id, &row) in overlap.overlapping_ids.iter().zip(&overlap.task_rows) {
        if row >= n || &task.features.ids()[row] != id {
            return Err(Error::UnknownId(id.0.clone()));
        }
        in_overlap[row] = true;
    }
    if overlap.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let nl_rows: Vec<usize> = (0..n).filter(|&i| !in_overlap[i]).collect();
    if nl_rows.is_empty() {
        return Err(Error::InvalidArgument("task party has no non-overlapping samples".into()));
    }

    let mut h_ol = task.features.select_rows(&overlap.task_rows)?;
    let mut h_nl = task.features.select_rows(&nl_rows)?;
    if let Some(split) = columns {
        h_ol = h_ol.select_columns(&split.ol_columns)?;
        h_nl = h_nl.select_columns(&split.nl_columns)?;
    }
    Ok(TaskPartitions { h_ol, h_nl, y_nl: labels.select(&nl_rows), y_ol: labels.select(&overlap.task_rows) })
}

/// Per-column statistics from [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl Standardization {
    pub fn fit(m: &Matrix) -> Result<Self> {
        let n = m.rows();
        if n < 2 {
            return Err(Error::InvalidArgument("standardize needs at least two rows".into()));
        }
        let mean: Vec<f64> = m.col_sums().into_iter().map(|s| s / n as f64).collect();
        let mut ss = vec![0.0; m.cols()];
        for i in 0..n {
            for (j, v) in m.row(i).iter().enumerate() {
                let d = v - mean[j];
                ss[j] += d * d;
            }
        }
        let std: Vec<f64> = ss.iter().map(|s| (s / (n - 1) as f64).sqrt()).collect();
        let zero_variance = std.iter().zip(&mean).map(|(s, mu)| *s <= 1e-12 * mu.abs().max(1.0)).collect();
        Ok(Standardization { mean, std, zero_variance })
    }

    pub fn apply(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.mean.len() {
            return Err(Error::Shape(format!("{} columns vs {} fitted", m.cols(), self.mean.len())));
        }
        Ok(Matrix::from_fn(m.rows(), m.cols(), |i, j| {
            if self.zero_variance[j] {
                0.0
            } else {
                (m[(i, j)] - self.mean[j]) / self.std[j]
            }
        }))
    }
}

/// Column-wise z-scoring (sample standard deviation). Constant columns are
/// zeroed and flagged.
pub fn standardize(m: &FeatureMatrix) -> Result<(FeatureMatrix, Standardization)> {
    let stats = Standardization::fit(m.values())?;
    let values = stats.apply(m.values())?;
    Ok((m.with_values(values)?, stats))
}
