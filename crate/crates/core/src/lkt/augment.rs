use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, SampleId};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::LktModel;

/// Raw local features with every encoder's codes appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedFeatures {
    pub ids: Vec<SampleId>,
    pub columns: Vec<String>,
    /// Column blocks `[raw | Enc_1 | … | Enc_n]`.
    pub matrix: Matrix,
    /// Encoder ids in block order.
    pub provenance: Vec<String>,
}

impl AugmentedFeatures {
    pub fn as_feature_matrix(&self) -> Result<FeatureMatrix> {
        FeatureMatrix::new(self.ids.clone(), self.columns.clone(), self.matrix.clone())
    }
}

/// Concatenate `[H | Enc_1(H) | … | Enc_n(H)]`.
pub fn augment(models: &[LktModel], h_t_nl: &FeatureMatrix) -> Result<AugmentedFeatures> {
    let x = h_t_nl.values();
    let mut blocks = vec![x.clone()];
    let mut columns = h_t_nl.columns().to_vec();
    for m in models {
        if m.enc.input_width() != x.cols() {
            return Err(Error::Shape(format!(
                "encoder '{}' takes {} features, got {}",
                m.id,
                m.enc.input_width(),
                x.cols()
            )));
        }
        blocks.push(m.encode(x)?);
        columns.extend((0..m.d).map(|j| format!("{}:z{j}", m.id)));
    }
    let refs: Vec<&Matrix> = blocks.iter().collect();
    Ok(AugmentedFeatures {
        ids: h_t_nl.ids().to_vec(),
        columns,
        matrix: Matrix::hstack(&refs)?,
        provenance: models.iter().map(|m| m.id.clone()).collect(),
    })
}

/// Augment samples that arrived after training. Purely local: the
/// encoders are applied as-is, with no retraining and no protocol traffic.
pub fn apply_to_new_samples(models: &[LktModel], x_new: &FeatureMatrix) -> Result<AugmentedFeatures> {
    for m in models {
        if m.input_columns != x_new.columns() {
            return Err(Error::Schema(format!(
                "new samples have columns {:?}, encoder '{}' was trained on {:?}",
                x_new.columns(),
                m.id,
                m.input_columns
            )));
        }
    }
    augment(models, x_new)
}
