use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::LktModel;

pub const CHECKPOINT_FORMAT: &str = "fedtransfer-lkt";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON container for a set of trained pair models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Hash of the configuration the models were trained under.
    pub config_hash: String,
    pub input_columns: Vec<String>,
    pub models: Vec<LktModel>,
}

impl Checkpoint {
    pub fn new(config_hash: impl Into<String>, input_columns: Vec<String>, models: Vec<LktModel>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.into(),
            input_columns,
            models,
        }
    }

    fn check(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown container format '{}'", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {}", self.version)));
        }
        for m in &self.models {
            m.validate().map_err(|e| Error::Checkpoint(format!("model '{}': {e}", m.id)))?;
            if m.input_columns != self.input_columns {
                return Err(Error::Checkpoint(format!("model '{}' was trained on a different schema", m.id)));
            }
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    ckpt.check()?;
    let text = serde_json::to_string(ckpt)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Load and validate a checkpoint. When `expected_columns` is given the
/// stored schema must match it exactly.
pub fn load_checkpoint(path: &Path, expected_columns: Option<&[String]>) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    ckpt.check()?;
    if let Some(cols) = expected_columns {
        if cols != ckpt.input_columns.as_slice() {
            return Err(Error::Checkpoint(format!(
                "checkpoint expects {} input columns {:?}, got {} {:?}",
                ckpt.input_columns.len(),
                ckpt.input_columns,
                cols.len(),
                cols
            )));
        }
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lkt::LktConfig;

    fn cols(n: usize) -> Vec<String> {
        (0..n).map(|j| format!("c{j}")).collect()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = LktModel::init("d1", cols(4), 4, 3, &LktConfig::default(), 9).unwrap();
        let ck = Checkpoint::new("abc", cols(4), vec![m]);
        save_checkpoint(&path, &ck).unwrap();
        assert_eq!(load_checkpoint(&path, Some(&cols(4))).unwrap(), ck);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let m = LktModel::init("d1", cols(4), 4, 3, &LktConfig::default(), 9).unwrap();
        save_checkpoint(&path, &Checkpoint::new("abc", cols(4), vec![m])).unwrap();
        assert!(matches!(load_checkpoint(&path, Some(&cols(5))), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn corrupted_model_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut m = LktModel::init("d1", cols(4), 4, 3, &LktConfig::default(), 9).unwrap();
        m.d = 2;
        let text = serde_json::to_string(&Checkpoint::new("abc", cols(4), vec![m])).unwrap();
        fs::write(&path, text).unwrap();
        assert!(load_checkpoint(&path, None).is_err());
    }
}
