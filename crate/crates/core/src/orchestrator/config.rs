//! TOML experiment configuration.
//!
//! Every table is optional; an empty file runs the default synthetic
//! experiment. Unknown keys are rejected. Parse and validation errors carry
//! the line and column of the offending key.
//!
//! ```toml
//! name = "demo"
//! seed = 0
//! num_seeds = 2
//! conditions = ["local", "unitrans"]
//! mode = "intra"                 # or "cross" with a [column_split] table
//!
//! [dataset.synthetic]            # or [dataset.csv.task] + [[dataset.csv.data]]
//! n_overlap = 1000
//! n_local = 3000
//!
//! [overlap]
//! count = 500                    # or ids = ["s0001", ...]
//!
//! [frl]
//! method = "fedsvd"              # or "vfedpca"
//!
//! [lkt]
//! lambda = 0.1
//! epochs = 30
//!
//! [classifier]
//! kind = "logistic"
//!
//! [split]
//! train_fraction = 0.8
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::de::{DeTable, DeValue};

use crate::data::{ColumnSplit, SampleId};
use crate::downstream::{ClassifierConfig, Condition, PipelineConfig, SplitSpec};
use crate::error::{Error, Result};
use crate::frl::FrlConfig;
use crate::lkt::LktConfig;

use super::synthetic::SyntheticSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Overlapping and local rows share one column schema.
    Intra,
    /// Overlapping and local rows use different task-party columns.
    Cross,
}

/// One party's table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvParty {
    /// Party id; data parties default to `data1`, `data2`, ... and the task party to `task`.
    #[serde(default)]
    pub name: Option<String>,
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default = "default_id_column")]
    pub id_column: String,
    #[serde(default)]
    pub label_column: Option<String>,
    /// Feature columns to keep, in this order; all non-id, non-label columns when absent.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
}

fn default_id_column() -> String {
    "id".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvDataset {
    pub task: CsvParty,
    pub data: Vec<CsvParty>,
}

/// Where the parties' tables come from. At most one source may be given;
/// none means the default synthetic dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub synthetic: Option<SyntheticSpec>,
    pub csv: Option<CsvDataset>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverlapConfig {
    /// Use the first `count` shared ids (in id order) of every pair.
    pub count: Option<usize>,
    /// Use exactly these shared ids.
    pub ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    /// Root seed; run `i` uses `seed + i`.
    pub seed: u64,
    pub num_seeds: usize,
    pub conditions: Vec<Condition>,
    pub mode: Mode,
    pub column_split: Option<ColumnSplit>,
    pub dataset: DatasetConfig,
    pub overlap: OverlapConfig,
    /// z-score every party's features with its own statistics.
    pub standardize: bool,
    pub frl: FrlConfig,
    pub lkt: LktConfig,
    pub classifier: ClassifierConfig,
    pub split: SplitSpec,
    /// Run seeds concurrently. Does not affect results.
    pub parallel: bool,
    /// Directory relative CSV paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seed: 0,
            num_seeds: 5,
            conditions: vec![Condition::Local, Condition::Unitrans],
            mode: Mode::Intra,
            column_split: None,
            dataset: DatasetConfig::default(),
            overlap: OverlapConfig::default(),
            standardize: true,
            frl: FrlConfig::default(),
            lkt: LktConfig::default(),
            classifier: ClassifierConfig::default(),
            split: SplitSpec::default(),
            parallel: true,
            base_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Parse and validate TOML text. `origin` names the source in errors.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = parse_toml(text, origin)?;
        cfg.validate().map_err(|e| locate(e, text, origin, ""))?;
        Ok(cfg)
    }

    /// Read a config file. Relative CSV paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        cfg.base_dir = path.parent().map(Path::to_owned);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be non-empty and must not contain path separators");
        }
        if self.num_seeds == 0 {
            return bad("num_seeds must be positive");
        }
        if self.seed.checked_add(self.num_seeds as u64).is_none() {
            return bad("seed leaves no room for num_seeds consecutive seeds");
        }
        if self.conditions.is_empty() {
            return bad("conditions must name at least one condition");
        }
        let mut seen = self.conditions.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.conditions.len() {
            return bad("conditions must not repeat");
        }
        match (self.mode, &self.column_split) {
            (Mode::Cross, None) => return bad("mode: cross-domain mode needs a [column_split] table"),
            (Mode::Intra, Some(_)) => return bad("column_split is only allowed with mode = \"cross\""),
            (Mode::Cross, Some(s)) if s.ol_columns.is_empty() || s.nl_columns.is_empty() => {
                return bad("column_split.ol_columns and nl_columns must be non-empty")
            }
            _ => {}
        }
        match (&self.dataset.synthetic, &self.dataset.csv) {
            (Some(_), Some(_)) => return bad("dataset: give either [dataset.synthetic] or [dataset.csv], not both"),
            (Some(s), None) => s.validate()?,
            (None, Some(c)) => {
                if c.data.is_empty() {
                    return bad("dataset.csv.data must list at least one data party");
                }
                if c.task.label_column.is_none() {
                    return bad("dataset.csv.task.label_column is required");
                }
                if let Some(p) = c.data.iter().find(|p| p.label_column.is_some()) {
                    return bad(&format!("dataset.csv.data: data party '{}' must not carry labels", p.path.display()));
                }
            }
            (None, None) => {}
        }
        if self.overlap.count == Some(0) {
            return bad("overlap.count must be positive");
        }
        if self.overlap.ids.as_ref().is_some_and(Vec::is_empty) {
            return bad("overlap.ids: the overlapping sample set must not be empty");
        }
        if self.overlap.count.is_some() && self.overlap.ids.is_some() {
            return bad("overlap: give either count or ids, not both");
        }
        self.frl.validate()?;
        self.lkt.validate()?;
        self.classifier.validate()?;
        self.split.validate()
    }

    /// The synthetic spec in effect, if the dataset is synthetic.
    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        match (&self.dataset.synthetic, &self.dataset.csv) {
            (_, Some(_)) => None,
            (s, None) => Some(s.clone().unwrap_or_default()),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.num_seeds as u64).map(|i| self.seed + i).collect()
    }

    pub fn to_pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            frl: self.frl.clone(),
            lkt: self.lkt.clone(),
            classifier: self.classifier.clone(),
            split: self.split.clone(),
            standardize: self.standardize,
            column_split: self.column_split.clone(),
            overlap_ids: self.overlap.ids.as_ref().map(|ids| ids.iter().map(|s| SampleId(s.clone())).collect()),
            overlap_count: self.overlap.count,
            parallel: self.parallel,
        }
    }

    /// Resolve a CSV path against the config's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_owned(),
        }
    }

    /// SHA-256 over the canonical JSON form of every field that can change
    /// results. `parallel` and `base_dir` are excluded.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.parallel = true;
        if c.dataset.csv.is_none() {
            c.dataset.synthetic = c.synthetic_spec();
        }
        let value = serde_json::to_value(&c).expect("config serializes to JSON");
        let canonical = serde_json::to_string(&value).expect("JSON value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        Error::ConfigAt { path: origin.to_owned(), line, column, message: e.message().trim().to_owned() }
    })
}

/// Read and validate a standalone synthetic dataset spec (the body of a
/// `[dataset.synthetic]` table).
pub fn load_synthetic_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: SyntheticSpec = parse_toml(&text, path)?;
    spec.validate().map_err(|e| locate(e, &text, path, "dataset.synthetic."))?;
    Ok(spec)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Dotted key path at the start of a validation message, e.g. `lkt.tau`.
fn message_path(message: &str) -> Vec<String> {
    let head: String = message.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == '.').collect();
    head.trim_end_matches('.').split('.').filter(|s| !s.is_empty()).map(str::to_owned).collect()
}

/// Byte span of the deepest key along `path` that appears in the document.
fn key_span(root: &DeTable<'_>, path: &[String]) -> Option<std::ops::Range<usize>> {
    let mut table = root;
    let mut best = None;
    for seg in path {
        let (key, value) = table.iter().find(|(k, _)| k.get_ref().as_ref() == seg.as_str())?;
        best = Some(key.span());
        match value.get_ref() {
            DeValue::Table(t) => table = t,
            _ => break,
        }
    }
    best
}

/// Attach a source position to a validation error. `prefix` is stripped
/// from the message's key path before the lookup.
fn locate(err: Error, text: &str, origin: &Path, prefix: &str) -> Error {
    let Error::Config(message) = err else { return err };
    let key = message.strip_prefix(prefix).unwrap_or(&message);
    let (line, column) = DeTable::parse(text)
        .ok()
        .and_then(|doc| key_span(doc.get_ref(), &message_path(key)))
        .map_or((1, 1), |s| line_col(text, s.start));
    Error::ConfigAt { path: origin.to_owned(), line, column, message }
}
