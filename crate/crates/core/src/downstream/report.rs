use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which features the downstream classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Raw local features only; no collaboration.
    Local,
    /// Full pipeline.
    Unitrans,
    /// Mutual-information term switched off.
    AblationNoMi,
    /// Contrastive fine-tuning skipped.
    AblationNoCl,
}

impl Condition {
    pub const ALL: [Condition; 4] =
        [Condition::Local, Condition::Unitrans, Condition::AblationNoMi, Condition::AblationNoCl];

    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Local => "local",
            Condition::Unitrans => "unitrans",
            Condition::AblationNoMi => "ablation-no-mi",
            Condition::AblationNoCl => "ablation-no-cl",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown condition '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    TaskFeatures,
    DataFeatures,
    OverlapCount,
    NumDataHospitals,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::TaskFeatures => "task_features",
            SweepAxis::DataFeatures => "data_features",
            SweepAxis::OverlapCount => "overlap_count",
            SweepAxis::NumDataHospitals => "num_data_hospitals",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepAxis::TaskFeatures, SweepAxis::DataFeatures, SweepAxis::OverlapCount, SweepAxis::NumDataHospitals]
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sweep axis '{s}'")))
    }
}

/// Accuracy of one condition over all seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub condition: Condition,
    pub axis: Option<SweepAxis>,
    pub value: Option<usize>,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (zero for a single seed).
    pub std: f64,
    pub wall_clock_s: Option<f64>,
    pub config_hash: String,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RunReport {
    pub fn new(condition: Condition, seeds: Vec<u64>, accuracies: Vec<f64>, config_hash: impl Into<String>) -> Self {
        let (mean, std) = mean_std(&accuracies);
        RunReport {
            condition,
            axis: None,
            value: None,
            seeds,
            accuracies,
            mean,
            std,
            wall_clock_s: None,
            config_hash: config_hash.into(),
        }
    }

    /// Check the summary statistics against the per-seed list.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.len() != self.accuracies.len() {
            return Err(Error::Schema("report seed and accuracy counts differ".into()));
        }
        let (mean, std) = mean_std(&self.accuracies);
        if mean != self.mean || std != self.std {
            return Err(Error::Schema("report mean/std do not match the per-seed accuracies".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_names_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.as_str().parse::<Condition>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert!("bogus".parse::<Condition>().is_err());
    }

    #[test]
    fn summary_statistics() {
        let r = RunReport::new(Condition::Local, vec![1, 2, 3], vec![0.5, 0.7, 0.9], "h");
        assert!((r.mean - 0.7).abs() < 1e-15);
        assert!((r.std - 0.2).abs() < 1e-15);
        r.validate().unwrap();
        assert_eq!(RunReport::new(Condition::Local, vec![1], vec![0.4], "h").std, 0.0);
    }
}
