//! Per-seed execution of the full pipeline and of its baselines.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bus::{Interleaving, MessageBus};
use crate::data::{
    psi_intersect, standardize, ColumnSplit, Dataset, FeatureMatrix, LabelVector, SampleId, Standardization,
};
use crate::error::{Error, Result};
use crate::frl::{run_frl, FederatedRepresentation, FrlConfig, PartyInput};
use crate::lkt::{apply_to_new_samples, lkt_finetune_contrastive, lkt_train, LktConfig, LktModel};
use crate::numerics::{derive_seed, Matrix};

use super::classifier::{evaluate, train_classifier, ClassifierConfig};
use super::report::{Condition, RunReport, SweepAxis};
use super::split::{stratified_split, Split, SplitSpec};

// independent random streams derived from each run seed
const STREAM_SPLIT: u64 = 1;
const STREAM_CLASSIFIER: u64 = 2;
const STREAM_CONTRASTIVE: u64 = 3;
const STREAM_FRL: u64 = 100;
const STREAM_LKT: u64 = 200;

/// Everything the per-seed pipeline needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub frl: FrlConfig,
    pub lkt: LktConfig,
    pub classifier: ClassifierConfig,
    pub split: SplitSpec,
    /// z-score every party's features with its own statistics first.
    pub standardize: bool,
    /// Cross-domain mode: distinct column sets for overlapping and local rows.
    pub column_split: Option<ColumnSplit>,
    /// Restrict every pair's overlap to these ids.
    pub overlap_ids: Option<Vec<SampleId>>,
    /// Use only the first `n` shared ids (in id order) of every pair.
    pub overlap_count: Option<usize>,
    /// Run seeds on the rayon pool.
    pub parallel: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            frl: FrlConfig::default(),
            lkt: LktConfig::default(),
            classifier: ClassifierConfig::default(),
            split: SplitSpec::default(),
            standardize: true,
            column_split: None,
            overlap_ids: None,
            overlap_count: None,
            parallel: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.frl.validate()?;
        self.lkt.validate()?;
        self.classifier.validate()?;
        self.split.validate()?;
        if self.overlap_count == Some(0) {
            return Err(Error::Config("overlap_count must be positive".into()));
        }
        Ok(())
    }
}

/// One (task, data party) pair's overlap-aligned inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairData {
    pub party_id: String,
    pub overlap_ids: Vec<SampleId>,
    /// Task features of the overlapping rows, in `overlap_ids` order.
    pub h_t_ol: FeatureMatrix,
    /// Data-party features of the same rows. Never leaves the data party
    /// except masked or through eigenvector shares.
    pub h_d_ol: Matrix,
}

/// Aligned, standardized inputs shared by all seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub task_id: String,
    pub pairs: Vec<PairData>,
    pub h_nl: FeatureMatrix,
    pub y_nl: LabelVector,
    /// Statistics applied to the task party's features, if any.
    pub task_scaler: Option<Standardization>,
}

fn scaled(features: &FeatureMatrix, on: bool) -> Result<(FeatureMatrix, Option<Standardization>)> {
    if on {
        let (f, s) = standardize(features)?;
        Ok((f, Some(s)))
    } else {
        Ok((features.clone(), None))
    }
}

/// Build the aligned inputs for one data party against already-scaled task features.
pub fn prepare_pair(
    task_features: &FeatureMatrix,
    party_id: &str,
    data_features: &FeatureMatrix,
    cfg: &PipelineConfig,
) -> Result<(PairData, Vec<SampleId>)> {
    let mut ov = psi_intersect(task_features.ids(), data_features.ids())?;
    let full = ov.overlapping_ids.clone();
    if let Some(ids) = &cfg.overlap_ids {
        let shared: HashSet<&SampleId> = full.iter().collect();
        if let Some(missing) = ids.iter().find(|id| !shared.contains(id)) {
            return Err(Error::UnknownId(missing.0.clone()));
        }
        let wanted: HashSet<&SampleId> = ids.iter().collect();
        let keep: Vec<usize> = (0..ov.len()).filter(|&i| wanted.contains(&ov.overlapping_ids[i])).collect();
        ov.overlapping_ids = keep.iter().map(|&i| ov.overlapping_ids[i].clone()).collect();
        ov.task_rows = keep.iter().map(|&i| ov.task_rows[i]).collect();
        ov.data_rows = keep.iter().map(|&i| ov.data_rows[i]).collect();
    }
    if ov.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let keep = match cfg.overlap_count {
        Some(c) if c > ov.len() => {
            return Err(Error::InvalidArgument(format!(
                "overlap_count {c} exceeds the {} samples shared with '{party_id}'",
                ov.len()
            )))
        }
        Some(c) => c,
        None => ov.len(),
    };
    let (d_scaled, _) = scaled(data_features, cfg.standardize)?;
    let mut h_t_ol = task_features.select_rows(&ov.task_rows[..keep])?;
    if let Some(split) = &cfg.column_split {
        h_t_ol = h_t_ol.select_columns(&split.ol_columns)?;
    }
    let pair = PairData {
        party_id: party_id.to_owned(),
        overlap_ids: ov.overlapping_ids[..keep].to_vec(),
        h_t_ol,
        h_d_ol: d_scaled.values().select_rows(&ov.data_rows[..keep]),
    };
    Ok((pair, full))
}

/// PSI against every data party, standardization and the overlap/local cut.
/// Task rows shared with any data party are excluded from the local set.
pub fn prepare(ds: &Dataset, cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    if ds.data.is_empty() {
        return Err(Error::InvalidArgument("dataset has no data parties".into()));
    }
    let labels = ds.task.labels.as_ref().ok_or_else(|| Error::Schema("task party has no labels".into()))?;
    let (task_features, task_scaler) = scaled(&ds.task.features, cfg.standardize)?;
    let mut shared: HashSet<SampleId> = HashSet::new();
    let mut pairs = Vec::with_capacity(ds.data.len());
    for d in &ds.data {
        let (pair, full) = prepare_pair(&task_features, &d.party_id, &d.features, cfg)?;
        shared.extend(full);
        pairs.push(pair);
    }
    let nl_rows: Vec<usize> =
        (0..task_features.n_rows()).filter(|&i| !shared.contains(&task_features.ids()[i])).collect();
    if nl_rows.len() < 2 {
        return Err(Error::InvalidArgument("task party needs at least two non-overlapping samples".into()));
    }
    let mut h_nl = task_features.select_rows(&nl_rows)?;
    if let Some(split) = &cfg.column_split {
        h_nl = h_nl.select_columns(&split.nl_columns)?;
    }
    Ok(Prepared { task_id: ds.task.party_id.clone(), pairs, h_nl, y_nl: labels.select(&nl_rows), task_scaler })
}

/// Trained transfer state of the full pipeline for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferArtifacts {
    /// Pair models before contrastive fine-tuning.
    pub base_models: Vec<LktModel>,
    /// The same models after fine-tuning; these produce the augmented features.
    pub models: Vec<LktModel>,
    pub feds: Vec<FederatedRepresentation>,
}

#[derive(Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    /// One entry per requested condition, in request order.
    pub accuracies: Vec<f64>,
    pub bus: MessageBus,
    pub split: Split,
    pub transfer: Option<TransferArtifacts>,
}

/// One FRL execution for the pair at position `index`.
pub fn federate_pair(
    task_id: &str,
    pair: &PairData,
    index: usize,
    cfg: &FrlConfig,
    bus: &mut MessageBus,
    seed: u64,
) -> Result<FederatedRepresentation> {
    run_frl(
        bus,
        PartyInput { id: task_id, h_ol: pair.h_t_ol.values() },
        &[PartyInput { id: &pair.party_id, h_ol: &pair.h_d_ol }],
        &pair.overlap_ids,
        cfg,
        derive_seed(seed, STREAM_FRL + index as u64),
        Interleaving::Ordered,
    )
}

/// Run one FRL execution per data party on `bus`.
pub fn federate(
    prep: &Prepared,
    cfg: &FrlConfig,
    bus: &mut MessageBus,
    seed: u64,
) -> Result<Vec<FederatedRepresentation>> {
    prep.pairs.iter().enumerate().map(|(k, p)| federate_pair(&prep.task_id, p, k, cfg, bus, seed)).collect()
}

/// Train the pair model at position `index` on the given local rows. Purely local.
pub fn train_pair(
    pair: &PairData,
    fed: &FederatedRepresentation,
    index: usize,
    local: &FeatureMatrix,
    cfg: &LktConfig,
    seed: u64,
) -> Result<LktModel> {
    lkt_train(&pair.party_id, &pair.h_t_ol, local, fed, cfg, derive_seed(seed, STREAM_LKT + index as u64))
}

/// Train every pair model on the given local rows. Purely local.
pub fn train_pairs(
    pairs: &[PairData],
    feds: &[FederatedRepresentation],
    local: &FeatureMatrix,
    cfg: &LktConfig,
    seed: u64,
) -> Result<Vec<LktModel>> {
    pairs.iter().zip(feds).enumerate().map(|(k, (p, f))| train_pair(p, f, k, local, cfg, seed)).collect()
}

/// Contrastive phase over all pair models. Purely local.
pub fn finetune(
    models: &mut [LktModel],
    feds: &[FederatedRepresentation],
    local: &FeatureMatrix,
    cfg: &LktConfig,
    seed: u64,
) -> Result<()> {
    let refs: Vec<&Matrix> = feds.iter().map(|f| &f.matrix).collect();
    lkt_finetune_contrastive(models, local.values(), &refs, cfg, derive_seed(seed, STREAM_CONTRASTIVE))?;
    Ok(())
}

/// Train on `train` rows and score `test` rows. Purely local.
pub fn fit_and_score(
    x_train: &Matrix,
    y_train: &LabelVector,
    x_test: &Matrix,
    y_test: &LabelVector,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<f64> {
    let clf = train_classifier(x_train, y_train, cfg, derive_seed(seed, STREAM_CLASSIFIER))?;
    evaluate(&clf, x_test, y_test)
}

/// Split of the local rows used by `seed`.
pub fn seed_split(prep: &Prepared, cfg: &PipelineConfig, seed: u64) -> Result<Split> {
    stratified_split(prep.y_nl.labels(), prep.y_nl.num_classes(), &cfg.split, derive_seed(seed, STREAM_SPLIT))
        .map_err(|e| e.at_stage("split", seed))
}

/// The pipeline for one seed and several conditions. Conditions share the
/// split, the FRL output and (where the loss is the same) the pair models,
/// so their accuracies are paired comparisons.
pub fn run_seed(prep: &Prepared, conditions: &[Condition], cfg: &PipelineConfig, seed: u64) -> Result<SeedOutcome> {
    let split = seed_split(prep, cfg, seed)?;
    let train = prep.h_nl.select_rows(&split.train)?;
    let test = prep.h_nl.select_rows(&split.test)?;
    // transfer is label-free, so it sees every non-test row
    let pool = prep.h_nl.select_rows(&split.pool())?;
    let y_train = prep.y_nl.select(&split.train);
    let y_test = prep.y_nl.select(&split.test);

    let mut bus = MessageBus::new();
    let feds = if conditions.iter().any(|c| *c != Condition::Local) {
        federate(prep, &cfg.frl, &mut bus, seed).map_err(|e| e.at_stage("frl", seed))?
    } else {
        Vec::new()
    };

    let mut full: Option<Vec<LktModel>> = None;
    let mut no_mi: Option<Vec<LktModel>> = None;
    let mut transfer = None;
    let mut accuracies = Vec::with_capacity(conditions.len());
    for &cond in conditions {
        let (x_train, x_test) = match cond {
            Condition::Local => (train.values().clone(), test.values().clone()),
            _ => {
                let slot = if cond == Condition::AblationNoMi { &mut no_mi } else { &mut full };
                let mut models = match slot {
                    Some(m) => m.clone(),
                    None => {
                        let lkt_cfg =
                            if cond == Condition::AblationNoMi { cfg.lkt.without_mi() } else { cfg.lkt.clone() };
                        let m = train_pairs(&prep.pairs, &feds, &pool, &lkt_cfg, seed)
                            .map_err(|e| e.at_stage("lkt", seed))?;
                        slot.insert(m).clone()
                    }
                };
                if cond != Condition::AblationNoCl {
                    finetune(&mut models, &feds, &pool, &cfg.lkt, seed).map_err(|e| e.at_stage("contrastive", seed))?;
                }
                let a_train = apply_to_new_samples(&models, &train)?;
                let a_test = apply_to_new_samples(&models, &test)?;
                if cond == Condition::Unitrans {
                    let base_models = full.clone().unwrap_or_default();
                    transfer = Some(TransferArtifacts { base_models, models, feds: feds.clone() });
                }
                (a_train.matrix, a_test.matrix)
            }
        };
        let acc = fit_and_score(&x_train, &y_train, &x_test, &y_test, &cfg.classifier, seed)
            .map_err(|e| e.at_stage("downstream", seed))?;
        accuracies.push(acc);
    }
    Ok(SeedOutcome { seed, accuracies, bus, split, transfer })
}

/// Reports for several conditions plus the merged protocol trace.
#[derive(Debug)]
pub struct RunOutcome {
    pub reports: Vec<RunReport>,
    pub bus: MessageBus,
    pub seeds: Vec<SeedOutcome>,
}

pub fn run_conditions(
    prep: &Prepared,
    conditions: &[Condition],
    cfg: &PipelineConfig,
    seeds: &[u64],
    config_hash: &str,
) -> Result<RunOutcome> {
    if seeds.is_empty() || conditions.is_empty() {
        return Err(Error::InvalidArgument("need at least one seed and one condition".into()));
    }
    let outcomes: Vec<SeedOutcome> = if cfg.parallel {
        seeds.par_iter().map(|&s| run_seed(prep, conditions, cfg, s)).collect::<Result<_>>()?
    } else {
        seeds.iter().map(|&s| run_seed(prep, conditions, cfg, s)).collect::<Result<_>>()?
    };
    let mut bus = MessageBus::new();
    for o in &outcomes {
        bus.absorb(&o.bus);
    }
    let reports = conditions
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            RunReport::new(c, seeds.to_vec(), outcomes.iter().map(|o| o.accuracies[i]).collect(), config_hash)
        })
        .collect();
    Ok(RunOutcome { reports, bus, seeds: outcomes })
}

/// Single-condition convenience wrapper.
pub fn run_condition(
    ds: &Dataset,
    condition: Condition,
    cfg: &PipelineConfig,
    seeds: &[u64],
    config_hash: &str,
) -> Result<RunReport> {
    let prep = prepare(ds, cfg)?;
    let mut out = run_conditions(&prep, &[condition], cfg, seeds, config_hash)?;
    Ok(out.reports.remove(0))
}

/// Dataset and config for one point of a sweep.
pub fn sweep_point(
    ds: &Dataset,
    cfg: &PipelineConfig,
    axis: SweepAxis,
    value: usize,
) -> Result<(Dataset, PipelineConfig)> {
    let named = |e: Error| Error::InvalidArgument(format!("sweep axis {axis}: value {value}: {e}"));
    if value == 0 {
        return Err(named(Error::InvalidArgument("must be positive".into())));
    }
    let mut cfg = cfg.clone();
    let ds = match axis {
        SweepAxis::TaskFeatures => {
            if cfg.column_split.is_some() {
                return Err(named(Error::InvalidArgument("not available with a column split".into())));
            }
            ds.with_task_features(value).map_err(named)?
        }
        SweepAxis::DataFeatures => ds.with_data_features(value).map_err(named)?,
        SweepAxis::NumDataHospitals => ds.with_data_parties(value).map_err(named)?,
        SweepAxis::OverlapCount => {
            let smallest = ds
                .data
                .iter()
                .map(|d| psi_intersect(ds.task.features.ids(), d.features.ids()).map(|o| o.len()))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .min()
                .unwrap_or(0);
            if value > smallest {
                return Err(named(Error::InvalidArgument(format!("only {smallest} shared samples available"))));
            }
            cfg.overlap_count = Some(value);
            ds.clone()
        }
    };
    Ok((ds, cfg))
}

/// One report per value per condition; each report records the wall-clock
/// of its own preparation and run.
pub fn sweep(
    ds: &Dataset,
    axis: SweepAxis,
    values: &[usize],
    conditions: &[Condition],
    cfg: &PipelineConfig,
    seeds: &[u64],
    config_hash: &str,
) -> Result<Vec<RunReport>> {
    let points: Vec<(Dataset, PipelineConfig)> =
        values.iter().map(|&v| sweep_point(ds, cfg, axis, v)).collect::<Result<_>>()?;
    let mut reports = Vec::new();
    for ((d, c), &v) in points.iter().zip(values) {
        for &cond in conditions {
            let start = Instant::now();
            let mut r = run_condition(d, cond, c, seeds, config_hash)?;
            r.wall_clock_s = Some(start.elapsed().as_secs_f64());
            r.axis = Some(axis);
            r.value = Some(v);
            reports.push(r);
        }
    }
    Ok(reports)
}
