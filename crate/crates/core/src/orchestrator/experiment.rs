//! End-to-end runs, sweeps, persisted artifacts and knowledge extension.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bus::MessageBus;
use crate::data::{load_csv, write_csv, Dataset, FeatureMatrix, PartyState};
use crate::downstream::{
    federate_pair, finetune, fit_and_score, prepare, prepare_pair, run_conditions, seed_split, sweep_point, train_pair,
    Condition, PipelineConfig, RunReport, SweepAxis,
};
use crate::error::{Error, Result};
use crate::frl::FederatedRepresentation;
use crate::lkt::{apply_to_new_samples, redundancy, save_checkpoint, Checkpoint, LktModel};

use super::config::{CsvParty, ExperimentConfig};
use super::synthetic::generate_synthetic;

pub const STATE_FORMAT: &str = "fedtransfer-state";
pub const STATE_VERSION: u32 = 1;

/// File name of the report for one condition.
pub fn report_file_name(condition: Condition) -> String {
    format!("report-{condition}.json")
}

fn load_party(cfg: &ExperimentConfig, p: &CsvParty, default_name: String, task: bool) -> Result<PartyState> {
    let path = cfg.resolve(&p.path);
    let (mut features, labels) = load_csv(&path, &p.id_column, p.label_column.as_deref())?;
    if let Some(cols) = &p.columns {
        features = features.select_columns(cols).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    }
    let name = p.name.clone().unwrap_or(default_name);
    if task {
        let labels = labels.ok_or_else(|| Error::Schema(format!("{}: task table has no labels", path.display())))?;
        PartyState::task(name, features, labels)
    } else {
        Ok(PartyState::data(name, features))
    }
}

/// Materialize the configured dataset.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    if let Some(spec) = cfg.synthetic_spec() {
        return generate_synthetic(&spec);
    }
    let csv = cfg.dataset.csv.as_ref().expect("non-synthetic configs carry a csv source");
    let task = load_party(cfg, &csv.task, "task".into(), true)?;
    let data = csv
        .data
        .iter()
        .enumerate()
        .map(|(k, p)| load_party(cfg, p, format!("data{}", k + 1), false))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(task, data)
}

/// Write a dataset as one CSV per party plus a config that reads them back.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<ExperimentConfig> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let labels = ds.task.labels.as_ref().expect("dataset task party is labelled");
    let task_file = format!("{}.csv", ds.task.party_id);
    write_csv(dir.join(&task_file), &ds.task.features, "id", Some(("label", labels)))?;
    let mut data = Vec::with_capacity(ds.data.len());
    for d in &ds.data {
        let file = format!("{}.csv", d.party_id);
        write_csv(dir.join(&file), &d.features, "id", None)?;
        data.push(CsvParty {
            name: Some(d.party_id.clone()),
            path: file.into(),
            id_column: "id".into(),
            label_column: None,
            columns: None,
        });
    }
    let task = CsvParty {
        name: Some(ds.task.party_id.clone()),
        path: task_file.into(),
        id_column: "id".into(),
        label_column: Some("label".into()),
        columns: None,
    };
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.csv = Some(super::config::CsvDataset { task, data });
    let text = cfg.to_toml_string()?;
    let path = dir.join("experiment.toml");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    cfg.base_dir = Some(dir.to_owned());
    Ok(cfg)
}

/// Everything the task party keeps after a run to extend it later without
/// repeating the existing protocol executions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferState {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub input_columns: Vec<String>,
    /// Pair models before contrastive fine-tuning, one per data party.
    pub base_models: Vec<LktModel>,
    /// Federated representations, in the same order.
    pub feds: Vec<FederatedRepresentation>,
}

impl TransferState {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let state: TransferState =
            serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if state.format != STATE_FORMAT || state.version != STATE_VERSION {
            return Err(Error::Checkpoint(format!("{}: not a version {STATE_VERSION} state file", path.display())));
        }
        if state.base_models.len() != state.feds.len() {
            return Err(Error::Checkpoint(format!("{}: model and representation counts differ", path.display())));
        }
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn parties(&self) -> Vec<&str> {
        self.base_models.iter().map(|m| m.id.as_str()).collect()
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub config_hash: String,
    /// One report per condition, in config order.
    pub reports: Vec<RunReport>,
    /// Protocol trace of every seed, merged in seed order.
    pub bus: MessageBus,
    /// Transfer state of the first seed when `unitrans` ran.
    pub state: Option<TransferState>,
    /// Fine-tuned models of the first seed when `unitrans` ran.
    pub models: Option<Vec<LktModel>>,
    pub wall_clock_s: f64,
}

/// Run every configured condition on an already materialized dataset.
pub fn execute(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    pipeline: &PipelineConfig,
    config_hash: &str,
) -> Result<ExperimentOutcome> {
    let start = Instant::now();
    let prep = prepare(ds, pipeline)?;
    let seeds = cfg.seeds();
    let out = run_conditions(&prep, &cfg.conditions, pipeline, &seeds, config_hash)?;
    let first = out.seeds.into_iter().next().and_then(|s| s.transfer);
    let (state, models) = match first {
        Some(t) => (
            Some(TransferState {
                format: STATE_FORMAT.into(),
                version: STATE_VERSION,
                config_hash: config_hash.to_owned(),
                seed: seeds[0],
                input_columns: prep.h_nl.columns().to_vec(),
                base_models: t.base_models,
                feds: t.feds,
            }),
            Some(t.models),
        ),
        None => (None, None),
    };
    Ok(ExperimentOutcome {
        config_hash: config_hash.to_owned(),
        reports: out.reports,
        bus: out.bus,
        state,
        models,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct Timing<'a> {
    config_hash: &'a str,
    wall_clock_s: f64,
    seeds: usize,
    conditions: &'a [Condition],
}

/// Persist an outcome:
///
/// - `report-<condition>.json`: per-seed accuracies and summary (deterministic)
/// - `trace.jsonl`: every protocol message, one JSON object per line
/// - `config.json`: the configuration that produced the run
/// - `checkpoint.json`, `state.json`: first-seed transfer models, when trained
/// - `timing.json`: wall-clock, kept out of the reports so they stay reproducible
pub fn write_outcome(dir: &Path, cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in &outcome.reports {
        write_json(&dir.join(report_file_name(r.condition)), r)?;
    }
    outcome.bus.write_trace(dir.join("trace.jsonl"))?;
    write_json(&dir.join("config.json"), cfg)?;
    if let (Some(state), Some(models)) = (&outcome.state, &outcome.models) {
        let ckpt = Checkpoint::new(outcome.config_hash.clone(), state.input_columns.clone(), models.clone());
        save_checkpoint(&dir.join("checkpoint.json"), &ckpt)?;
        state.save(&dir.join("state.json"))?;
    }
    let timing = Timing {
        config_hash: &outcome.config_hash,
        wall_clock_s: outcome.wall_clock_s,
        seeds: cfg.num_seeds,
        conditions: &cfg.conditions,
    };
    write_json(&dir.join("timing.json"), &timing)
}

/// Load the data, run every condition and write the artifacts to `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let outcome = execute(cfg, &ds, &cfg.to_pipeline(), &cfg.config_hash())?;
    write_outcome(out_dir, cfg, &outcome)?;
    Ok(outcome)
}

/// Directory name of one sweep point.
pub fn sweep_dir_name(axis: SweepAxis, value: usize) -> String {
    format!("{axis}-{value}")
}

/// Hash identifying one point of a sweep over a base config.
pub fn sweep_hash(base_hash: &str, axis: SweepAxis, value: usize) -> String {
    hex::encode(Sha256::digest(format!("{base_hash}/{axis}={value}").as_bytes()))
}

/// One full experiment per value, each written to `out_dir/<axis>-<value>`.
/// Points run one after another; seeds within a point follow `cfg.parallel`.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[usize],
    out_dir: &Path,
) -> Result<Vec<(PathBuf, ExperimentOutcome)>> {
    cfg.validate()?;
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value".into()));
    }
    let ds = load_dataset(cfg)?;
    let base_hash = cfg.config_hash();
    let pipeline = cfg.to_pipeline();
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let (ds_v, p_v) = sweep_point(&ds, &pipeline, axis, v)?;
        let mut outcome = execute(cfg, &ds_v, &p_v, &sweep_hash(&base_hash, axis, v))?;
        for r in &mut outcome.reports {
            r.axis = Some(axis);
            r.value = Some(v);
        }
        let dir = out_dir.join(sweep_dir_name(axis, v));
        write_outcome(&dir, cfg, &outcome)?;
        out.push((dir, outcome));
    }
    Ok(out)
}

/// Result of adding one data hospital to a finished run.
#[derive(Debug)]
pub struct Extension {
    pub state: TransferState,
    /// All `n + 1` encoders after the rerun fine-tuning phase.
    pub models: Vec<LktModel>,
    /// Messages of the new hospital's protocol execution.
    pub bus: MessageBus,
    /// Mean pairwise |cos| between encoder outputs on the local rows,
    /// before and after fine-tuning.
    pub redundancy_before: f64,
    pub redundancy_after: f64,
    /// Downstream accuracy of the extended pipeline for the state's seed.
    pub report: RunReport,
}

/// Add a data hospital to a finished run: one new FRL execution and one new
/// pair model; existing pair models are reused and only the contrastive
/// fine-tuning reruns, over all `n + 1` encoders.
///
/// The local rows are those of the original run, so the extension matches a
/// fresh run with `n + 1` hospitals whenever the new hospital does not share
/// additional ids with the task party's local rows.
pub fn add_data_hospital(cfg: &ExperimentConfig, state: &TransferState, new_party: &PartyState) -> Result<Extension> {
    cfg.validate()?;
    if cfg.config_hash() != state.config_hash {
        return Err(Error::Schema("state was produced under a different configuration".into()));
    }
    if state.parties().contains(&new_party.party_id.as_str()) {
        return Err(Error::Schema(format!("data party '{}' is already part of the run", new_party.party_id)));
    }
    let ds = load_dataset(cfg)?;
    if ds.task.party_id == new_party.party_id {
        return Err(Error::Schema(format!("'{}' is the task party", new_party.party_id)));
    }
    let mut pipeline = cfg.to_pipeline();
    pipeline.parallel = false;
    let prep = prepare(&ds, &pipeline)?;
    if prep.h_nl.columns() != state.input_columns.as_slice() {
        return Err(Error::Schema(format!(
            "local schema {:?} does not match the run's {:?}",
            prep.h_nl.columns(),
            state.input_columns
        )));
    }
    let seed = state.seed;
    let task_scaled = match &prep.task_scaler {
        Some(s) => ds.task.features.with_values(s.apply(ds.task.features.values())?)?,
        None => ds.task.features.clone(),
    };
    let (pair, _) = prepare_pair(&task_scaled, &new_party.party_id, &new_party.features, &pipeline)?;
    let index = state.base_models.len();

    let mut bus = MessageBus::new();
    let fed = federate_pair(&prep.task_id, &pair, index, &pipeline.frl, &mut bus, seed)
        .map_err(|e| e.at_stage("frl", seed))?;
    let split = seed_split(&prep, &pipeline, seed)?;
    let pool = prep.h_nl.select_rows(&split.pool())?;
    let model = train_pair(&pair, &fed, index, &pool, &pipeline.lkt, seed).map_err(|e| e.at_stage("lkt", seed))?;

    let mut base_models = state.base_models.clone();
    base_models.push(model);
    let mut feds = state.feds.clone();
    feds.push(fed);
    let mut models = base_models.clone();
    let redundancy_before = redundancy(&models, pool.values())?;
    finetune(&mut models, &feds, &pool, &pipeline.lkt, seed).map_err(|e| e.at_stage("contrastive", seed))?;
    let redundancy_after = redundancy(&models, pool.values())?;

    let train: FeatureMatrix = prep.h_nl.select_rows(&split.train)?;
    let test = prep.h_nl.select_rows(&split.test)?;
    let acc = fit_and_score(
        &apply_to_new_samples(&models, &train)?.matrix,
        &prep.y_nl.select(&split.train),
        &apply_to_new_samples(&models, &test)?.matrix,
        &prep.y_nl.select(&split.test),
        &pipeline.classifier,
        seed,
    )
    .map_err(|e| e.at_stage("downstream", seed))?;

    let new_state = TransferState { base_models, feds, ..state.clone() };
    Ok(Extension {
        report: RunReport::new(Condition::Unitrans, vec![seed], vec![acc], state.config_hash.clone()),
        state: new_state,
        models,
        bus,
        redundancy_before,
        redundancy_after,
    })
}
