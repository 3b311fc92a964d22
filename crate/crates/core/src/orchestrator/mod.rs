//! Experiment orchestration: synthetic data, configuration, end-to-end runs
//! and persisted results.

mod config;
mod experiment;
mod render;
mod synthetic;

pub use config::{load_synthetic_spec, CsvDataset, CsvParty, DatasetConfig, ExperimentConfig, Mode, OverlapConfig};
pub use experiment::{
    add_data_hospital, execute, load_dataset, report_file_name, run_experiment, run_sweep, sweep_dir_name, sweep_hash,
    write_dataset, write_outcome, ExperimentOutcome, Extension, TransferState, STATE_FORMAT, STATE_VERSION,
};
pub use render::{load_reports, render, ReportFormat};
pub use synthetic::{generate_synthetic, Link, SyntheticSpec};
