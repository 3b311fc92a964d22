//! Parties, sample alignment, and tabular ingestion.

mod csv_io;
mod partition;
mod psi;
mod types;

pub use csv_io::{load_csv, write_csv};
pub use partition::{split_partitions, standardize, ColumnSplit, Standardization, TaskPartitions};
pub use psi::psi_intersect;
pub use types::{Dataset, FeatureMatrix, LabelVector, OverlapIndex, PartyState, Role, SampleId};
