//! Task-specific learning on raw or augmented local features and the
//! multi-seed evaluation protocol.

mod classifier;
mod report;
mod runner;
mod split;

pub use classifier::{accuracy, evaluate, train_classifier, Classifier, ClassifierConfig, ClassifierKind};
pub use report::{mean_std, Condition, RunReport, SweepAxis};
pub use runner::{
    federate, federate_pair, finetune, fit_and_score, prepare, prepare_pair, run_condition, run_conditions, run_seed,
    seed_split, sweep, sweep_point, train_pair, train_pairs, PairData, PipelineConfig, Prepared, RunOutcome,
    SeedOutcome, TransferArtifacts,
};
pub use split::{stratified_split, Split, SplitSpec};
