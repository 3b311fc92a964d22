//! Finish a run with one data hospital, then bring in a second one: a single
//! new federation, one new pair model and a rerun of the fine-tuning phase.

use fedtransfer::downstream::Condition;
use fedtransfer::lkt::LktConfig;
use fedtransfer::orchestrator::{add_data_hospital, execute, load_dataset, ExperimentConfig, SyntheticSpec};

fn config(parties: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        num_seeds: 1,
        conditions: vec![Condition::Unitrans],
        lkt: LktConfig { epochs: 10, ..Default::default() },
        ..Default::default()
    };
    cfg.dataset.synthetic =
        Some(SyntheticSpec { n_overlap: 300, n_local: 1000, num_data_parties: parties, ..Default::default() });
    cfg
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = config(1);
    let run = execute(&cfg, &load_dataset(&cfg)?, &cfg.to_pipeline(), &cfg.config_hash())?;
    let state = run.state.expect("unitrans keeps its transfer state");
    println!("initial run: accuracy {:.4} with {:?}", run.reports[0].mean, state.parties());

    let newcomer = load_dataset(&config(2))?.data.remove(1);
    let ext = add_data_hospital(&cfg, &state, &newcomer)?;
    println!("after adding '{}': accuracy {:.4} with {:?}", newcomer.party_id, ext.report.mean, ext.state.parties());
    println!("protocol executions for the new hospital: {}", ext.bus.executions(""));
    println!("encoder redundancy {:.3} -> {:.3}", ext.redundancy_before, ext.redundancy_after);
    Ok(())
}
