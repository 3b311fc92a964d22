//! Generate a synthetic three-hospital dataset as CSV files, run every
//! condition on it and print the comparison table.

use fedtransfer::downstream::Condition;
use fedtransfer::lkt::LktConfig;
use fedtransfer::orchestrator::{
    generate_synthetic, render, run_experiment, write_dataset, ReportFormat, SyntheticSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("fedtransfer-example-run");
    let spec = SyntheticSpec { n_overlap: 300, n_local: 1000, num_data_parties: 2, ..Default::default() };
    let mut cfg = write_dataset(&generate_synthetic(&spec)?, &root.join("data"))?;
    cfg.name = "example".into();
    cfg.num_seeds = 3;
    cfg.conditions = Condition::ALL.to_vec();
    cfg.lkt = LktConfig { epochs: 10, ..Default::default() };

    let outcome = run_experiment(&cfg, &root.join("out"))?;
    print!("{}", render(&outcome.reports, ReportFormat::Md)?);
    println!("artifacts in {} ({:.1} s)", root.join("out").display(), outcome.wall_clock_s);
    Ok(())
}
