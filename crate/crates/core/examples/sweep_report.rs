//! Sweep the number of overlapping samples and render the persisted reports.

use fedtransfer::downstream::SweepAxis;
use fedtransfer::lkt::LktConfig;
use fedtransfer::orchestrator::{load_reports, render, run_sweep, ExperimentConfig, ReportFormat, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg =
        ExperimentConfig { num_seeds: 3, lkt: LktConfig { epochs: 10, ..Default::default() }, ..Default::default() };
    cfg.dataset.synthetic = Some(SyntheticSpec { n_overlap: 400, n_local: 1000, ..Default::default() });
    let dir = std::env::temp_dir().join("fedtransfer-example-sweep");
    run_sweep(&cfg, SweepAxis::OverlapCount, &[50, 100, 200, 400], &dir)?;

    let reports = load_reports(&dir)?;
    print!("{}", render(&reports, ReportFormat::Md)?);
    print!("{}", render(&reports, ReportFormat::Csv)?);
    Ok(())
}
