//! Train one transfer model on a synthetic task/data hospital pair, augment
//! the task hospital's local rows and round-trip the checkpoint.

use fedtransfer::bus::MessageBus;
use fedtransfer::downstream::{federate, prepare, train_pairs, PipelineConfig};
use fedtransfer::lkt::{apply_to_new_samples, load_checkpoint, save_checkpoint, Checkpoint, LktConfig};
use fedtransfer::orchestrator::{generate_synthetic, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate_synthetic(&SyntheticSpec { n_overlap: 400, n_local: 1200, ..Default::default() })?;
    let cfg = PipelineConfig { lkt: LktConfig { epochs: 10, ..Default::default() }, ..Default::default() };
    let prep = prepare(&ds, &cfg)?;

    let mut bus = MessageBus::new();
    let feds = federate(&prep, &cfg.frl, &mut bus, 0)?;
    let models = train_pairs(&prep.pairs, &feds, &prep.h_nl, &cfg.lkt, 0)?;
    for (e, h) in models[0].history.iter().enumerate() {
        println!("epoch {e:>2}: reconstruction {:.4}, mi {:.4}, total {:.4}", h.recons, h.mi, h.total);
    }

    let aug = apply_to_new_samples(&models, &prep.h_nl)?;
    println!(
        "augmented {} rows: {} raw + {} transferred columns",
        aug.ids.len(),
        prep.h_nl.n_cols(),
        aug.columns.len() - prep.h_nl.n_cols()
    );

    let path = std::env::temp_dir().join("fedtransfer-example-checkpoint.json");
    save_checkpoint(&path, &Checkpoint::new("example", prep.h_nl.columns().to_vec(), models.clone()))?;
    let back = load_checkpoint(&path, Some(prep.h_nl.columns()))?;
    println!("checkpoint round trip exact: {}", back.models == models);
    std::fs::remove_file(path)?;
    Ok(())
}
