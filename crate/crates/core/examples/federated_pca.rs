//! Federated PCA: each party runs local power iteration, a server weights the
//! eigenvector shares, and the task party projects its features.

use fedtransfer::bus::{Interleaving, MessageBus};
use fedtransfer::data::SampleId;
use fedtransfer::frl::{run_frl, vfedpca_aggregate, EigenShare, FrlConfig, FrlMethod, PartyInput};
use fedtransfer::numerics::{seeded_rng, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = seeded_rng(3);
    let mut draw = |r, c| Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (h_task, h_a, h_b) = (draw(100, 6), draw(100, 4), draw(100, 5));
    let ids: Vec<SampleId> = (0..100).map(|i| SampleId(format!("p{i:03}"))).collect();

    let cfg = FrlConfig { method: FrlMethod::Vfedpca, ..FrlConfig::default() };
    let mut bus = MessageBus::new();
    let fed = run_frl(
        &mut bus,
        PartyInput { id: "task", h_ol: &h_task },
        &[PartyInput { id: "data1", h_ol: &h_a }, PartyInput { id: "data2", h_ol: &h_b }],
        &ids,
        &cfg,
        11,
        Interleaving::Shuffled(5),
    )?;
    println!("representation {}x{}, {} messages", fed.matrix.rows(), fed.matrix.cols(), bus.trace().len());

    // the aggregation weights are the eigenvalue shares
    let agg = vfedpca_aggregate(&[
        EigenShare { eigvec: vec![1.0, 0.0], eigval: 2.0 },
        EigenShare { eigvec: vec![0.0, 1.0], eigval: 3.0 },
    ])?;
    println!("weights for eigenvalues 2 and 3: {:?}", agg.weights);
    Ok(())
}
