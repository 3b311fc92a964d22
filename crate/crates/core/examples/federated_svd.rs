//! Two hospitals compute the left singular vectors of their joined features
//! without revealing them, and the result is compared with a centralized SVD.

use fedtransfer::bus::{Interleaving, MessageBus};
use fedtransfer::data::SampleId;
use fedtransfer::frl::{run_frl, FrlConfig, PartyInput};
use fedtransfer::numerics::{seeded_rng, svd, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = seeded_rng(7);
    let mut draw = |r, c| Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (h_task, h_data) = (draw(200, 12), draw(200, 8));
    let ids: Vec<SampleId> = (0..200).map(|i| SampleId(format!("p{i:03}"))).collect();

    let mut bus = MessageBus::new();
    let fed = run_frl(
        &mut bus,
        PartyInput { id: "task", h_ol: &h_task },
        &[PartyInput { id: "data1", h_ol: &h_data }],
        &ids,
        &FrlConfig::default(),
        1,
        Interleaving::Ordered,
    )?;

    let oracle = svd(&Matrix::hstack(&[&h_task, &h_data])?)?.u;
    let mut worst = 0.0f64;
    for j in 0..oracle.cols() {
        let (g, w) = (fed.matrix.column(j), oracle.column(j));
        let dot: f64 = g.iter().zip(&w).map(|(a, b)| a * b).sum();
        worst = worst.max(g.iter().zip(&w).map(|(a, b)| (a * dot.signum() - b).abs()).fold(0.0, f64::max));
    }
    println!("representation {}x{}", fed.matrix.rows(), fed.matrix.cols());
    println!("max entry error vs centralized SVD: {worst:.2e}");
    println!("{} messages exchanged:", bus.trace().len());
    for r in bus.trace() {
        println!("  {:>8} -> {:<8} {:<22} {:?}", r.from, r.to, r.kind, r.shape);
    }
    Ok(())
}
