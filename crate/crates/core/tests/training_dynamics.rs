//! Recorded training-history properties of the transfer model.

use fedtransfer::data::{FeatureMatrix, SampleId};
use fedtransfer::frl::{FederatedRepresentation, FrlMethod};
use fedtransfer::lkt::{lkt_train, LktConfig};
use fedtransfer::numerics::{seeded_rng, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn ids(prefix: &str, n: usize) -> Vec<SampleId> {
    (0..n).map(|i| SampleId(format!("{prefix}{i}"))).collect()
}

#[test]
fn mutual_information_rises_during_training() {
    // default experiment scale: 3000 local and 1000 overlapping rows that
    // share four latent factors with the federated representation
    let (n_nl, n_ol) = (3000, 1000);
    let mix = gaussian(4, 6, 90);
    let z_nl = gaussian(n_nl, 4, 92);
    let z_ol = gaussian(n_ol, 4, 93);
    let x_nl = z_nl.matmul(&mix).unwrap().add(&gaussian(n_nl, 6, 94).scale(0.3)).unwrap();
    let x_ol = z_ol.matmul(&mix).unwrap().add(&gaussian(n_ol, 6, 95).scale(0.3)).unwrap();
    let cols: Vec<String> = (0..6).map(|j| format!("x{j}")).collect();
    let ol = FeatureMatrix::new(ids("o", n_ol), cols.clone(), x_ol).unwrap();
    let nl = FeatureMatrix::new(ids("n", n_nl), cols, x_nl).unwrap();
    let fed = FederatedRepresentation {
        matrix: z_ol.matmul(&gaussian(4, 5, 100)).unwrap(),
        method: FrlMethod::Fedsvd,
        overlap_ids: ol.ids().to_vec(),
    };

    let m = lkt_train("a", &ol, &nl, &fed, &LktConfig::default(), 5).unwrap();
    let mi: Vec<f64> = m.history.iter().map(|h| h.mi).collect();
    assert!(mi.last().unwrap() > &(mi[0] + 1.0), "no overall rise: {mi:?}");
    let rising = mi.windows(2).filter(|w| w[1] >= w[0]).count();
    let steps = mi.len() - 1;
    assert!(rising * 5 >= steps * 4, "{rising} of {steps} epoch steps non-decreasing: {mi:?}");
}
