//! Neural mutual-information lower bound on correlated Gaussians, compared
//! with the closed form -0.5 ln(1 - rho^2).

use fedtransfer::lkt::{mine_estimate, new_critic, train_critic};
use fedtransfer::numerics::{seeded_rng, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = seeded_rng(1);
    for rho in [0.0, 0.5, 0.8, 0.95] {
        let p = Matrix::from_fn(2000, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = Matrix::from_fn(2000, 1, |i, _| {
            rho * p[(i, 0)] + (1.0f64 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal)
        });
        let mut critic = new_critic(1, 64, &mut rng)?;
        train_critic(&mut critic, &p, &q, 2000, 200, 2e-3, 5)?;
        let est = mine_estimate(&critic, &p, &q, &mut rng)?;
        println!("rho {rho:.2}: estimate {est:.3} nats, analytic {:.3}", -0.5 * (1.0 - rho * rho).ln());
    }
    Ok(())
}
