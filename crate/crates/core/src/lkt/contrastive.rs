use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm2, seeded_rng, Adam, Matrix};

use super::{LktConfig, LktModel};

/// Which similarities enter the contrastive denominator for pair `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastiveForm {
    /// `Σ_k exp(Dist(Enc_i(H), Z_k)/τ)`: encoder `i` is pulled to its own
    /// attended representation and pushed away from the other pairs'.
    CrossPair,
    /// `Σ_k exp(Dist(Enc_k(H), Z_k)/τ)`: every pair's own similarity.
    Diagonal,
}

/// Row similarity used inside `Dist`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    Cosine,
    /// `cos²`: sign-agnostic, so negatives are pushed to orthogonality
    /// rather than to anti-alignment.
    SquaredCosine,
}

fn row_cos(a: &[f64], b: &[f64]) -> f64 {
    let na = norm2(a);
    let nb = norm2(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// Row-averaged similarity.
fn dist(e: &Matrix, z: &Matrix, sim: Similarity) -> f64 {
    let f = |c: f64| match sim {
        Similarity::Cosine => c,
        Similarity::SquaredCosine => c * c,
    };
    (0..e.rows()).map(|r| f(row_cos(e.row(r), z.row(r)))).sum::<f64>() / e.rows() as f64
}

/// `∂dist(e, z)/∂e`, scaled by `coef`, accumulated into `out`.
fn dist_grad_into(e: &Matrix, z: &Matrix, sim: Similarity, coef: f64, out: &mut Matrix) {
    let n = e.rows() as f64;
    for r in 0..e.rows() {
        let (er, zr) = (e.row(r), z.row(r));
        let ne = norm2(er);
        let nz = norm2(zr);
        if ne == 0.0 || nz == 0.0 {
            continue;
        }
        let c = dot(er, zr) / (ne * nz);
        let outer = match sim {
            Similarity::Cosine => 1.0,
            Similarity::SquaredCosine => 2.0 * c,
        };
        for (o, (&ei, &zi)) in out.row_mut(r).iter_mut().zip(er.iter().zip(zr)) {
            *o += coef * outer / n * (zi / (ne * nz) - c * ei / (ne * ne));
        }
    }
}

fn log_softmax_at(logits: &[f64], i: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = ex.iter().sum();
    let probs = ex.iter().map(|e| e / total).collect();
    (logits[i] - max - total.ln(), probs)
}

/// Per-pair contrastive losses for encodings `E_k` and fixed targets `Z_k`.
pub fn contrastive_loss(
    encodings: &[Matrix],
    zs: &[Matrix],
    tau: f64,
    form: ContrastiveForm,
    sim: Similarity,
) -> Result<Vec<f64>> {
    if encodings.len() != zs.len() || encodings.is_empty() {
        return Err(Error::InvalidArgument("contrastive loss needs matching, non-empty lists".into()));
    }
    let n = encodings.len();
    let diag: Vec<f64> = (0..n).map(|k| dist(&encodings[k], &zs[k], sim) / tau).collect();
    Ok((0..n)
        .map(|i| {
            let logits: Vec<f64> = match form {
                ContrastiveForm::CrossPair => zs.iter().map(|z| dist(&encodings[i], z, sim) / tau).collect(),
                ContrastiveForm::Diagonal => diag.clone(),
            };
            -log_softmax_at(&logits, i).0
        })
        .collect())
}

fn check_lists(models: &[LktModel], h_feds: &[&Matrix]) -> Result<()> {
    if models.is_empty() || models.len() != h_feds.len() {
        return Err(Error::InvalidArgument(format!(
            "{} models but {} federated representations",
            models.len(),
            h_feds.len()
        )));
    }
    Ok(())
}

/// Fine-tune every encoder against the others. Only `Enc_i` moves for pair
/// `i`; the attended targets `Z_k` are computed once up front. Returns the
/// mean contrastive loss per epoch.
pub fn lkt_finetune_contrastive(
    models: &mut [LktModel],
    h_t_nl: &Matrix,
    h_feds: &[&Matrix],
    cfg: &LktConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    check_lists(models, h_feds)?;
    let d = models[0].d;
    if models.iter().any(|m| m.d != d) {
        return Err(Error::Shape("contrastive fine-tuning needs a common latent width".into()));
    }
    let zs: Vec<Matrix> = models.iter().zip(h_feds).map(|(m, h)| m.attend(h_t_nl, h)).collect::<Result<_>>()?;
    let n_rows = h_t_nl.rows();
    let batch = cfg.batch_size.min(n_rows).max(1);
    let mut opts: Vec<Adam> = models.iter().map(|_| Adam::new(cfg.lr)).collect();
    let mut rng = seeded_rng(seed);
    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut history = Vec::with_capacity(cfg.finetune_epochs);
    let n = models.len();
    let sim = cfg.similarity;

    for epoch in 0..cfg.finetune_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut count = 0usize;
        for idx in order.chunks(batch) {
            let xb = h_t_nl.select_rows(idx);
            let zb: Vec<Matrix> = zs.iter().map(|z| z.select_rows(idx)).collect();
            for i in 0..n {
                let tau = models[i].tau;
                let (e_i, cache) = models[i].enc.forward(&xb)?;
                let logits: Vec<f64> = match cfg.contrastive {
                    ContrastiveForm::CrossPair => zb.iter().map(|z| dist(&e_i, z, sim) / tau).collect(),
                    ContrastiveForm::Diagonal => (0..n)
                        .map(|k| {
                            if k == i {
                                Ok(dist(&e_i, &zb[k], sim) / tau)
                            } else {
                                Ok(dist(&models[k].enc.predict(&xb)?, &zb[k], sim) / tau)
                            }
                        })
                        .collect::<Result<_>>()?,
                };
                let (log_p, probs) = log_softmax_at(&logits, i);
                let loss = -log_p;
                if !loss.is_finite() {
                    return Err(Error::Divergence { seed, epoch });
                }
                sum += loss;
                count += 1;
                let mut grad_e = Matrix::zeros(e_i.rows(), e_i.cols());
                match cfg.contrastive {
                    ContrastiveForm::CrossPair => {
                        for (k, z) in zb.iter().enumerate() {
                            let coef = (probs[k] - if k == i { 1.0 } else { 0.0 }) / tau;
                            dist_grad_into(&e_i, z, sim, coef, &mut grad_e);
                        }
                    }
                    ContrastiveForm::Diagonal => dist_grad_into(&e_i, &zb[i], sim, (probs[i] - 1.0) / tau, &mut grad_e),
                }
                let (g, _) = models[i].enc.backward(&cache, &grad_e)?;
                models[i].enc.adam_step(&g, &mut opts[i])?;
            }
        }
        history.push(sum / count.max(1) as f64);
    }
    Ok(history)
}

/// Mean pairwise absolute row cosine similarity between encoder outputs.
/// Zero for fewer than two models.
pub fn redundancy(models: &[LktModel], x: &Matrix) -> Result<f64> {
    let enc: Vec<Matrix> = models.iter().map(|m| m.encode(x)).collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..enc.len() {
        for j in i + 1..enc.len() {
            if enc[i].shape() != enc[j].shape() {
                return Err(Error::Shape("encoders have different latent widths".into()));
            }
            total += (0..x.rows()).map(|r| row_cos(enc[i].row(r), enc[j].row(r)).abs()).sum::<f64>() / x.rows() as f64;
            pairs += 1;
        }
    }
    Ok(if pairs == 0 { 0.0 } else { total / pairs as f64 })
}
