//! Local knowledge transfer: distil a federated representation of the
//! overlapping samples into an encoder over the task party's local samples.
//!
//! Each (task, data party) pair gets its own [`LktModel`]: an autoencoder
//! whose latent codes attend over `H_fed·Φ`, trained to reconstruct local
//! features while maximizing a neural mutual-information bound between the
//! codes and the attended representation. Contrastive fine-tuning then
//! pushes the pair encoders apart, and [`augment`] concatenates their codes
//! onto the raw features.

mod attention;
mod augment;
mod checkpoint;
mod contrastive;
mod mine;

pub use attention::{cross_attention, cross_attention_backward, AttentionOutput};
pub use augment::{apply_to_new_samples, augment, AugmentedFeatures};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use contrastive::{contrastive_loss, lkt_finetune_contrastive, redundancy, ContrastiveForm, Similarity};
pub use mine::{derangement, mine_estimate, mine_estimate_with_pairing, mine_eval, new_critic, train_critic, MineEval};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::frl::FederatedRepresentation;
use crate::numerics::{derive_seed, seeded_rng, Activation, Adam, DenseNet, Gradients, Matrix};

/// What the autoencoder reconstructs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconSource {
    /// Overlapping task rows (requires identical ol/nl schemas).
    Overlap,
    /// The local non-overlapping batch itself.
    NonOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LktConfig {
    /// Latent width; defaults to the local feature count.
    pub d: Option<usize>,
    pub hidden: usize,
    pub mine_hidden: usize,
    pub lambda: f64,
    /// Per-term weights `(β₀, β₁)`: `L = β₀·L_recons − β₁·L_mi`. Overrides `lambda`.
    pub loss_weights: Option<[f64; 2]>,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub finetune_epochs: usize,
    /// `None` picks `Overlap` in intra-domain mode and `NonOverlap` otherwise.
    pub recon_source: Option<ReconSource>,
    pub contrastive: ContrastiveForm,
    pub similarity: Similarity,
    /// Rescale `H_fed` to unit root-mean-square before using it as keys.
    pub normalize_keys: bool,
}

impl Default for LktConfig {
    fn default() -> Self {
        LktConfig {
            d: None,
            hidden: 64,
            mine_hidden: 64,
            lambda: 0.1,
            loss_weights: None,
            tau: 0.5,
            lr: 1e-3,
            batch_size: 100,
            epochs: 30,
            finetune_epochs: 10,
            recon_source: None,
            contrastive: ContrastiveForm::CrossPair,
            similarity: Similarity::SquaredCosine,
            normalize_keys: true,
        }
    }
}

impl LktConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("lkt.{m}")));
        if self.d == Some(0) || self.hidden == 0 || self.mine_hidden == 0 {
            return bad("d, hidden and mine_hidden must be positive");
        }
        let tau_ok = self.tau > 0.0;
        if !tau_ok {
            return bad("tau must be positive");
        }
        let lr_ok = self.lr >= 0.0;
        if !lr_ok || !self.lambda.is_finite() {
            return bad("lr must be non-negative and lambda finite");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if let Some(w) = self.loss_weights {
            if !w.iter().all(|x| x.is_finite()) {
                return bad("loss_weights must be finite");
            }
        }
        Ok(())
    }

    /// `(weight on L_recons, weight on L_mi)`.
    pub fn term_weights(&self) -> (f64, f64) {
        match self.loss_weights {
            Some([b0, b1]) => (b0, b1),
            None => (1.0, self.lambda),
        }
    }

    /// Same config with the mutual-information term switched off.
    pub fn without_mi(&self) -> LktConfig {
        let mut c = self.clone();
        c.lambda = 0.0;
        if let Some(w) = &mut c.loss_weights {
            w[1] = 0.0;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub recons: f64,
    /// Zero when the mutual-information term is disabled.
    pub mi: f64,
    pub total: f64,
}

/// One trained (task, data party) transfer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LktModel {
    /// Provenance tag, usually the data party id.
    pub id: String,
    pub enc: DenseNet,
    pub dec: DenseNet,
    /// `|X_fed| × d`
    pub phi: Matrix,
    pub mine: DenseNet,
    pub d: usize,
    pub lambda: f64,
    pub tau: f64,
    pub weights: (f64, f64),
    /// Multiplier applied to `H_fed` before it is used as keys.
    pub key_scale: f64,
    /// Column schema the encoder was trained on.
    pub input_columns: Vec<String>,
    pub history: Vec<EpochStats>,
}

/// Loss components for one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub recons: f64,
    pub mi: f64,
    pub total: f64,
}

/// Gradients of the total loss (descent) and of `−L_mi` for the critic.
#[derive(Debug, Clone)]
pub struct LktGradients {
    pub enc: Gradients,
    pub dec: Gradients,
    pub phi: Matrix,
    pub mine: Gradients,
}

/// Inputs of one training step.
#[derive(Debug, Clone)]
pub struct LossBatch<'a> {
    pub x_nl: &'a Matrix,
    pub recon_input: &'a Matrix,
    pub recon_target: &'a Matrix,
    /// Scaled keys source, `|I_ol| × |X_fed|`.
    pub keys: &'a Matrix,
    /// Marginal pairing for the mutual-information bound.
    pub pairing: &'a [usize],
}

fn key_scale(h: &Matrix, normalize: bool) -> f64 {
    if !normalize {
        return 1.0;
    }
    let rms = h.frobenius_norm() / ((h.rows() * h.cols()) as f64).sqrt();
    if rms > 0.0 {
        1.0 / rms
    } else {
        1.0
    }
}

impl LktModel {
    /// Fresh model with Glorot-initialized networks and Gaussian `Φ`.
    pub fn init(
        id: impl Into<String>,
        input_columns: Vec<String>,
        recon_width: usize,
        fed_width: usize,
        cfg: &LktConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let input = input_columns.len();
        if input == 0 || recon_width == 0 || fed_width == 0 {
            return Err(Error::Shape("LKT widths must be positive".into()));
        }
        let d = cfg.d.unwrap_or(input);
        let h = cfg.hidden;
        let mut rng = seeded_rng(seed);
        let enc = DenseNet::new(
            &[input, h, h, d],
            &[Activation::Sigmoid, Activation::Sigmoid, Activation::Linear],
            &mut rng,
        )?;
        let dec = DenseNet::new(
            &[d, h, h, recon_width],
            &[Activation::Sigmoid, Activation::Sigmoid, Activation::Linear],
            &mut rng,
        )?;
        let normal = Normal::new(0.0, 1.0 / (fed_width as f64).sqrt()).expect("valid std");
        let phi = Matrix::from_fn(fed_width, d, |_, _| normal.sample(&mut rng));
        let mine = new_critic(d, cfg.mine_hidden, &mut rng)?;
        Ok(LktModel {
            id: id.into(),
            enc,
            dec,
            phi,
            mine,
            d,
            lambda: cfg.lambda,
            tau: cfg.tau,
            weights: cfg.term_weights(),
            key_scale: 1.0,
            input_columns,
            history: Vec::new(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.enc.validate()?;
        self.dec.validate()?;
        self.mine.validate()?;
        if self.enc.output_width() != self.d || self.phi.cols() != self.d || self.dec.input_width() != self.d {
            return Err(Error::Schema(format!("latent width {} is inconsistent across Enc/Dec/Φ", self.d)));
        }
        if self.mine.input_width() != 2 * self.d {
            return Err(Error::Schema("critic input width must be 2d".into()));
        }
        if self.enc.input_width() != self.input_columns.len() {
            return Err(Error::Schema("encoder width differs from its column schema".into()));
        }
        if !self.phi.is_finite() {
            return Err(Error::Schema("Φ has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.enc.predict(x)
    }

    /// Keys source as the model sees it: `key_scale · H_fed`.
    pub fn keys_source(&self, h_fed: &Matrix) -> Matrix {
        h_fed.scale(self.key_scale)
    }

    /// Attended representation `Z` for local rows `x`.
    pub fn attend(&self, x: &Matrix, h_fed: &Matrix) -> Result<Matrix> {
        let p = self.encode(x)?;
        Ok(cross_attention(&p, &self.keys_source(h_fed), &self.phi)?.z)
    }

    /// Loss terms and all gradients for one batch.
    pub fn loss_and_gradients(&self, batch: &LossBatch<'_>) -> Result<(LossTerms, LktGradients)> {
        let (w_rec, w_mi) = self.weights;
        // reconstruction branch
        let (code_r, cache_er) = self.enc.forward(batch.recon_input)?;
        let (recon, cache_d) = self.dec.forward(&code_r)?;
        if recon.shape() != batch.recon_target.shape() {
            return Err(Error::Shape("reconstruction target shape differs from decoder output".into()));
        }
        let diff = recon.sub(batch.recon_target)?;
        let count = diff.as_slice().len() as f64;
        let recons = diff.as_slice().iter().map(|v| v * v).sum::<f64>() / count;
        let grad_recon = diff.scale(2.0 * w_rec / count);
        let (dec_g, grad_code_r) = self.dec.backward(&cache_d, &grad_recon)?;
        let (mut enc_g, _) = self.enc.backward(&cache_er, &grad_code_r)?;

        // transfer branch; with a zero weight it contributes nothing to Enc, Dec or Φ
        if w_mi == 0.0 {
            let terms = LossTerms { recons, mi: 0.0, total: w_rec * recons };
            let grads = LktGradients {
                enc: enc_g,
                dec: dec_g,
                phi: Matrix::zeros(self.phi.rows(), self.phi.cols()),
                mine: Gradients::zeros_like(&self.mine),
            };
            return Ok((terms, grads));
        }
        let (p, cache_en) = self.enc.forward(batch.x_nl)?;
        let att = cross_attention(&p, batch.keys, &self.phi)?;
        let eval = mine_eval(&self.mine, &p, &att.z, batch.pairing)?;
        let grad_p_direct = eval.grad_p.scale(-w_mi);
        let grad_z = eval.grad_q.scale(-w_mi);
        let (grad_p_att, phi_g) = cross_attention_backward(&p, batch.keys, &att, &grad_z)?;
        let grad_p = grad_p_direct.add(&grad_p_att)?;
        let (enc_g2, _) = self.enc.backward(&cache_en, &grad_p)?;
        enc_g.accumulate(&enc_g2);

        let total = w_rec * recons - w_mi * eval.value;
        Ok((
            LossTerms { recons, mi: eval.value, total },
            LktGradients { enc: enc_g, dec: dec_g, phi: phi_g, mine: eval.critic_grads },
        ))
    }
}

/// Optimizer state for one model.
struct Optimizers {
    enc: Adam,
    dec: Adam,
    phi: Adam,
    mine: Adam,
}

impl Optimizers {
    fn new(lr: f64) -> Self {
        Optimizers { enc: Adam::new(lr), dec: Adam::new(lr), phi: Adam::new(lr), mine: Adam::new(lr) }
    }

    fn step(&mut self, model: &mut LktModel, g: &LktGradients) -> Result<()> {
        model.enc.adam_step(&g.enc, &mut self.enc)?;
        model.dec.adam_step(&g.dec, &mut self.dec)?;
        self.phi.step(&mut [model.phi.as_mut_slice()], &[g.phi.as_slice()])?;
        model.mine.adam_step(&g.mine, &mut self.mine)
    }
}

/// Train one pair model. `h_t_ol` rows must align with `h_fed.overlap_ids`.
pub fn lkt_train(
    id: &str,
    h_t_ol: &FeatureMatrix,
    h_t_nl: &FeatureMatrix,
    h_fed: &FederatedRepresentation,
    cfg: &LktConfig,
    seed: u64,
) -> Result<LktModel> {
    cfg.validate()?;
    if h_t_ol.ids() != h_fed.overlap_ids.as_slice() {
        return Err(Error::Shape("task overlap rows are not aligned with the federated representation".into()));
    }
    let same_schema = h_t_ol.columns() == h_t_nl.columns();
    let source = cfg.recon_source.unwrap_or(if same_schema { ReconSource::Overlap } else { ReconSource::NonOverlap });
    if source == ReconSource::Overlap && !same_schema {
        return Err(Error::Config("overlap reconstruction needs identical ol and nl column schemas".into()));
    }
    let x_nl = h_t_nl.values();
    let x_ol = h_t_ol.values();
    let n = x_nl.rows();
    if n < 2 {
        return Err(Error::InvalidArgument("LKT needs at least 2 local samples".into()));
    }
    let fed = &h_fed.matrix;
    let mut model = LktModel::init(id, h_t_nl.columns().to_vec(), x_nl.cols(), fed.cols(), cfg, seed)?;
    model.key_scale = key_scale(fed, cfg.normalize_keys);
    let keys = model.keys_source(fed);

    let mut rng = seeded_rng(derive_seed(seed, 1));
    let mut opt = Optimizers::new(cfg.lr);
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut ol_order: Vec<usize> = (0..x_ol.rows()).collect();
    let mut ol_cursor = x_ol.rows();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 3];
        let mut batches = 0usize;
        // the tail batch is merged into the previous one so every batch has ≥ 2 rows
        let starts: Vec<usize> = (0..n).step_by(batch).filter(|s| n - s >= 2 || *s == 0).collect();
        for (k, &start) in starts.iter().enumerate() {
            let end = if k + 1 == starts.len() { n } else { starts[k + 1] };
            let idx = &order[start..end];
            let xb = x_nl.select_rows(idx);
            let rb = match source {
                ReconSource::NonOverlap => xb.clone(),
                ReconSource::Overlap => {
                    let want = idx.len().min(x_ol.rows());
                    if ol_cursor + want > ol_order.len() {
                        ol_order.shuffle(&mut rng);
                        ol_cursor = 0;
                    }
                    let r = x_ol.select_rows(&ol_order[ol_cursor..ol_cursor + want]);
                    ol_cursor += want;
                    r
                }
            };
            let pairing = derangement(idx.len(), &mut rng);
            let (terms, grads) = model.loss_and_gradients(&LossBatch {
                x_nl: &xb,
                recon_input: &rb,
                recon_target: &rb,
                keys: &keys,
                pairing: &pairing,
            })?;
            if !terms.total.is_finite() {
                return Err(Error::Divergence { seed, epoch });
            }
            opt.step(&mut model, &grads)?;
            sums[0] += terms.recons;
            sums[1] += terms.mi;
            sums[2] += terms.total;
            batches += 1;
        }
        let b = batches as f64;
        model.history.push(EpochStats { recons: sums[0] / b, mi: sums[1] / b, total: sums[2] / b });
    }
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SampleId;
    use crate::frl::FrlMethod;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn fixture(
        n_ol: usize,
        n_nl: usize,
        cols: usize,
        seed: u64,
    ) -> (FeatureMatrix, FeatureMatrix, FederatedRepresentation) {
        let mut rng = seeded_rng(seed);
        let mut gauss = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
        let names: Vec<String> = (0..cols).map(|j| format!("f{j}")).collect();
        let ids = |p: &str, n: usize| (0..n).map(|i| SampleId(format!("{p}{i}"))).collect::<Vec<_>>();
        let ol = FeatureMatrix::new(ids("o", n_ol), names.clone(), gauss(n_ol, cols)).unwrap();
        let nl = FeatureMatrix::new(ids("n", n_nl), names, gauss(n_nl, cols)).unwrap();
        let fed = FederatedRepresentation {
            matrix: gauss(n_ol, 4),
            method: FrlMethod::Fedsvd,
            overlap_ids: ol.ids().to_vec(),
        };
        (ol, nl, fed)
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let (ol, nl, fed) = fixture(10, 30, 5, 1);
        let cfg = LktConfig { epochs: 1, lr: 0.0, batch_size: 8, ..Default::default() };
        let trained = lkt_train("d1", &ol, &nl, &fed, &cfg, 7).unwrap();
        let fresh = LktModel::init("d1", nl.columns().to_vec(), 5, 4, &cfg, 7).unwrap();
        assert_eq!(trained.enc, fresh.enc);
        assert_eq!(trained.dec, fresh.dec);
        assert_eq!(trained.phi, fresh.phi);
        assert_eq!(trained.mine, fresh.mine);
        assert_eq!(trained.history.len(), 1);
    }

    #[test]
    fn latent_width_defaults_to_input_width() {
        let cfg = LktConfig::default();
        let m = LktModel::init("x", (0..7).map(|j| j.to_string()).collect(), 7, 3, &cfg, 0).unwrap();
        assert_eq!(m.d, 7);
        assert_eq!(m.phi.shape(), (3, 7));
        m.validate().unwrap();
    }

    #[test]
    fn misaligned_overlap_is_rejected() {
        let (ol, nl, mut fed) = fixture(6, 10, 3, 2);
        fed.overlap_ids.reverse();
        assert!(lkt_train("d", &ol, &nl, &fed, &LktConfig::default(), 0).is_err());
    }

    #[test]
    fn term_weights_follow_parameterization() {
        let mut cfg = LktConfig::default();
        assert_eq!(cfg.term_weights(), (1.0, 0.1));
        cfg.loss_weights = Some([1e-3, 1e-1]);
        assert_eq!(cfg.term_weights(), (1e-3, 1e-1));
        assert_eq!(cfg.without_mi().term_weights(), (1e-3, 0.0));
    }

    #[test]
    fn same_seed_same_model() {
        let (ol, nl, fed) = fixture(12, 40, 4, 3);
        let cfg = LktConfig { epochs: 2, batch_size: 16, ..Default::default() };
        let a = lkt_train("d", &ol, &nl, &fed, &cfg, 5).unwrap();
        let b = lkt_train("d", &ol, &nl, &fed, &cfg, 5).unwrap();
        assert_eq!(a, b);
    }
}
