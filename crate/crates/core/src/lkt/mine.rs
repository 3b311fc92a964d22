//! Donsker-Varadhan mutual information lower bound with a neural critic.
//!
//! `MI(P;Q) ≥ mean_i T(p_i, q_i) − log mean_i exp T(p_i, q_σ(i))` where the
//! marginal pairs use a derangement `σ` of the batch rows.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{log_mean_exp, seeded_rng, Activation, Adam, DenseNet, Gradients, Matrix};

/// Critic network `T: R^{2d} → R` (two relu hidden layers).
pub fn new_critic<R: Rng + ?Sized>(d: usize, hidden: usize, rng: &mut R) -> Result<DenseNet> {
    DenseNet::new(&[2 * d, hidden, hidden, 1], &[Activation::Relu, Activation::Relu, Activation::Linear], rng)
}

/// A derangement drawn as a cyclic shift by one inside a random ordering:
/// `σ(order[k]) = order[k + 1 mod n]`. No index maps to itself for `n ≥ 2`.
pub fn derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut sigma = vec![0; n];
    for k in 0..n {
        sigma[order[k]] = order[(k + 1) % n];
    }
    sigma
}

/// Critic outputs and gradients for one evaluation of the bound.
#[derive(Debug, Clone)]
pub struct MineEval {
    pub value: f64,
    /// Gradient of `−value` with respect to the critic parameters.
    pub critic_grads: Gradients,
    /// `∂value/∂p`.
    pub grad_p: Matrix,
    /// `∂value/∂q`.
    pub grad_q: Matrix,
}

fn check_inputs(critic: &DenseNet, p: &Matrix, q: &Matrix) -> Result<()> {
    if p.rows() < 2 {
        return Err(Error::InvalidArgument("mutual information estimate needs at least 2 samples".into()));
    }
    if p.shape() != q.shape() {
        return Err(Error::Shape(format!("p is {}x{}, q is {}x{}", p.rows(), p.cols(), q.rows(), q.cols())));
    }
    if critic.input_width() != p.cols() + q.cols() {
        return Err(Error::Shape(format!("critic takes {} inputs, got {}", critic.input_width(), p.cols() + q.cols())));
    }
    Ok(())
}

/// Bound value for an explicit marginal pairing.
pub fn mine_estimate_with_pairing(critic: &DenseNet, p: &Matrix, q: &Matrix, pairing: &[usize]) -> Result<f64> {
    check_inputs(critic, p, q)?;
    if pairing.len() != p.rows() {
        return Err(Error::Shape("pairing length differs from batch size".into()));
    }
    let joint = critic.predict(&Matrix::hstack(&[p, q])?)?;
    let marg = critic.predict(&Matrix::hstack(&[p, &q.select_rows(pairing)])?)?;
    let n = p.rows() as f64;
    Ok(joint.sum() / n - log_mean_exp(marg.as_slice()))
}

/// Bound value with a derangement drawn from `rng`.
pub fn mine_estimate<R: Rng + ?Sized>(critic: &DenseNet, p: &Matrix, q: &Matrix, rng: &mut R) -> Result<f64> {
    check_inputs(critic, p, q)?;
    let sigma = derangement(p.rows(), rng);
    mine_estimate_with_pairing(critic, p, q, &sigma)
}

/// Value plus all gradients needed by the alternating updates.
pub fn mine_eval(critic: &DenseNet, p: &Matrix, q: &Matrix, pairing: &[usize]) -> Result<MineEval> {
    check_inputs(critic, p, q)?;
    let b = p.rows();
    let d_p = p.cols();
    let q_marg = q.select_rows(pairing);
    let (joint, cache_j) = critic.forward(&Matrix::hstack(&[p, q])?)?;
    let (marg, cache_m) = critic.forward(&Matrix::hstack(&[p, &q_marg])?)?;
    let value = joint.sum() / b as f64 - log_mean_exp(marg.as_slice());

    // ∂value/∂T_joint = 1/b, ∂value/∂T_marg = softmax(T_marg)
    let max = marg.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = marg.as_slice().iter().map(|t| (t - max).exp()).collect();
    let total: f64 = ex.iter().sum();
    let up_joint = Matrix::from_vec(b, 1, vec![1.0 / b as f64; b])?;
    let up_marg = Matrix::from_vec(b, 1, ex.iter().map(|e| e / total).collect())?;

    let (mut g_joint, in_joint) = critic.backward(&cache_j, &up_joint)?;
    let (g_marg, in_marg) = critic.backward(&cache_m, &up_marg)?;
    // value gradient is joint − marg; the critic ascends value, so descend −value
    g_joint.scale(-1.0);
    g_joint.accumulate(&g_marg);

    let mut grad_p = in_joint.col_range(0, d_p);
    grad_p.add_assign(&in_marg.col_range(0, d_p).scale(-1.0))?;
    let mut grad_q = in_joint.col_range(d_p, in_joint.cols());
    let gq_marg = in_marg.col_range(d_p, in_marg.cols());
    for (i, &src) in pairing.iter().enumerate() {
        for (dst, g) in grad_q.row_mut(src).iter_mut().zip(gq_marg.row(i)) {
            *dst -= g;
        }
    }
    Ok(MineEval { value, critic_grads: g_joint, grad_p, grad_q })
}

/// Fit a critic on `(p, q)` by minibatch ascent of the bound.
pub fn train_critic(
    critic: &mut DenseNet,
    p: &Matrix,
    q: &Matrix,
    steps: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    check_inputs(critic, p, q)?;
    let n = p.rows();
    let batch = batch_size.clamp(2, n);
    let mut rng = seeded_rng(seed);
    let mut opt = Adam::new(lr);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut history = Vec::with_capacity(steps);
    for _ in 0..steps {
        if cursor + batch > n {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + batch];
        cursor += batch;
        let pb = p.select_rows(idx);
        let qb = q.select_rows(idx);
        let sigma = derangement(batch, &mut rng);
        let eval = mine_eval(critic, &pb, &qb, &sigma)?;
        if !eval.value.is_finite() {
            return Err(Error::Divergence { seed, epoch: history.len() });
        }
        history.push(eval.value);
        critic.adam_step(&eval.critic_grads, &mut opt)?;
    }
    Ok(history)
}
