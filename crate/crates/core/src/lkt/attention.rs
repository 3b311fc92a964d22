use crate::error::{Error, Result};
use crate::numerics::{softmax_rows, Matrix};

/// Intermediate values of one cross-attention pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// `batch × d`
    pub z: Matrix,
    /// Attention weights, `batch × |I_ol|`. Rows are probability vectors.
    pub weights: Matrix,
    /// Keys and values `H_fed·Φ`, `|I_ol| × d`.
    pub keys: Matrix,
}

/// `Z = softmax(Q·(H·Φ)ᵀ / √d)·(H·Φ)`.
pub fn cross_attention(query: &Matrix, h_fed: &Matrix, phi: &Matrix) -> Result<AttentionOutput> {
    if h_fed.cols() != phi.rows() || query.cols() != phi.cols() {
        return Err(Error::Shape(format!(
            "attention chain: query {}x{}, H_fed {}x{}, Φ {}x{}",
            query.rows(),
            query.cols(),
            h_fed.rows(),
            h_fed.cols(),
            phi.rows(),
            phi.cols()
        )));
    }
    // keys are handled transposed (d × |I_ol|) so inner loops run over samples
    let keys_t = phi.t_matmul(&h_fed.transpose())?;
    let scale = 1.0 / (phi.cols() as f64).sqrt();
    let mut scores = query.matmul(&keys_t)?;
    scores.scale_in_place(scale);
    let weights = softmax_rows(&scores);
    let z = weights.matmul_t(&keys_t)?;
    Ok(AttentionOutput { z, weights, keys: keys_t.transpose() })
}

/// Gradients of a scalar loss with respect to the query and `Φ`, given
/// `grad_z = ∂L/∂Z`.
pub fn cross_attention_backward(
    query: &Matrix,
    h_fed: &Matrix,
    out: &AttentionOutput,
    grad_z: &Matrix,
) -> Result<(Matrix, Matrix)> {
    let d = out.keys.cols();
    let scale = 1.0 / (d as f64).sqrt();
    let keys_t = out.keys.transpose();
    // through Z = A·K
    let grad_a = grad_z.matmul(&keys_t)?;
    let mut grad_k_t = grad_z.t_matmul(&out.weights)?;
    // through the row softmax
    let mut grad_s = Matrix::zeros(grad_a.rows(), grad_a.cols());
    for i in 0..grad_a.rows() {
        let a = out.weights.row(i);
        let ga = grad_a.row(i);
        let inner: f64 = a.iter().zip(ga).map(|(x, y)| x * y).sum();
        for (gs, (&ai, &gai)) in grad_s.row_mut(i).iter_mut().zip(a.iter().zip(ga)) {
            *gs = ai * (gai - inner) * scale;
        }
    }
    // through S = Q·Kᵀ
    let grad_q = grad_s.matmul_t(&keys_t)?;
    grad_k_t.add_assign(&query.t_matmul(&grad_s)?)?;
    let grad_phi = h_fed.transpose().matmul_t(&grad_k_t)?;
    Ok((grad_q, grad_phi))
}
