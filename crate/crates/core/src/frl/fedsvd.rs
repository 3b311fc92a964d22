//! Federated SVD by orthogonal masking.
//!
//! A key generator draws an orthogonal `A` (sample side) and an orthogonal
//! `B` (feature side, split by rows into one slice per party). Each party
//! uploads `A·H_k·B_k`; the server decomposes the concatenation and returns
//! only the left factor, which the task party unmasks with `Aᵀ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{random_orthogonal, random_orthogonal_blocked, seeded_rng, svd, Matrix};

/// Masks handed to one party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPair {
    /// `|I| × |I|`, shared by every party.
    pub a: Matrix,
    /// `|X_k| × |X_fed|`, this party's row slice of `B`.
    pub b_k: Matrix,
}

/// Generate one [`MaskPair`] per party. With `block_size` set, `A` is
/// block-diagonal with Haar blocks of that size.
pub fn fedsvd_keygen(
    overlap_size: usize,
    feature_sizes: &[usize],
    seed: u64,
    block_size: Option<usize>,
) -> Result<Vec<MaskPair>> {
    if overlap_size == 0 {
        return Err(Error::EmptyOverlap);
    }
    if feature_sizes.is_empty() || feature_sizes.contains(&0) {
        return Err(Error::InvalidArgument("every party needs at least one feature".into()));
    }
    let mut rng = seeded_rng(seed);
    let a = match block_size {
        Some(bs) => random_orthogonal_blocked(overlap_size, bs, &mut rng)?,
        None => random_orthogonal(overlap_size, &mut rng)?,
    };
    let x_fed: usize = feature_sizes.iter().sum();
    let b = random_orthogonal(x_fed, &mut rng)?;
    let mut offset = 0;
    let mut out = Vec::with_capacity(feature_sizes.len());
    for &size in feature_sizes {
        out.push(MaskPair { a: a.clone(), b_k: b.row_range(offset, offset + size) });
        offset += size;
    }
    Ok(out)
}

/// `Ĥ_k = A·H_k·B_k`.
pub fn fedsvd_mask(h_k: &Matrix, masks: &MaskPair) -> Result<Matrix> {
    if masks.a.cols() != h_k.rows() || h_k.cols() != masks.b_k.rows() {
        return Err(Error::Shape(format!(
            "mask chain A {}x{} · H {}x{} · B_k {}x{}",
            masks.a.rows(),
            masks.a.cols(),
            h_k.rows(),
            h_k.cols(),
            masks.b_k.rows(),
            masks.b_k.cols()
        )));
    }
    masks.a.matmul(h_k)?.matmul(&masks.b_k)
}

/// Server step: SVD of `[Ĥ_1 | … | Ĥ_n]`, returning the leading
/// `min(|I|, |X_fed|)` left singular vectors. `Σ` and `V̂` stay on the server.
pub fn fedsvd_server(masked_parts: &[Matrix]) -> Result<Matrix> {
    let first = masked_parts.first().ok_or_else(|| Error::InvalidArgument("no masked parts".into()))?;
    let x_fed = first.cols();
    if masked_parts.iter().any(|p| p.cols() != x_fed) {
        return Err(Error::Shape("masked parts disagree on the federated width".into()));
    }
    let refs: Vec<&Matrix> = masked_parts.iter().collect();
    let joined = Matrix::hstack(&refs)?;
    let s = svd(&joined)?;
    let r = joined.rows().min(x_fed);
    Ok(s.u.col_range(0, r))
}

/// Task-party step: `U = Aᵀ·Û`.
pub fn fedsvd_recover(u_hat: &Matrix, a: &Matrix) -> Result<Matrix> {
    if a.rows() != u_hat.rows() {
        return Err(Error::Shape(format!("A has {} rows, Û has {}", a.rows(), u_hat.rows())));
    }
    a.t_matmul(u_hat)
}
