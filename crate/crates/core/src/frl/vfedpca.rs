//! Vertical federated PCA: local power iteration, eigenvalue-weighted
//! aggregation on the server, and reconstruction at the task party.
//!
//! Each party iterates on its sample-space Gram matrix
//! `A_k = (1/|X_k|)·H_k·H_kᵀ` so every share lives in `R^{|I|}` and the
//! shares of different parties can be summed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm2, power_iteration_with, Matrix};

/// Dominant eigenpair uploaded by one party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenShare {
    pub eigvec: Vec<f64>,
    pub eigval: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalEigen {
    pub share: EigenShare,
    /// The party's data matrix is all zeros.
    pub zero_data: bool,
    pub non_unique: bool,
}

pub fn vfedpca_local(h_k: &Matrix, iters: usize, init: &[f64]) -> Result<LocalEigen> {
    if h_k.cols() == 0 {
        return Err(Error::InvalidArgument("party has no features".into()));
    }
    if init.len() != h_k.rows() {
        return Err(Error::Shape(format!("init has length {}, expected {}", init.len(), h_k.rows())));
    }
    let scale = 1.0 / h_k.cols() as f64;
    let apply = |x: &[f64]| {
        let ht_x = h_k.t_matvec(x).expect("row count checked");
        h_k.matvec(&ht_x).expect("column count checked").into_iter().map(|v| v * scale).collect()
    };
    let r = power_iteration_with(apply, iters, init)?;
    Ok(LocalEigen {
        share: EigenShare { eigvec: r.eigvec, eigval: r.eigval.max(0.0) },
        zero_data: r.zero_operator,
        non_unique: r.non_unique,
    })
}

/// Flip shares so each has a non-negative inner product with the first.
pub fn align_share_signs(shares: &mut [EigenShare]) {
    let Some(first) = shares.first().map(|s| s.eigvec.clone()) else {
        return;
    };
    for s in shares.iter_mut().skip(1) {
        if dot(&s.eigvec, &first) < 0.0 {
            for v in &mut s.eigvec {
                *v = -*v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub u: Vec<f64>,
    pub weights: Vec<f64>,
    /// The weighted sum cancelled to (numerically) zero.
    pub degenerate: bool,
}

/// `u = Σ w_k a_k`, `w_k = δ_k / Σ δ_j`. No re-normalization.
pub fn vfedpca_aggregate(shares: &[EigenShare]) -> Result<Aggregate> {
    let first = shares.first().ok_or_else(|| Error::InvalidArgument("no shares to aggregate".into()))?;
    let n = first.eigvec.len();
    if shares.iter().any(|s| s.eigvec.len() != n) {
        return Err(Error::Shape("shares have different lengths".into()));
    }
    if shares.iter().any(|s| s.eigval < 0.0 || !s.eigval.is_finite()) {
        return Err(Error::InvalidArgument("eigenvalues must be finite and non-negative".into()));
    }
    let total: f64 = shares.iter().map(|s| s.eigval).sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all shared eigenvalues are zero".into()));
    }
    let weights: Vec<f64> = shares.iter().map(|s| s.eigval / total).collect();
    let mut u = vec![0.0; n];
    for (s, w) in shares.iter().zip(&weights) {
        for (ui, ai) in u.iter_mut().zip(&s.eigvec) {
            *ui += w * ai;
        }
    }
    let degenerate = norm2(&u) < 1e-12;
    Ok(Aggregate { u, weights, degenerate })
}

/// `H_fed = H_t · MMᵀ / ‖MMᵀ‖_F` with `M = H_tᵀ·u`.
pub fn vfedpca_reconstruct(h_t_ol: &Matrix, u: &[f64]) -> Result<Matrix> {
    if u.len() != h_t_ol.rows() {
        return Err(Error::Shape(format!("u has length {}, H_t has {} rows", u.len(), h_t_ol.rows())));
    }
    let m = h_t_ol.t_matvec(u)?;
    let mm = Matrix::from_fn(m.len(), m.len(), |i, j| m[i] * m[j]);
    let norm = mm.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate("federated eigenvector is orthogonal to the task data".into()));
    }
    Ok(h_t_ol.matmul(&mm)?.scale(1.0 / norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_hand_case() {
        let h = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let l = vfedpca_local(&h, 20, &[0.6, 0.8]).unwrap();
        assert!((l.share.eigval - 0.5).abs() < 1e-15);
        assert!((l.share.eigvec[0].abs() - 1.0).abs() < 1e-15);
        assert!(!l.zero_data);
    }

    #[test]
    fn zero_data_flagged() {
        let l = vfedpca_local(&Matrix::zeros(3, 2), 5, &[1.0, 0.0, 0.0]).unwrap();
        assert!(l.zero_data);
        assert_eq!(l.share.eigval, 0.0);
    }

    #[test]
    fn aggregate_hand_case() {
        let agg = vfedpca_aggregate(&[
            EigenShare { eigvec: vec![1.0, 0.0], eigval: 2.0 },
            EigenShare { eigvec: vec![0.0, 1.0], eigval: 3.0 },
        ])
        .unwrap();
        assert_eq!(agg.weights, vec![0.4, 0.6]);
        assert_eq!(agg.u, vec![0.4, 0.6]);
    }

    #[test]
    fn aggregate_single_and_cancelling() {
        let one = vfedpca_aggregate(&[EigenShare { eigvec: vec![0.6, 0.8], eigval: 4.0 }]).unwrap();
        assert_eq!(one.u, vec![0.6, 0.8]);
        let cancel = vfedpca_aggregate(&[
            EigenShare { eigvec: vec![1.0, 0.0], eigval: 1.0 },
            EigenShare { eigvec: vec![-1.0, 0.0], eigval: 1.0 },
        ])
        .unwrap();
        assert_eq!(cancel.u, vec![0.0, 0.0]);
        assert!(cancel.degenerate);
        assert!(vfedpca_aggregate(&[EigenShare { eigvec: vec![1.0], eigval: 0.0 }]).is_err());
    }

    #[test]
    fn sign_alignment() {
        let mut s = vec![
            EigenShare { eigvec: vec![1.0, 0.0], eigval: 1.0 },
            EigenShare { eigvec: vec![-1.0, 0.1], eigval: 1.0 },
        ];
        align_share_signs(&mut s);
        assert_eq!(s[1].eigvec, vec![1.0, -0.1]);
    }

    #[test]
    fn reconstruct_shapes_and_zero_u() {
        let h = Matrix::from_fn(30, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let u: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        assert_eq!(vfedpca_reconstruct(&h, &u).unwrap().shape(), (30, 5));
        assert!(matches!(vfedpca_reconstruct(&h, &[0.0; 30]), Err(Error::Degenerate(_))));
        assert!(vfedpca_reconstruct(&h, &[1.0; 3]).is_err());
    }
}
