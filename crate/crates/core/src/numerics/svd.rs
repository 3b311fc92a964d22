//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 60;

/// `m = u · diag(sigma) · vᵀ` with `r = min(rows, cols)` retained columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.sigma.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul_t(&self.v).expect("consistent svd factors")
    }

    /// Keep only the leading `r` components.
    pub fn truncate(&self, r: usize) -> SvdResult {
        let r = r.min(self.rank());
        SvdResult { u: self.u.col_range(0, r), sigma: self.sigma[..r].to_vec(), v: self.v.col_range(0, r) }
    }
}

/// Singular value decomposition of any finite matrix.
///
/// Singular values come back in descending order, and each column of `u` is
/// sign-canonicalized so that its largest-magnitude entry is positive (the
/// matching column of `v` is flipped with it).
pub fn svd(m: &Matrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument("svd input has non-finite entries".into()));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::Shape(format!("svd of empty {}x{} matrix", m.rows(), m.cols())));
    }
    let mut out = if m.rows() >= m.cols() {
        svd_tall(m)?
    } else {
        let t = svd_tall(&m.transpose())?;
        SvdResult { u: t.v, sigma: t.sigma, v: t.u }
    };
    canonicalize_signs(&mut out);
    Ok(out)
}

fn svd_tall(m: &Matrix) -> Result<SvdResult> {
    let (rows, n) = m.shape();
    // column-major working copies
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let tol = f64::EPSILON * (rows as f64).max(1.0);
    let mut converged = n == 1;
    let mut off_norm = 0.0;
    for _sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        let mut off2 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                off2 += gamma * gamma;
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        off_norm = off2.sqrt();
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { sweeps: MAX_SWEEPS, off_norm });
    }

    let mut sigma: Vec<f64> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let sigma_max = sigma[order[0]];
    let cutoff = sigma_max * f64::EPSILON * (rows.max(n) as f64);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if sigma[j] > cutoff && sigma[j] > 0.0 {
            u_cols.push(w[j].iter().map(|x| x / sigma[j]).collect());
        } else {
            u_cols.push(vec![0.0; rows]);
            deficient.push(k);
        }
    }
    complete_orthonormal(&mut u_cols, &deficient);

    let sorted_sigma: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    sigma = sorted_sigma;
    let mut u = Matrix::zeros(rows, n);
    let mut vm = Matrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        u.set_column(k, &u_cols[k]);
        vm.set_column(k, &v[j]);
    }
    Ok(SvdResult { u, sigma, v: vm })
}

#[inline]
fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Fill the columns listed in `missing` with unit vectors orthogonal to all
/// other columns (Gram-Schmidt over the standard basis, two passes).
fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let dim = cols[0].len();
    let mut candidate = 0usize;
    for &k in missing {
        loop {
            assert!(candidate < dim, "cannot complete orthonormal basis");
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (j, c) in cols.iter().enumerate() {
                    if j == k || c.iter().all(|x| *x == 0.0) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    for (ei, ci) in e.iter_mut().zip(c) {
                        *ei -= proj * ci;
                    }
                }
            }
            let nrm = dot(&e, &e).sqrt();
            if nrm > 1e-6 {
                cols[k] = e.iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}

fn canonicalize_signs(s: &mut SvdResult) {
    for j in 0..s.u.cols() {
        let col = s.u.column(j);
        let pivot = col.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            for i in 0..s.u.rows() {
                s.u[(i, j)] = -s.u[(i, j)];
            }
            for i in 0..s.v.rows() {
                s.v[(i, j)] = -s.v[(i, j)];
            }
        }
    }
}
