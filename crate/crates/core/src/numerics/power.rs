use serde::{Deserialize, Serialize};

use super::matrix::{dot, norm2, Matrix};
use crate::error::{Error, Result};

/// Outcome of a power iteration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub eigvec: Vec<f64>,
    pub eigval: f64,
    /// Rayleigh quotient after each iteration.
    pub history: Vec<f64>,
    /// The operator mapped the iterate to zero.
    pub zero_operator: bool,
    /// The dominant eigenvalue appears to be repeated.
    pub non_unique: bool,
}

/// Dominant eigenpair of a symmetric positive semi-definite matrix.
pub fn power_iteration(a: &Matrix, iters: usize, init: &[f64]) -> Result<PowerResult> {
    if a.rows() != a.cols() {
        return Err(Error::Shape(format!("power iteration needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    if init.len() != a.rows() {
        return Err(Error::Shape(format!("init length {} vs matrix order {}", init.len(), a.rows())));
    }
    power_iteration_with(|x| a.matvec(x).expect("checked shape"), iters, init)
}

/// Power iteration against an implicit operator `x ↦ A·x`.
///
/// Each step normalizes `A·a` and records the Rayleigh quotient
/// `aᵀAa / aᵀa`. The returned eigenvalue is the final quotient.
pub fn power_iteration_with<F>(apply: F, iters: usize, init: &[f64]) -> Result<PowerResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n0 = norm2(init);
    if n0 == 0.0 || !n0.is_finite() {
        return Err(Error::InvalidArgument("power iteration init vector must be non-zero".into()));
    }
    let mut a: Vec<f64> = init.iter().map(|x| x / n0).collect();
    let mut history = Vec::with_capacity(iters);
    let mut eigval = dot(&a, &apply(&a));
    for _ in 0..iters {
        let next = apply(&a);
        let nrm = norm2(&next);
        if nrm == 0.0 {
            return Ok(PowerResult { eigvec: a, eigval: 0.0, history, zero_operator: true, non_unique: false });
        }
        a = next.into_iter().map(|x| x / nrm).collect();
        let aa = apply(&a);
        eigval = dot(&a, &aa) / dot(&a, &a);
        history.push(eigval);
    }
    if eigval == 0.0 {
        return Ok(PowerResult { eigvec: a, eigval, history, zero_operator: true, non_unique: false });
    }
    let non_unique = second_eigval(&apply, &a, eigval, iters.max(50)) >= eigval * (1.0 - 1e-6);
    Ok(PowerResult { eigvec: a, eigval, history, zero_operator: false, non_unique })
}

/// Dominant eigenvalue of the deflated operator `A − λ·vvᵀ`.
fn second_eigval<F>(apply: &F, v: &[f64], lambda: f64, iters: usize) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let deflated = |x: &[f64]| {
        let ax = apply(x);
        let proj = lambda * dot(v, x);
        ax.iter().zip(v).map(|(a, vi)| a - proj * vi).collect::<Vec<_>>()
    };
    // start orthogonal to v
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 0.618_033_988_7).collect();
    for _ in 0..2 {
        let p = dot(&x, v);
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi -= p * vi;
        }
    }
    let mut nrm = norm2(&x);
    if nrm < 1e-12 {
        return 0.0;
    }
    for xi in &mut x {
        *xi /= nrm;
    }
    let mut est = 0.0;
    for _ in 0..iters {
        let y = deflated(&x);
        nrm = norm2(&y);
        if nrm == 0.0 {
            return 0.0;
        }
        x = y.into_iter().map(|t| t / nrm).collect();
        est = dot(&x, &deflated(&x));
    }
    est
}
