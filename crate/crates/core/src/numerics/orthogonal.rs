use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Householder QR of a square matrix. Returns `(q, r_diagonal)`.
pub fn householder_qr(a: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!("qr expects square input, got {}x{}", n, a.cols())));
    }
    // work on transposes so every column is a contiguous row
    let mut rt = a.transpose();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<f64> = rt.row(k)[k..].to_vec();
        let alpha = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if alpha == 0.0 {
            reflectors.push(vec![0.0; n - k]);
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= vnorm;
        }
        for j in k..n {
            reflect(&mut rt.row_mut(j)[k..], &v);
        }
        reflectors.push(v);
    }
    let r_diag: Vec<f64> = (0..n).map(|i| rt[(i, i)]).collect();

    // q = H_0 H_1 ... H_{n-1} applied to the identity, right to left
    let mut qt = Matrix::identity(n);
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.iter().all(|x| *x == 0.0) {
            continue;
        }
        for j in 0..n {
            reflect(&mut qt.row_mut(j)[k..], v);
        }
    }
    let q = qt.transpose();
    Ok((q, r_diag))
}

/// `x ← x − 2 v (v·x)` for a unit reflector `v`.
fn reflect(x: &mut [f64], v: &[f64]) {
    let proj: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    if proj == 0.0 {
        return;
    }
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= 2.0 * vi * proj;
    }
}

/// Haar-distributed random orthogonal `n×n` matrix.
///
/// QR of a standard-normal matrix, with the columns of `q` multiplied by the
/// signs of `r`'s diagonal so the distribution is exactly Haar.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("random_orthogonal needs n >= 1".into()));
    }
    let g = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (mut q, r_diag) = householder_qr(&g)?;
    for (j, d) in r_diag.iter().enumerate() {
        if *d < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Block-diagonal orthogonal matrix built from independent Haar blocks of at
/// most `block_size` rows. Cost is linear in `n` for a fixed block size.
pub fn random_orthogonal_blocked<R: Rng + ?Sized>(n: usize, block_size: usize, rng: &mut R) -> Result<Matrix> {
    if block_size == 0 {
        return Err(Error::InvalidArgument("block_size must be positive".into()));
    }
    if block_size >= n {
        return random_orthogonal(n, rng);
    }
    let mut out = Matrix::zeros(n, n);
    let mut start = 0;
    while start < n {
        let size = block_size.min(n - start);
        let block = random_orthogonal(size, rng)?;
        for i in 0..size {
            for j in 0..size {
                out[(start + i, start + j)] = block[(i, j)];
            }
        }
        start += size;
    }
    Ok(out)
}

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &Matrix) -> Result<f64> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!("determinant of non-square {}x{}", n, a.cols())));
    }
    let mut lu = a.clone();
    let mut det = 1.0;
    for k in 0..n {
        let pivot = (k..n).max_by(|&x, &y| lu[(x, k)].abs().total_cmp(&lu[(y, k)].abs())).expect("non-empty range");
        if pivot != k {
            det = -det;
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(pivot, j)];
                lu[(pivot, j)] = t;
            }
        }
        let p = lu[(k, k)];
        if p == 0.0 {
            return Ok(0.0);
        }
        det *= p;
        for i in (k + 1)..n {
            let f = lu[(i, k)] / p;
            for j in k..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
        }
    }
    Ok(det)
}
