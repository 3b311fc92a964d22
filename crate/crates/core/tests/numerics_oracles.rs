//! Kernels checked against independent oracles (nalgebra eigensolvers,
//! finite differences, extended-precision sums).

use fedtransfer::numerics::{
    determinant, power_iteration, random_orthogonal, seeded_rng, softmax_rows, svd, Activation, DenseNet, Matrix,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = seeded_rng(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
fn sym_eigen(m: &Matrix) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(to_na(m));
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(e.eigenvectors.nrows(), idx.len(), |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

#[test]
fn svd_matches_gram_eigendecomposition() {
    let m = gaussian(50, 8, 17);
    let s = svd(&m).unwrap();
    // oracle: eigenvalues of MᵀM are σ², eigenvectors are V up to sign
    let (vals, vecs) = sym_eigen(&m.t_matmul(&m).unwrap());
    for (k, sigma) in s.sigma.iter().enumerate() {
        assert!((sigma * sigma - vals[k]).abs() < 1e-9 * vals[0], "σ_{k}");
        let dotp: f64 = (0..8).map(|r| s.v[(r, k)] * vecs[(r, k)]).sum();
        assert!((dotp.abs() - 1.0).abs() < 1e-8, "v column {k}");
    }
    assert!(s.reconstruct().sub(&m).unwrap().frobenius_norm() < 1e-8);
    assert!(s.u.orthogonality_residual() < 1e-10);
    assert!(s.v.orthogonality_residual() < 1e-10);
    assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn svd_sign_canonical_form() {
    let s = svd(&gaussian(12, 5, 3)).unwrap();
    for j in 0..5 {
        let col = s.u.column(j);
        let pivot = col.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
        assert!(pivot > 0.0);
    }
}

#[test]
fn svd_invariant_under_orthogonal_masks() {
    for seed in 0..5 {
        let m = gaussian(20, 6, 100 + seed);
        let mut rng = seeded_rng(seed);
        let a = random_orthogonal(20, &mut rng).unwrap();
        let b = random_orthogonal(6, &mut rng).unwrap();
        let masked = a.matmul(&m).unwrap().matmul(&b).unwrap();
        let s1 = svd(&m).unwrap().sigma;
        let s2 = svd(&masked).unwrap().sigma;
        for (x, y) in s1.iter().zip(&s2) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}

#[test]
fn random_orthogonal_det_is_unit() {
    for seed in 0..10 {
        let q = random_orthogonal(9, &mut seeded_rng(seed)).unwrap();
        let d = determinant(&q).unwrap();
        assert!((d.abs() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn power_iteration_matches_dominant_eigenpair() {
    let g = gaussian(10, 10, 5);
    let spsd = g.t_matmul(&g).unwrap();
    let (vals, vecs) = sym_eigen(&spsd);
    let init: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
    let r = power_iteration(&spsd, 2000, &init).unwrap();
    assert!((r.eigval - vals[0]).abs() < 1e-6 * vals[0]);
    let cos: f64 = (0..10).map(|i| r.eigvec[i] * vecs[(i, 0)]).sum();
    assert!((1.0 - cos.abs()) < 1e-6);
    // Rayleigh quotients never decrease for SPSD input
    assert!(r.history.windows(2).all(|w| w[1] >= w[0] - 1e-12 * vals[0]));
}

#[test]
fn softmax_matches_extended_precision() {
    let s = softmax_rows(&Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap());
    // e^{x_i - 3}/Σ from correctly rounded constants
    let e_m2 = 0.135_335_283_236_612_7_f64;
    let e_m1 = 0.367_879_441_171_442_33_f64;
    let denom = e_m2 + e_m1 + 1.0;
    let expected = [e_m2 / denom, e_m1 / denom, 1.0 / denom];
    for (a, b) in s.row(0).iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!((s.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

fn mse_loss(net: &DenseNet, x: &Matrix, t: &Matrix) -> f64 {
    let y = net.predict(x).unwrap();
    0.5 * y.sub(t).unwrap().as_slice().iter().map(|v| v * v).sum::<f64>()
}

#[test]
fn dense_backprop_matches_finite_differences() {
    let acts = [
        vec![Activation::Sigmoid, Activation::Relu, Activation::Linear],
        vec![Activation::Relu, Activation::Sigmoid, Activation::Sigmoid],
    ];
    for (case, act) in acts.iter().enumerate() {
        let mut rng = seeded_rng(40 + case as u64);
        let net = DenseNet::new(&[4, 5, 3, 2], act, &mut rng).unwrap();
        let x = gaussian(6, 4, 7 + case as u64);
        let t = gaussian(6, 2, 9 + case as u64);
        let (y, cache) = net.forward(&x).unwrap();
        let (g, gx) = net.backward(&cache, &y.sub(&t).unwrap()).unwrap();
        let h = 1e-5;
        for l in 0..net.layers.len() {
            for idx in 0..net.layers[l].weight.as_slice().len() {
                let mut p = net.clone();
                p.layers[l].weight.as_mut_slice()[idx] += h;
                let mut m = net.clone();
                m.layers[l].weight.as_mut_slice()[idx] -= h;
                let fd = (mse_loss(&p, &x, &t) - mse_loss(&m, &x, &t)) / (2.0 * h);
                let an = g.weights[l].as_slice()[idx];
                assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3), "w[{l}][{idx}] {fd} vs {an}");
            }
            for idx in 0..net.layers[l].bias.len() {
                let mut p = net.clone();
                p.layers[l].bias[idx] += h;
                let mut m = net.clone();
                m.layers[l].bias[idx] -= h;
                let fd = (mse_loss(&p, &x, &t) - mse_loss(&m, &x, &t)) / (2.0 * h);
                let an = g.biases[l][idx];
                assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3));
            }
        }
        // input gradient
        for idx in 0..x.as_slice().len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[idx] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[idx] -= h;
            let fd = (mse_loss(&net, &xp, &t) - mse_loss(&net, &xm, &t)) / (2.0 * h);
            let an = gx.as_slice()[idx];
            assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1e-3));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn svd_reconstructs_arbitrary_shapes(rows in 1usize..12, cols in 1usize..12, seed in 0u64..1000) {
        let m = gaussian(rows, cols, seed);
        let s = svd(&m).unwrap();
        prop_assert_eq!(s.rank(), rows.min(cols));
        prop_assert!(s.reconstruct().sub(&m).unwrap().frobenius_norm() < 1e-8);
        prop_assert!(s.u.orthogonality_residual() < 1e-10);
        prop_assert!(s.v.orthogonality_residual() < 1e-10);
    }

    #[test]
    fn softmax_rows_are_distributions(vals in proptest::collection::vec(-500.0f64..500.0, 1..20), shift in -100.0f64..100.0) {
        let m = Matrix::from_rows(std::slice::from_ref(&vals)).unwrap();
        let s = softmax_rows(&m);
        prop_assert!(s.as_slice().iter().all(|v| *v >= 0.0));
        prop_assert!((s.sum() - 1.0).abs() < 1e-12);
        let shifted = softmax_rows(&m.map(|v| v + shift));
        for (a, b) in s.as_slice().iter().zip(shifted.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
