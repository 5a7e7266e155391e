mod common;

use common::*;
use sharedrep_core::linalg::{self, least_squares, principal_sin_theta, top_r_eigs};
use sharedrep_core::Matrix;

fn random_symmetric(n: usize, seed: u64) -> Matrix {
    let g = gaussian(n, n, seed);
    g.add(&g.transpose()).unwrap().scaled(0.5)
}

#[test]
fn top_r_eigs_agree_with_jacobi() {
    for seed in 0..40 {
        let n = 3 + (seed as usize % 9);
        let r = 1 + (seed as usize % n);
        let s = random_symmetric(n, seed);
        let (vecs, vals) = top_r_eigs(&s, r).unwrap();
        let (mut ref_vals, ref_vecs) = jacobi_eigen(&to_dense(&s));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| ref_vals[b].total_cmp(&ref_vals[a]));
        ref_vals = order.iter().map(|&k| ref_vals[k]).collect();
        for k in 0..r {
            assert!((vals[k] - ref_vals[k]).abs() <= 1e-8, "seed {seed} value {k}");
            // compare eigenvectors up to sign
            let col = vecs.basis().column(k);
            let refc: Vec<f64> = (0..n).map(|i| ref_vecs[i][order[k]]).collect();
            let dotp: f64 = col.iter().zip(&refc).map(|(a, b)| a * b).sum();
            let sign = dotp.signum();
            let diff = col.iter().zip(&refc).map(|(a, b)| (a - sign * b).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-8, "seed {seed} vector {k}: {diff}");
        }
    }
}

#[test]
fn eigen_sign_convention() {
    for seed in 0..10 {
        let s = random_symmetric(6, 100 + seed);
        let (_, vecs) = linalg::symmetric_eigen_desc(&s).unwrap();
        for k in 0..6 {
            let first = vecs.column(k).into_iter().find(|v| v.abs() > 1e-12).unwrap();
            assert!(first > 0.0);
        }
    }
}

#[test]
fn sin_theta_matches_cosine_route() {
    for seed in 0..60 {
        let d = 4 + seed as usize % 10;
        let r = 1 + seed as usize % (d / 2);
        let a = random_subspace(d, r, 2 * seed);
        let b = random_subspace(d, r, 2 * seed + 1);
        let s = principal_sin_theta(&a, &b).unwrap();
        assert!((s * s - sin_sq_via_cosines(&a, &b)).abs() <= 1e-10, "seed {seed}");
    }
}

#[test]
fn least_squares_matches_normal_equations() {
    for seed in 0..50 {
        let n = 5 + seed as usize % 30;
        let k = 1 + seed as usize % 12;
        let x = gaussian(n, k, seed);
        let y: Vec<f64> = gaussian(n, 1, seed + 1000).into_vec();
        let got = least_squares(&x, &y).unwrap();
        let want = normal_equations_pinv(&to_dense(&x), &y);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "seed {seed} n={n} k={k}: {err}");
    }
}

#[test]
fn least_squares_rank_deficient_is_minimum_norm() {
    for seed in 0..20 {
        // duplicated and zero columns
        let base = gaussian(15, 3, seed);
        let x = Matrix::from_fn(15, 6, |i, j| match j {
            0..=2 => base[(i, j)],
            3 => base[(i, 0)],
            4 => 0.0,
            _ => base[(i, 1)] - base[(i, 2)],
        });
        let y = gaussian(15, 1, seed + 50).into_vec();
        let got = least_squares(&x, &y).unwrap();
        let want = normal_equations_pinv(&to_dense(&x), &y);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "seed {seed}: {err}");
        assert_eq!(got[4], 0.0);
    }
}

#[test]
fn svd_reconstructs_and_is_sorted() {
    for seed in 0..20 {
        let (m, n) = (2 + seed as usize % 7, 2 + (seed as usize * 3) % 7);
        let a = gaussian(m, n, seed);
        let linalg::Svd { u, s, v } = linalg::svd(&a);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let rebuilt = u.matmul(&Matrix::diag(&s)).unwrap().matmul_t(&v).unwrap();
        assert!(rebuilt.max_abs_diff(&a) <= 1e-12 * (1.0 + s[0]));
    }
}
