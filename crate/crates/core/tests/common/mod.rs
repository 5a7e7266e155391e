#![allow(dead_code)]

use sharedrep_core::linalg::FeatureMatrix;
use sharedrep_core::rng::{self, standard_normal};
use sharedrep_core::Matrix;

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn from_dense(d: &Dense) -> Matrix {
    let rows: Vec<&[f64]> = d.iter().map(|r| r.as_slice()).collect();
    Matrix::from_rows(&rows).unwrap()
}

pub fn mat_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            for j in 0..m {
                c[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    c
}

pub fn transpose(a: &Dense) -> Dense {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Cyclic Jacobi rotations on a symmetric matrix: (eigenvalues, eigenvector
/// columns), unsorted.
pub fn jacobi_eigen(s: &Dense) -> (Vec<f64>, Dense) {
    let n = s.len();
    let mut a = s.clone();
    let mut v: Dense = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Pseudoinverse of a symmetric PSD matrix from its Jacobi spectrum.
pub fn psd_pinv(s: &Dense) -> Dense {
    let (vals, vecs) = jacobi_eigen(s);
    let n = s.len();
    let top = vals.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let cut = 1e-10 * top;
    let mut out = vec![vec![0.0; n]; n];
    for (k, &lam) in vals.iter().enumerate() {
        if lam > cut {
            for i in 0..n {
                for j in 0..n {
                    out[i][j] += vecs[i][k] * vecs[j][k] / lam;
                }
            }
        }
    }
    out
}

/// `(XᵀX)† Xᵀy`.
pub fn normal_equations_pinv(x: &Dense, y: &[f64]) -> Vec<f64> {
    let xt = transpose(x);
    let gram = mat_mul(&xt, x);
    let xty: Vec<f64> = xt.iter().map(|r| r.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
    psd_pinv(&gram)
        .iter()
        .map(|r| r.iter().zip(&xty).map(|(a, b)| a * b).sum())
        .collect()
}

/// `sin²θ = 1 − σ_min(aᵀb)²`.
pub fn sin_sq_via_cosines(a: &FeatureMatrix, b: &FeatureMatrix) -> f64 {
    let c = mat_mul(&transpose(&to_dense(a.basis())), &to_dense(b.basis()));
    let (vals, _) = jacobi_eigen(&mat_mul(&transpose(&c), &c));
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    (1.0 - min).max(0.0)
}

pub fn random_subspace(d: usize, r: usize, seed: u64) -> FeatureMatrix {
    sharedrep_core::model::sample_features(d, r, &mut rng::stream(seed, 99)).unwrap()
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut g = rng::stream(seed, 98);
    Matrix::from_fn(rows, cols, |_, _| standard_normal(&mut g))
}

/// Random orthogonal `r × r` matrix.
pub fn random_orthogonal(r: usize, seed: u64) -> Matrix {
    random_subspace(r, r, seed).into_matrix()
}

/// Central differences of `f` at `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let up = f(&xp);
            xp[i] = orig - h;
            let down = f(&xp);
            xp[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
