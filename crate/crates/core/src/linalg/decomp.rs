//! Dense factorizations: Householder QR, symmetric tridiagonal QL
//! eigensolver and one-sided Jacobi SVD.

use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{dot, Matrix};

/// Thin Householder QR of a `m × n` matrix with `m ≥ n`.
///
/// Returns `(Q, R)` with `Q` of shape `m × n` (orthonormal columns) and `R`
/// upper triangular `n × n` with a non-negative diagonal.
pub fn householder_qr(a: &Matrix) -> (Matrix, Matrix) {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n, "householder_qr requires rows >= cols");
    let mut work = a.clone();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);

    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| work[(i, k)]).collect();
        let x_norm = libm::sqrt(dot(&v, &v));
        if x_norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if v[0] > 0.0 { -x_norm } else { x_norm };
        v[0] -= alpha;
        let v_norm = libm::sqrt(dot(&v, &v));
        if v_norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= v_norm;
        }
        apply_reflector(&mut work, &v, k, k);
        reflectors.push(Some(v));
    }

    let mut r = Matrix::from_fn(n, n, |i, j| if j >= i { work[(i, j)] } else { 0.0 });
    let mut q = Matrix::eye(m, n);
    for (k, v) in reflectors.iter().enumerate().rev() {
        if let Some(v) = v {
            apply_reflector(&mut q, v, k, 0);
        }
    }
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for c in j..n {
                r[(j, c)] = -r[(j, c)];
            }
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    (q, r)
}

/// Applies `I - 2vvᵀ` to rows `row0..` and columns `col0..` of `a`.
fn apply_reflector(a: &mut Matrix, v: &[f64], row0: usize, col0: usize) {
    let cols = a.cols();
    let mut w = vec![0.0; cols - col0];
    for (off, &vi) in v.iter().enumerate() {
        let row = &a.row(row0 + off)[col0..];
        for (wj, &aij) in w.iter_mut().zip(row) {
            *wj += vi * aij;
        }
    }
    for (off, &vi) in v.iter().enumerate() {
        let row = &mut a.row_mut(row0 + off)[col0..];
        for (aij, &wj) in row.iter_mut().zip(&w) {
            *aij -= 2.0 * vi * wj;
        }
    }
}

/// Full eigendecomposition of a symmetric matrix (only the lower triangle is
/// read after symmetrization by the caller).
///
/// Householder tridiagonalization followed by implicit QL iterations.
/// Returns eigenvalues in ascending order and the eigenvectors as columns.
pub fn symmetric_eigen(s: &Matrix) -> (Vec<f64>, Matrix) {
    let n = s.rows();
    assert_eq!(n, s.cols(), "symmetric_eigen requires a square matrix");
    let mut v = s.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e);
    (d, v)
}

fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += libm::fabs(*dk);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tridiagonal_ql(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(libm::fabs(d[l]) + libm::fabs(e[l]));
        let mut m = l;
        while m < n - 1 && libm::fabs(e[m]) > eps * tst1 {
            m += 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let vk1 = v[(k, i + 1)];
                        let vk = v[(k, i)];
                        v[(k, i + 1)] = s * vk + c * vk1;
                        v[(k, i)] = c * vk - s * vk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if libm::fabs(e[l]) <= eps * tst1 || iter > 100 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // selection sort into ascending order, moving eigenvector columns along
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in 0..n {
                let tmp = v[(row, i)];
                v[(row, i)] = v[(row, k)];
                v[(row, k)] = tmp;
            }
        }
    }
}

/// Thin singular value decomposition `a = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m × k` left singular vectors; columns belonging to zero singular
    /// values are zero.
    pub u: Matrix,
    /// `k = min(m, n)` singular values, descending.
    pub s: Vec<f64>,
    /// `n × k` right singular vectors.
    pub v: Matrix,
}

pub fn svd(a: &Matrix) -> Svd {
    if a.rows() >= a.cols() {
        let (q, r) = householder_qr(a);
        let (ur, s, v) = jacobi_svd(&r);
        let u = q.matmul(&ur).expect("QR factor shapes agree");
        Svd { u, s, v }
    } else {
        let Svd { u, s, v } = svd(&a.transpose());
        Svd { u: v, s, v: u }
    }
}

/// One-sided (Hestenes) Jacobi SVD of a matrix with `rows ≥ cols`.
fn jacobi_svd(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let n = a.cols();
    let m = a.rows();
    // columns of a and of V stored as contiguous rows
    let mut w = a.transpose();
    let mut vt = Matrix::identity(n);
    let tol = f64::EPSILON;

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(w.row(p), w.row(p));
                let beta = dot(w.row(q), w.row(q));
                let gamma = dot(w.row(p), w.row(q));
                if gamma == 0.0 || libm::fabs(gamma) <= tol * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::hypot(1.0, zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|j| (libm::sqrt(dot(w.row(j), w.row(j))), j))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut u = Matrix::zeros(m, n);
    let mut v = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (col, &(sigma, j)) in order.iter().enumerate() {
        s.push(sigma);
        if sigma > 0.0 {
            for i in 0..m {
                u[(i, col)] = w[(j, i)] / sigma;
            }
        }
        for i in 0..n {
            v[(i, col)] = vt[(j, i)];
        }
    }
    (u, s, v)
}

fn rotate_rows(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = a.cols();
    let data = a.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(m: usize, n: usize, seed: u64) -> Matrix {
        let mut state = seed;
        Matrix::from_fn(m, n, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn qr_reconstructs() {
        let a = sample(7, 4, 1);
        let (q, r) = householder_qr(&a);
        assert!(q.matmul(&r).unwrap().max_abs_diff(&a) < 1e-13);
        assert!(q.t_matmul(&q).unwrap().max_abs_diff(&Matrix::identity(4)) < 1e-13);
        for i in 0..4 {
            assert!(r[(i, i)] >= 0.0);
        }
    }

    #[test]
    fn qr_of_zero_column() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]]).unwrap();
        let (q, r) = householder_qr(&a);
        assert!(q.matmul(&r).unwrap().max_abs_diff(&a) < 1e-15);
        assert_eq!(r[(1, 1)], 0.0);
    }

    #[test]
    fn eigen_reconstructs() {
        let b = sample(9, 9, 3);
        let s = b.add(&b.transpose()).unwrap();
        let (vals, vecs) = symmetric_eigen(&s);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let rebuilt = vecs.matmul(&Matrix::diag(&vals)).unwrap().matmul_t(&vecs).unwrap();
        assert!(rebuilt.max_abs_diff(&s) < 1e-12);
        assert!(vecs.t_matmul(&vecs).unwrap().max_abs_diff(&Matrix::identity(9)) < 1e-12);
    }

    #[test]
    fn eigen_of_one_by_one_and_diagonal() {
        let (vals, vecs) = symmetric_eigen(&Matrix::diag(&[5.0]));
        assert_eq!(vals, vec![5.0]);
        assert_eq!(vecs[(0, 0)], 1.0);
        let (vals, _) = symmetric_eigen(&Matrix::diag(&[1.0, 3.0, 2.0]));
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn svd_reconstructs_tall_and_wide() {
        for (m, n) in [(8, 3), (3, 8), (5, 5)] {
            let a = sample(m, n, (m * 10 + n) as u64);
            let Svd { u, s, v } = svd(&a);
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
            let rebuilt = u.matmul(&Matrix::diag(&s)).unwrap().matmul_t(&v).unwrap();
            assert!(rebuilt.max_abs_diff(&a) < 1e-13, "{m}x{n}");
        }
    }

    #[test]
    fn svd_rank_deficient() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]).unwrap();
        let Svd { s, .. } = svd(&a);
        assert!((s[0] - libm::sqrt(70.0)).abs() < 1e-12);
        assert!(s[1] < 1e-14);
    }
}
