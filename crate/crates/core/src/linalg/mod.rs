//! Dense linear-algebra kernels: orthonormalization, symmetric top-r
//! eigenpairs, principal angles and minimum-norm least squares.

mod decomp;
mod matrix;

use alloc::vec::Vec;

pub use decomp::{householder_qr, svd, symmetric_eigen, Svd};
pub use matrix::{axpy, dot, norm, Matrix};

use crate::error::{Error, Result};

/// Max-abs deviation of `QᵀQ` from the identity accepted for a basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Max-abs skew accepted as "symmetric" (relative to `max(1, max|s_ij|)`).
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Full column rank requires `σ_min > RANK_TOL · σ_max`.
pub const RANK_TOL: f64 = 1e-12;

/// A `d × r` matrix with orthonormal columns, standing for the subspace it
/// spans.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    basis: Matrix,
}

impl FeatureMatrix {
    /// Wraps `basis`, checking `basisᵀ·basis = I` within [`ORTHONORMAL_TOL`].
    pub fn new(basis: Matrix) -> Result<Self> {
        if basis.cols() > basis.rows() {
            return Err(Error::InvalidDims("rank exceeds ambient dimension"));
        }
        let gram = basis.t_matmul(&basis)?;
        let max_dev = gram.max_abs_diff(&Matrix::identity(basis.cols()));
        if !(max_dev <= ORTHONORMAL_TOL) {
            return Err(Error::NotOrthonormal { max_dev });
        }
        Ok(Self { basis })
    }

    /// First `r` standard basis vectors of `ℝᵈ`.
    pub fn standard(d: usize, r: usize) -> Result<Self> {
        if r == 0 || r > d {
            return Err(Error::InvalidDims("need 1 <= r <= d"));
        }
        Ok(Self {
            basis: Matrix::eye(d, r),
        })
    }

    pub(crate) fn from_orthonormal_unchecked(basis: Matrix) -> Self {
        Self { basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn into_matrix(self) -> Matrix {
        self.basis
    }

    /// Orthogonal projection `basis · basisᵀ · v`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let coords = self.basis.t_mul_vec(v)?;
        self.basis.mul_vec(&coords)
    }
}

/// Orthonormal basis for the column space of `m` (thin QR, `R` with
/// positive diagonal).
pub fn orthonormalize(m: &Matrix) -> Result<FeatureMatrix> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    if m.cols() > m.rows() {
        return Err(Error::RankDeficient {
            smallest: 0.0,
            largest: svd(m).s[0],
        });
    }
    let (q, r) = householder_qr(m);
    let s = svd(&r).s;
    let largest = s[0];
    let smallest = s[s.len() - 1];
    if !(largest > 0.0 && smallest > RANK_TOL * largest) {
        return Err(Error::RankDeficient { smallest, largest });
    }
    Ok(FeatureMatrix::from_orthonormal_unchecked(q))
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
///
/// Each eigenvector is signed so that its first coordinate with magnitude
/// above `1e-12` is positive, which makes the output reproducible.
pub fn symmetric_eigen_desc(s: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if s.rows() != s.cols() {
        return Err(Error::DimensionMismatch("matrix must be square"));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite);
    }
    let max_skew = s.max_skew();
    if max_skew > SYMMETRY_TOL * s.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { max_skew });
    }
    let n = s.rows();
    let sym = Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let (vals, vecs) = symmetric_eigen(&sym);
    let mut out_vals = Vec::with_capacity(n);
    let mut out_vecs = Matrix::zeros(n, n);
    for (col, src) in (0..n).rev().enumerate() {
        out_vals.push(vals[src]);
        let sign = (0..n)
            .map(|i| vecs[(i, src)])
            .find(|v| libm::fabs(*v) > 1e-12)
            .map_or(1.0, |v| if v < 0.0 { -1.0 } else { 1.0 });
        for i in 0..n {
            out_vecs[(i, col)] = sign * vecs[(i, src)];
        }
    }
    Ok((out_vals, out_vecs))
}

/// Top-`r` eigenvectors (as a [`FeatureMatrix`]) and eigenvalues of a
/// symmetric matrix, eigenvalues descending.
pub fn top_r_eigs(s: &Matrix, r: usize) -> Result<(FeatureMatrix, Vec<f64>)> {
    if r == 0 || r > s.rows() {
        return Err(Error::DimensionMismatch("need 1 <= r <= dimension"));
    }
    let (mut vals, vecs) = symmetric_eigen_desc(s)?;
    vals.truncate(r);
    Ok((
        FeatureMatrix::from_orthonormal_unchecked(vecs.leading_columns(r)),
        vals,
    ))
}

/// Sine of the largest principal angle between two subspaces of equal
/// dimension.
///
/// Evaluated as `σ_max(b − a·aᵀb)`, which equals `sqrt(1 − σ_min(aᵀb)²)`
/// but keeps full relative accuracy for nearly aligned subspaces.
pub fn principal_sin_theta(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch("subspaces live in different ambient dimensions"));
    }
    if a.rank() != b.rank() {
        return Err(Error::DimensionMismatch("subspaces have different ranks"));
    }
    let overlap = a.basis().t_matmul(b.basis())?;
    let residual = b.basis().sub(&a.basis().matmul(&overlap)?)?;
    let gram = residual.t_matmul(&residual)?;
    let (vals, _) = symmetric_eigen(&gram);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    Ok(libm::sqrt(top).min(1.0))
}

/// Minimum-norm minimizer of `‖response − design·w‖²` (pseudoinverse
/// solution).
///
/// Singular values at or below `max(n, k) · ε · σ_max` are treated as zero.
pub fn least_squares(design: &Matrix, response: &[f64]) -> Result<Vec<f64>> {
    if design.rows() != response.len() {
        return Err(Error::DimensionMismatch("response length must equal design rows"));
    }
    if design.rows() == 0 || design.cols() == 0 {
        return Ok(alloc::vec![0.0; design.cols()]);
    }
    let Svd { u, s, v } = svd(design);
    let cutoff = design.rows().max(design.cols()) as f64 * f64::EPSILON * s[0];
    let proj = u.t_mul_vec(response)?;
    let mut w = alloc::vec![0.0; design.cols()];
    for (j, (&sigma, &p)) in s.iter().zip(&proj).enumerate() {
        if sigma > cutoff && sigma > 0.0 {
            let coef = p / sigma;
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += coef * v[(i, j)];
            }
        }
    }
    Ok(w)
}
