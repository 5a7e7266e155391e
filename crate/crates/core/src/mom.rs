//! Method-of-moments feature estimator: the top-`r` eigenspace of
//! `(1/n) Σ y_i² x_i x_iᵀ`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, FeatureMatrix, Matrix};
use crate::model::{DataSet, EmpiricalTaskMatrix};

/// Eigenvalues closer than this are reported as a missing spectral gap.
pub const SPECTRAL_GAP_TOL: f64 = 1e-12;

/// Symmetric PSD `d × d` moment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    matrix: Matrix,
}

impl MomentMatrix {
    /// Wraps a symmetric matrix (e.g. an exact population moment).
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::DimensionMismatch("moment matrix must be square"));
        }
        let max_skew = matrix.max_skew();
        if max_skew > linalg::SYMMETRY_TOL * matrix.max_abs().max(1.0) {
            return Err(Error::NotSymmetric { max_skew });
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

/// `(1/n) Σ y_i² x_i x_iᵀ`, accumulated on the upper triangle in sample order
/// and mirrored, so the result is exactly symmetric.
pub fn empirical_second_moment(data: &DataSet) -> MomentMatrix {
    let d = data.dim();
    let x = data.covariates();
    let mut m = Matrix::zeros(d, d);
    for (i, &y) in data.responses().iter().enumerate() {
        let w = y * y;
        if w == 0.0 {
            continue;
        }
        let xi = x.row(i);
        for a in 0..d {
            let wa = w * xi[a];
            let row = &mut m.row_mut(a)[a..];
            for (mab, &xb) in row.iter_mut().zip(&xi[a..]) {
                *mab += wa * xb;
            }
        }
    }
    let inv_n = 1.0 / data.len() as f64;
    for a in 0..d {
        for b in a..d {
            let v = m[(a, b)] * inv_n;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    MomentMatrix { matrix: m }
}

/// Expected moment `2 BΛ̄Bᵀ + (1 + tr Λ̄) I_d` for unit-variance Gaussian
/// covariates and noise.
pub fn population_moment(features: &FeatureMatrix, lambda: &EmpiricalTaskMatrix) -> Result<MomentMatrix> {
    if lambda.rank() != features.rank() {
        return Err(Error::DimensionMismatch("task matrix rank differs from feature rank"));
    }
    let b = features.basis();
    let signal = b.matmul(&lambda.lambda_bar)?.matmul_t(b)?;
    let d = features.dim();
    let shift = 1.0 + lambda.lambda_bar.trace();
    let m = Matrix::from_fn(d, d, |i, j| {
        let s = signal[(i, j)] + signal[(j, i)];
        if i == j {
            s + shift
        } else {
            s
        }
    });
    Ok(MomentMatrix { matrix: m })
}

/// Output of the estimator with diagnostic eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct MomEstimate {
    pub features: FeatureMatrix,
    /// Top `r` eigenvalues of the moment matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Gap between the `r`-th and `(r+1)`-th eigenvalues (infinite if `r = d`).
    pub spectral_gap: f64,
    /// Set when the gap is below [`SPECTRAL_GAP_TOL`]; the subspace is then
    /// not identified and the returned basis is only the solver's choice.
    pub spectral_gap_warning: bool,
}

pub fn mom_estimate_from_moment(moment: &MomentMatrix, r: usize) -> Result<MomEstimate> {
    let d = moment.dim();
    if r == 0 || r > d {
        return Err(Error::InvalidDims("need 1 <= r <= d"));
    }
    let (vals, vecs) = linalg::symmetric_eigen_desc(moment.matrix())?;
    let spectral_gap = if r < d { vals[r - 1] - vals[r] } else { f64::INFINITY };
    let scale = libm::fabs(vals[0]).max(1.0);
    Ok(MomEstimate {
        features: FeatureMatrix::from_orthonormal_unchecked(vecs.leading_columns(r)),
        eigenvalues: vals[..r].to_vec(),
        spectral_gap,
        spectral_gap_warning: spectral_gap <= SPECTRAL_GAP_TOL * scale,
    })
}

pub fn mom_estimate_with_report(data: &DataSet, r: usize) -> Result<MomEstimate> {
    mom_estimate_from_moment(&empirical_second_moment(data), r)
}

/// Estimated feature subspace: top-`r` eigenvectors of the empirical moment.
pub fn mom_estimate(data: &DataSet, r: usize) -> Result<FeatureMatrix> {
    Ok(mom_estimate_with_report(data, r)?.features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::principal_sin_theta;
    use crate::model::{generate_data, sample_features, sample_tasks, Noise, Sampling};
    use crate::rng::stream;

    fn single(x: &[f64], y: f64) -> DataSet {
        DataSet::single_task(Matrix::from_rows(&[x]).unwrap(), vec![y], 0).unwrap()
    }

    #[test]
    fn one_sample_moment() {
        let m = empirical_second_moment(&single(&[1.0, 0.0], 2.0));
        assert_eq!(m.matrix(), &Matrix::diag(&[4.0, 0.0]));
    }

    #[test]
    fn zero_responses_give_zero_moment() {
        let data = DataSet::single_task(Matrix::identity(3), vec![0.0; 3], 0).unwrap();
        assert_eq!(empirical_second_moment(&data).matrix(), &Matrix::zeros(3, 3));
    }

    #[test]
    fn population_moment_examples() {
        let b = FeatureMatrix::standard(3, 1).unwrap();
        let lam = EmpiricalTaskMatrix::from_lambda(Matrix::diag(&[1.0])).unwrap();
        let m = population_moment(&b, &lam).unwrap();
        assert_eq!(m.matrix(), &Matrix::diag(&[4.0, 2.0, 2.0]));

        let zero = EmpiricalTaskMatrix::from_lambda(Matrix::zeros(1, 1)).unwrap();
        assert_eq!(population_moment(&b, &zero).unwrap().matrix(), &Matrix::identity(3));

        let wrong = EmpiricalTaskMatrix::from_lambda(Matrix::identity(2)).unwrap();
        assert!(population_moment(&b, &wrong).is_err());
    }

    #[test]
    fn exact_moment_recovers_features() {
        let b = FeatureMatrix::standard(3, 1).unwrap();
        let lam = EmpiricalTaskMatrix::from_lambda(Matrix::diag(&[1.0])).unwrap();
        let est = mom_estimate_from_moment(&population_moment(&b, &lam).unwrap(), 1).unwrap();
        assert_eq!(principal_sin_theta(&est.features, &b).unwrap(), 0.0);
        assert_eq!(est.eigenvalues, vec![4.0]);
        assert!(!est.spectral_gap_warning);
        assert!((est.spectral_gap - 2.0).abs() < 1e-14);
    }

    #[test]
    fn flat_spectrum_warns() {
        let m = MomentMatrix::new(Matrix::identity(4)).unwrap();
        let est = mom_estimate_from_moment(&m, 2).unwrap();
        assert!(est.spectral_gap_warning);
    }

    #[test]
    fn full_rank_estimate_spans_everything() {
        let mut rng = stream(2, 0);
        let f = sample_features(5, 2, &mut rng).unwrap();
        let t = sample_tasks(3, 2, &mut rng).unwrap();
        let data = generate_data(&f, &t, 10, Sampling::RoundRobin, Noise::Standard, &mut rng).unwrap();
        let est = mom_estimate(&data, 5).unwrap();
        let id = FeatureMatrix::standard(5, 5).unwrap();
        assert!(principal_sin_theta(&est, &id).unwrap() < 1e-12);
        assert!(mom_estimate(&data, 6).is_err());
        assert!(mom_estimate(&data, 0).is_err());
    }

    #[test]
    fn moment_rejects_asymmetric() {
        let m = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(MomentMatrix::new(m), Err(Error::NotSymmetric { .. })));
    }
}
