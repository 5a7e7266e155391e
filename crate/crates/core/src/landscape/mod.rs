//! Regularized factorized objective
//!
//! ```text
//! f(U, V) = (2t/n) Σ_i (y_i − ⟨e_{t(i)} x_iᵀ, U Vᵀ⟩)² + ½ ‖UᵀU − VᵀV‖_F²
//! ```
//!
//! with `U ∈ ℝ^{t×r}` and `V ∈ ℝ^{d×r}`, its gradient, the incoherence
//! ball used to state where local minima are good, and the quasi-Newton
//! fit whose `V` column space estimates the shared features.

mod optim;

use alloc::vec::Vec;

pub use optim::{minimize, Differentiable, Method, MinimizeOptions, Minimum, Termination};

use crate::error::{Error, Result};
use crate::linalg::{self, axpy, dot, FeatureMatrix, Matrix};
use crate::model::{DataSet, DiversityStats, TaskSet};
use crate::rng::{standard_normal, RngCore};

/// Default `C₀` for constraint-set reporting.
pub const DEFAULT_C0: f64 = 10.0;

/// Factor iterate `(U, V)` with `M = U Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: Matrix,
    pub v: Matrix,
}

impl FactorPair {
    pub fn new(u: Matrix, v: Matrix) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::DimensionMismatch("U and V need the same number of columns"));
        }
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { u, v })
    }

    pub fn zeros(t: usize, d: usize, r: usize) -> Self {
        Self {
            u: Matrix::zeros(t, r),
            v: Matrix::zeros(d, r),
        }
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    /// `U Vᵀ`.
    pub fn product(&self) -> Matrix {
        self.u.matmul_t(&self.v).expect("shared column count")
    }

    /// `[vec(U); vec(V)]`, both row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.u.as_slice().len() + self.v.as_slice().len());
        x.extend_from_slice(self.u.as_slice());
        x.extend_from_slice(self.v.as_slice());
        x
    }

    pub fn from_flat(x: &[f64], t: usize, d: usize, r: usize) -> Result<Self> {
        if x.len() != (t + d) * r {
            return Err(Error::DimensionMismatch("flat parameter length"));
        }
        Self::new(
            Matrix::from_row_major(t, r, x[..t * r].to_vec())?,
            Matrix::from_row_major(d, r, x[t * r..].to_vec())?,
        )
    }

    /// `(UQ, VQ)`.
    pub fn rotated(&self, q: &Matrix) -> Result<Self> {
        Self::new(self.u.matmul(q)?, self.v.matmul(q)?)
    }
}

/// The objective bound to a data set; `t` is the number of rows of `U`.
#[derive(Debug, Clone, Copy)]
pub struct FactorObjective<'a> {
    data: &'a DataSet,
    t: usize,
    r: usize,
}

impl<'a> FactorObjective<'a> {
    pub fn new(data: &'a DataSet, t: usize, r: usize) -> Result<Self> {
        if r == 0 || t == 0 {
            return Err(Error::InvalidDims("need t >= 1 and r >= 1"));
        }
        if let Some(&bad) = data.task_index().iter().find(|&&j| j >= t) {
            return Err(Error::IndexOutOfRange { index: bad, count: t });
        }
        Ok(Self { data, t, r })
    }

    fn for_pair(data: &'a DataSet, pair: &FactorPair) -> Result<Self> {
        if pair.v.rows() != data.dim() {
            return Err(Error::DimensionMismatch("V rows must equal the covariate dimension"));
        }
        if pair.u.rows() < data.implied_task_count() {
            return Err(Error::DimensionMismatch("U has fewer rows than tasks in the data"));
        }
        Self::new(data, pair.u.rows(), pair.rank())
    }

    /// Evaluates `f`; when `grad` is given, also writes `[∂f/∂U; ∂f/∂V]`.
    fn evaluate(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let (t, r, d) = (self.t, self.r, self.data.dim());
        let (u, v) = x.split_at(t * r);
        let n = self.data.len();
        let scale = 2.0 * t as f64 / n as f64;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }

        let xs = self.data.covariates();
        let mut z = alloc::vec![0.0; r];
        let mut data_term = 0.0;
        for (i, (&y, &task)) in self
            .data
            .responses()
            .iter()
            .zip(self.data.task_index())
            .enumerate()
        {
            let xi = xs.row(i);
            z.fill(0.0);
            for (k, &xik) in xi.iter().enumerate() {
                axpy(xik, &v[k * r..(k + 1) * r], &mut z);
            }
            let uj = &u[task * r..(task + 1) * r];
            let resid = y - dot(uj, &z);
            data_term += resid * resid;
            if let Some(g) = grad.as_deref_mut() {
                let c = -2.0 * scale * resid;
                let (gu, gv) = g.split_at_mut(t * r);
                axpy(c, &z, &mut gu[task * r..(task + 1) * r]);
                for (k, &xik) in xi.iter().enumerate() {
                    axpy(c * xik, uj, &mut gv[k * r..(k + 1) * r]);
                }
            }
        }

        // D = UᵀU − VᵀV
        let mut diff = alloc::vec![0.0; r * r];
        for row in u.chunks_exact(r) {
            for p in 0..r {
                axpy(row[p], row, &mut diff[p * r..(p + 1) * r]);
            }
        }
        for row in v.chunks_exact(r) {
            for p in 0..r {
                axpy(-row[p], row, &mut diff[p * r..(p + 1) * r]);
            }
        }
        let reg = 0.5 * dot(&diff, &diff);
        if let Some(g) = grad {
            let (gu, gv) = g.split_at_mut(t * r);
            // ∂/∂U = 2 U D, ∂/∂V = −2 V D
            for (row, grow) in u.chunks_exact(r).zip(gu.chunks_exact_mut(r)) {
                for p in 0..r {
                    axpy(2.0 * row[p], &diff[p * r..(p + 1) * r], grow);
                }
            }
            for (row, grow) in v.chunks_exact(r).zip(gv.chunks_exact_mut(r)) {
                for p in 0..r {
                    axpy(-2.0 * row[p], &diff[p * r..(p + 1) * r], grow);
                }
            }
            debug_assert_eq!(gv.len(), d * r);
        }
        scale * data_term + reg
    }
}

impl Differentiable for FactorObjective<'_> {
    fn dim(&self) -> usize {
        (self.t + self.data.dim()) * self.r
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(x, Some(grad))
    }
}

pub fn objective_value(pair: &FactorPair, data: &DataSet) -> Result<f64> {
    let obj = FactorObjective::for_pair(data, pair)?;
    Ok(obj.evaluate(&pair.to_flat(), None))
}

/// `(∂f/∂U, ∂f/∂V)`.
pub fn objective_gradient(pair: &FactorPair, data: &DataSet) -> Result<(Matrix, Matrix)> {
    let obj = FactorObjective::for_pair(data, pair)?;
    let mut g = alloc::vec![0.0; obj.dim()];
    obj.evaluate(&pair.to_flat(), Some(&mut g));
    let split = FactorPair::from_flat(&g, pair.u.rows(), pair.v.rows(), pair.rank())?;
    Ok((split.u, split.v))
}

/// Balancing term `½ ‖UᵀU − VᵀV‖_F²` alone.
pub fn regularizer_value(pair: &FactorPair) -> Result<f64> {
    let diff = pair.u.t_matmul(&pair.u)?.sub(&pair.v.t_matmul(&pair.v)?)?;
    Ok(0.5 * diff.frobenius_norm_sq())
}

/// Gradient of the balancing term: `(2 U D, −2 V D)` with `D = UᵀU − VᵀV`.
pub fn regularizer_gradient(pair: &FactorPair) -> Result<(Matrix, Matrix)> {
    let diff = pair.u.t_matmul(&pair.u)?.sub(&pair.v.t_matmul(&pair.v)?)?;
    Ok((pair.u.matmul(&diff)?.scaled(2.0), pair.v.matmul(&diff)?.scaled(-2.0)))
}

/// Incoherence ball
/// `max_j ‖e_jᵀU‖² ≤ C₀ κ̄ r √(κν)/√t`, `‖U‖² ≤ C₀ √(tκν)`, `‖V‖² ≤ C₀ √(tκν)`
/// (spectral norms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    pub c0: f64,
    pub row_bound: f64,
    pub u_bound: f64,
    pub v_bound: f64,
}

pub fn constraint_set_from_tasks(stats: &DiversityStats, t: usize, r: usize, c0: f64) -> Result<ConstraintSet> {
    if !(stats.nu > 0.0) || !stats.kappa.is_finite() {
        return Err(Error::DegenerateTasks);
    }
    if !(c0 > 0.0) || t == 0 || r == 0 {
        return Err(Error::InvalidParameter("need c0 > 0, t >= 1, r >= 1"));
    }
    let kn = stats.kappa * stats.nu;
    let tf = t as f64;
    let scale_bound = c0 * libm::sqrt(tf * kn);
    Ok(ConstraintSet {
        c0,
        row_bound: c0 * stats.kappa_bar * r as f64 * libm::sqrt(kn) / libm::sqrt(tf),
        u_bound: scale_bound,
        v_bound: scale_bound,
    })
}

/// Measured quantities of a pair next to the bounds of a [`ConstraintSet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    pub holds: bool,
    pub max_row_norm_sq: f64,
    pub row_bound: f64,
    pub u_spectral_sq: f64,
    pub u_bound: f64,
    pub v_spectral_sq: f64,
    pub v_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    RowNorm,
    USpectral,
    VSpectral,
}

impl ConstraintReport {
    pub fn violated(&self) -> Vec<ConstraintKind> {
        let mut out = Vec::new();
        if self.max_row_norm_sq > self.row_bound {
            out.push(ConstraintKind::RowNorm);
        }
        if self.u_spectral_sq > self.u_bound {
            out.push(ConstraintKind::USpectral);
        }
        if self.v_spectral_sq > self.v_bound {
            out.push(ConstraintKind::VSpectral);
        }
        out
    }
}

/// Largest eigenvalue of `MᵀM`, i.e. `‖M‖₂²`.
fn spectral_norm_sq(m: &Matrix) -> f64 {
    let gram = m.t_matmul(m).expect("same matrix");
    let (vals, _) = linalg::symmetric_eigen(&gram);
    vals.last().copied().unwrap_or(0.0).max(0.0)
}

pub fn in_constraint_set(pair: &FactorPair, w: &ConstraintSet) -> ConstraintReport {
    let max_row_norm_sq = (0..pair.u.rows())
        .map(|j| dot(pair.u.row(j), pair.u.row(j)))
        .fold(0.0, f64::max);
    let u_spectral_sq = spectral_norm_sq(&pair.u);
    let v_spectral_sq = spectral_norm_sq(&pair.v);
    let mut report = ConstraintReport {
        holds: false,
        max_row_norm_sq,
        row_bound: w.row_bound,
        u_spectral_sq,
        u_bound: w.u_bound,
        v_spectral_sq,
        v_bound: w.v_bound,
    };
    report.holds = report.violated().is_empty();
    report
}

/// Balanced factors of `M* = A Bᵀ`: with `M* = X D Yᵀ`,
/// `U* = X D^{1/2}` and `V* = Y D^{1/2}`. Needs `t ≥ r`.
pub fn planted_factors(features: &FeatureMatrix, tasks: &TaskSet) -> Result<FactorPair> {
    if tasks.rank() != features.rank() {
        return Err(Error::DimensionMismatch("task rank differs from feature rank"));
    }
    if tasks.count() < tasks.rank() {
        return Err(Error::DegenerateTasks);
    }
    // A = Uₐ S Vₐᵀ  ⇒  A Bᵀ = Uₐ S (B Vₐ)ᵀ with B Vₐ orthonormal
    let linalg::Svd { u, s, v } = linalg::svd(tasks.matrix());
    let root: Vec<f64> = s.iter().map(|x| libm::sqrt(x.max(0.0))).collect();
    let root_diag = Matrix::diag(&root);
    let u_star = u.matmul(&root_diag)?;
    let v_star = features.basis().matmul(&v)?.matmul(&root_diag)?;
    FactorPair::new(u_star, v_star)
}

/// `A Bᵀ`.
pub fn planted_matrix(features: &FeatureMatrix, tasks: &TaskSet) -> Result<Matrix> {
    tasks.matrix().matmul_t(features.basis())
}

/// `σ_r(AᵀA)`: the `σ_r(UᵀU)` of the factorization `M* = A Bᵀ` whose right
/// factor is orthonormal.
pub fn planted_sigma_r(tasks: &TaskSet) -> f64 {
    let g = tasks.matrix().t_matmul(tasks.matrix()).expect("same matrix");
    let (vals, _) = linalg::symmetric_eigen(&g);
    vals[0].max(0.0)
}

/// Column space of `V`.
pub fn extract_features(pair: &FactorPair) -> Result<FeatureMatrix> {
    linalg::orthonormalize(&pair.v)
}

/// Both sides of `sin²θ(V̂, V) ≤ ε / σ_r(UᵀU)` with
/// `ε = ‖Û V̂ᵀ − M*‖_F²`, for a planted `M* = U Vᵀ` whose `V` spans
/// `planted_features`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleBound {
    pub lhs: f64,
    pub rhs: f64,
    pub epsilon: f64,
}

impl AngleBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + crate::model::INEQUALITY_SLACK * (1.0 + self.rhs)
    }
}

pub fn frob_to_angle_bound(
    pair: &FactorPair,
    planted_m: &Matrix,
    planted_features: &FeatureMatrix,
    sigma_r_utu: f64,
) -> Result<AngleBound> {
    if !(sigma_r_utu > 0.0) {
        return Err(Error::DegenerateTasks);
    }
    let epsilon = pair.product().sub(planted_m)?.frobenius_norm_sq();
    let v_hat = extract_features(pair)?;
    let sin = linalg::principal_sin_theta(&v_hat, planted_features)?;
    Ok(AngleBound {
        lhs: sin * sin,
        rhs: epsilon / sigma_r_utu,
        epsilon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    /// Stop once the gradient max-norm is at or below this.
    pub grad_tol: f64,
    /// Seed of the initialization stream.
    pub seed: u64,
    pub method: Method,
    /// Rows of `U`; defaults to `max task index + 1`.
    pub num_tasks: Option<usize>,
    /// Reported against the final pair when set.
    pub constraint: Option<ConstraintSet>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tol: 1e-8,
            seed: 0,
            method: Method::Lbfgs { memory: 10 },
            num_tasks: None,
            constraint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerReport {
    pub final_pair: FactorPair,
    pub final_objective: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub termination: Termination,
    pub constraint: Option<ConstraintReport>,
    /// Objective at the start and after each accepted iteration.
    pub history: Vec<f64>,
}

impl OptimizerReport {
    pub fn in_constraint_set(&self) -> Option<bool> {
        self.constraint.map(|c| c.holds)
    }
}

/// Initial pair with i.i.d. `N(0, s/√r)` entries, `s` the mean squared
/// response.
pub fn initial_pair<R: RngCore + ?Sized>(data: &DataSet, t: usize, r: usize, rng: &mut R) -> FactorPair {
    let n = data.len() as f64;
    let y_scale = libm::sqrt(data.responses().iter().map(|y| y * y).sum::<f64>() / n);
    let std = libm::sqrt(y_scale.max(1e-12) / libm::sqrt(r as f64));
    let d = data.dim();
    let u = Matrix::from_fn(t, r, |_, _| std * standard_normal(rng));
    let v = Matrix::from_fn(d, r, |_, _| std * standard_normal(rng));
    FactorPair { u, v }
}

/// Minimizes the factorized objective from a seeded random start.
pub fn optimize(data: &DataSet, r: usize, opts: &OptimizerOptions) -> Result<OptimizerReport> {
    let t = opts.num_tasks.unwrap_or_else(|| data.implied_task_count());
    let objective = FactorObjective::new(data, t, r)?;
    let mut rng = crate::rng::stream(opts.seed, crate::rng::Stream::OptimizerInit as u64);
    let x0 = initial_pair(data, t, r, &mut rng).to_flat();
    let min = minimize(
        &objective,
        x0,
        &MinimizeOptions {
            method: opts.method,
            max_iters: opts.max_iters,
            grad_tol: opts.grad_tol,
        },
    );
    let final_pair = FactorPair::from_flat(&min.x, t, data.dim(), r)?;
    let constraint = opts.constraint.map(|w| in_constraint_set(&final_pair, &w));
    Ok(OptimizerReport {
        final_pair,
        final_objective: min.value,
        iterations: min.iterations,
        grad_norm: min.grad_max_norm,
        converged: min.termination == Termination::GradientTolerance,
        termination: min.termination,
        constraint,
        history: min.history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(x: f64, y: f64) -> DataSet {
        DataSet::single_task(Matrix::from_rows(&[&[x]]).unwrap(), alloc::vec![y], 0).unwrap()
    }

    fn scalar_pair(u: f64, v: f64) -> FactorPair {
        FactorPair::new(Matrix::diag(&[u]), Matrix::diag(&[v])).unwrap()
    }

    #[test]
    fn zero_pair_objective_is_scaled_response_energy() {
        let data = DataSet::new(
            Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0], &[1.0, 1.0]]).unwrap(),
            alloc::vec![1.0, -2.0, 0.5],
            alloc::vec![0, 1, 1],
        )
        .unwrap();
        let f = objective_value(&FactorPair::zeros(2, 2, 1), &data).unwrap();
        let expect = 2.0 * 2.0 / 3.0 * (1.0 + 4.0 + 0.25);
        assert!((f - expect).abs() < 1e-14);
        let (gu, gv) = objective_gradient(&FactorPair::zeros(2, 2, 1), &data).unwrap();
        assert_eq!(gu.max_abs(), 0.0);
        assert_eq!(gv.max_abs(), 0.0);
    }

    #[test]
    fn regularizer_only_values() {
        let p = scalar_pair(2.0, 1.0);
        assert_eq!(regularizer_value(&p).unwrap(), 4.5);
        let (gu, gv) = regularizer_gradient(&p).unwrap();
        assert_eq!(gu[(0, 0)], 12.0);
        assert_eq!(gv[(0, 0)], -6.0);
    }

    #[test]
    fn hand_evaluated_objective() {
        let f = objective_value(&scalar_pair(1.0, 0.0), &one(1.0, 1.0)).unwrap();
        assert_eq!(f, 2.5);
    }

    #[test]
    fn dimension_checks() {
        let data = one(1.0, 1.0);
        let bad_v = FactorPair::new(Matrix::zeros(1, 1), Matrix::zeros(2, 1)).unwrap();
        assert!(objective_value(&bad_v, &data).is_err());
        let data2 = DataSet::new(Matrix::identity(2), alloc::vec![1.0, 1.0], alloc::vec![0, 3]).unwrap();
        assert!(objective_value(&FactorPair::zeros(2, 2, 1), &data2).is_err());
        assert!(FactorPair::new(Matrix::zeros(2, 1), Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn constraint_set_scales_linearly_in_c0() {
        let stats = DiversityStats {
            nu: 0.2,
            kappa_bar: 1.5,
            kappa: 3.0,
            trace_norm: 1.5,
        };
        let w1 = constraint_set_from_tasks(&stats, 10, 5, 1.0).unwrap();
        let w2 = constraint_set_from_tasks(&stats, 10, 5, 2.0).unwrap();
        assert!((w2.row_bound - 2.0 * w1.row_bound).abs() < 1e-14);
        assert!((w2.u_bound - 2.0 * w1.u_bound).abs() < 1e-14);
        assert!((w2.v_bound - 2.0 * w1.v_bound).abs() < 1e-14);
        let degenerate = DiversityStats { nu: 0.0, ..stats };
        assert_eq!(
            constraint_set_from_tasks(&degenerate, 10, 5, 1.0),
            Err(Error::DegenerateTasks)
        );
    }

    #[test]
    fn zero_pair_inside_and_scaled_pair_outside() {
        let w = ConstraintSet {
            c0: 1.0,
            row_bound: 1.0,
            u_bound: 2.0,
            v_bound: 2.0,
        };
        assert!(in_constraint_set(&FactorPair::zeros(3, 4, 2), &w).holds);
        // ‖U‖² = 4 = 2·u_bound, rows have norm² 4/... spread over 4 rows
        let u = Matrix::from_fn(4, 1, |_, _| 1.0);
        let pair = FactorPair::new(u, Matrix::zeros(3, 1)).unwrap();
        let rep = in_constraint_set(&pair, &w);
        assert!(!rep.holds);
        assert!((rep.u_spectral_sq - 4.0).abs() < 1e-12);
        assert_eq!(rep.violated(), alloc::vec![ConstraintKind::USpectral]);
    }

    #[test]
    fn extract_features_column_space() {
        let b = FeatureMatrix::standard(4, 2).unwrap();
        let r = Matrix::from_rows(&[&[2.0, 1.0], &[-1.0, 3.0]]).unwrap();
        let pair = FactorPair::new(Matrix::zeros(3, 2), b.basis().matmul(&r).unwrap()).unwrap();
        let f = extract_features(&pair).unwrap();
        assert!(linalg::principal_sin_theta(&f, &b).unwrap() < 1e-14);
        let degenerate = FactorPair::zeros(3, 4, 2);
        assert!(matches!(extract_features(&degenerate), Err(Error::RankDeficient { .. })));
    }
}
