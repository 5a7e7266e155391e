//! Synthetic multi-task regression instances and task-diversity statistics.
//!
//! Covariates and noise are standard Gaussian, task coefficients are
//! `N(0, I_r / r)` and the feature subspace is Haar distributed.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, FeatureMatrix, Matrix};
use crate::rng::{standard_normal, uniform_index, RngCore};

/// Task coefficient vectors `α_j` stored as the rows of a `t × r` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    matrix: Matrix,
}

impl TaskSet {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { matrix })
    }

    pub fn count(&self) -> usize {
        self.matrix.rows()
    }

    pub fn rank(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn alpha(&self, j: usize) -> &[f64] {
        self.matrix.row(j)
    }

    /// `AᵀA / t`.
    pub fn gram(&self) -> Matrix {
        self.matrix
            .t_matmul(&self.matrix)
            .expect("same matrix")
            .scaled(1.0 / self.count() as f64)
    }
}

/// Diversity of a task set, from the eigenvalues of `AᵀA / t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityStats {
    /// `σ_r(AᵀA/t)`; zero when the tasks do not span `r` dimensions.
    pub nu: f64,
    /// `tr(AᵀA/t) / (r ν)`.
    pub kappa_bar: f64,
    /// `σ_1(AᵀA/t) / ν`.
    pub kappa: f64,
    /// `tr(AᵀA/t)`.
    pub trace_norm: f64,
}

/// Relative eigenvalue floor below which `ν` is reported as zero.
const DEGENERATE_TOL: f64 = 1e-12;

fn spectrum_stats(eigs_desc: &[f64], trace: f64) -> DiversityStats {
    let r = eigs_desc.len();
    let top = eigs_desc[0].max(0.0);
    let mut nu = eigs_desc[r - 1].max(0.0);
    if nu <= DEGENERATE_TOL * top || top == 0.0 {
        nu = 0.0;
    }
    let (kappa_bar, kappa) = if nu > 0.0 {
        (trace / (r as f64 * nu), top / nu)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    DiversityStats {
        nu,
        kappa_bar,
        kappa,
        trace_norm: trace,
    }
}

pub fn diversity_stats(tasks: &TaskSet) -> DiversityStats {
    let g = tasks.gram();
    let (eigs, _) = linalg::symmetric_eigen_desc(&g).expect("Gram matrix is symmetric");
    spectrum_stats(&eigs, g.trace())
}

/// Samples and their task labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    covariates: Matrix,
    responses: Vec<f64>,
    task_index: Vec<usize>,
}

impl DataSet {
    pub fn new(covariates: Matrix, responses: Vec<f64>, task_index: Vec<usize>) -> Result<Self> {
        if covariates.rows() != responses.len() || responses.len() != task_index.len() {
            return Err(Error::DimensionMismatch(
                "covariates, responses and task indices need the same length",
            ));
        }
        if responses.iter().any(|y| !y.is_finite()) || !covariates.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            covariates,
            responses,
            task_index,
        })
    }

    /// Single-task data set; every task index is `task`.
    pub fn single_task(covariates: Matrix, responses: Vec<f64>, task: usize) -> Result<Self> {
        let n = responses.len();
        Self::new(covariates, responses, vec![task; n])
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.cols()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn task_index(&self) -> &[usize] {
        &self.task_index
    }

    /// `max task index + 1`.
    pub fn implied_task_count(&self) -> usize {
        self.task_index.iter().max().map_or(0, |m| m + 1)
    }

    /// Same samples in the order given by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch("permutation length"));
        }
        let d = self.dim();
        let mut x = Vec::with_capacity(self.len() * d);
        for &p in perm {
            x.extend_from_slice(self.covariates.row(p));
        }
        Self::new(
            Matrix::from_row_major(self.len(), d, x)?,
            perm.iter().map(|&p| self.responses[p]).collect(),
            perm.iter().map(|&p| self.task_index[p]).collect(),
        )
    }
}

/// How samples are assigned to tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sampling {
    /// Exactly `n_per_task` consecutive samples for each task.
    RoundRobin,
    /// Each sample's task drawn uniformly; `t · n_per_task` samples total.
    Uniform,
}

/// Additive noise on the responses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// `ε ~ N(0, 1)`.
    Standard,
    /// `ε = 0`. Only meant for oracle tests.
    Noiseless,
}

/// Orthonormalization of a `d × r` standard Gaussian matrix.
pub fn sample_features<R: RngCore + ?Sized>(d: usize, r: usize, rng: &mut R) -> Result<FeatureMatrix> {
    if r == 0 || r > d {
        return Err(Error::InvalidDims("need 1 <= r <= d"));
    }
    let g = Matrix::from_fn(d, r, |_, _| standard_normal(rng));
    linalg::orthonormalize(&g)
}

/// `t` task vectors with i.i.d. `N(0, 1/r)` entries.
pub fn sample_tasks<R: RngCore + ?Sized>(t: usize, r: usize, rng: &mut R) -> Result<TaskSet> {
    if t == 0 || r == 0 {
        return Err(Error::InvalidDims("need t >= 1 and r >= 1"));
    }
    let scale = 1.0 / libm::sqrt(r as f64);
    TaskSet::new(Matrix::from_fn(t, r, |_, _| scale * standard_normal(rng)))
}

/// Draws `x ~ N(0, I_d)` and `y = xᵀβ + ε` for each label in `labels`,
/// with `β` looked up per label.
fn draw_samples<R: RngCore + ?Sized>(
    betas: &[Vec<f64>],
    labels: Vec<usize>,
    d: usize,
    noise: Noise,
    rng: &mut R,
) -> Result<DataSet> {
    let n = labels.len();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for &task in &labels {
        let start = x.len();
        x.extend((0..d).map(|_| standard_normal(rng)));
        let eps = match noise {
            Noise::Standard => standard_normal(rng),
            Noise::Noiseless => 0.0,
        };
        y.push(linalg::dot(&x[start..], &betas[task]) + eps);
    }
    DataSet::new(Matrix::from_row_major(n, d, x)?, y, labels)
}

/// Training data from the model `y_i = x_iᵀ B α_{t(i)} + ε_i`.
pub fn generate_data<R: RngCore + ?Sized>(
    features: &FeatureMatrix,
    tasks: &TaskSet,
    n_per_task: usize,
    sampling: Sampling,
    noise: Noise,
    rng: &mut R,
) -> Result<DataSet> {
    if n_per_task == 0 {
        return Err(Error::InvalidDims("n_per_task must be positive"));
    }
    if tasks.rank() != features.rank() {
        return Err(Error::DimensionMismatch("task rank differs from feature rank"));
    }
    let t = tasks.count();
    let betas: Vec<Vec<f64>> = (0..t)
        .map(|j| features.basis().mul_vec(tasks.alpha(j)))
        .collect::<Result<_>>()?;
    let n = t * n_per_task;
    let labels: Vec<usize> = match sampling {
        Sampling::RoundRobin => (0..n).map(|i| i / n_per_task).collect(),
        Sampling::Uniform => (0..n).map(|_| uniform_index(rng, t)).collect(),
    };
    draw_samples(&betas, labels, features.dim(), noise, rng)
}

/// `n` samples of the single task `α`, all labelled `label`.
pub fn generate_task_data<R: RngCore + ?Sized>(
    features: &FeatureMatrix,
    alpha: &[f64],
    n: usize,
    label: usize,
    noise: Noise,
    rng: &mut R,
) -> Result<DataSet> {
    if n == 0 {
        return Err(Error::InvalidDims("need at least one sample"));
    }
    let beta = features.basis().mul_vec(alpha)?;
    let mut betas = vec![Vec::new(); label + 1];
    betas[label] = beta;
    draw_samples(&betas, vec![label; n], features.dim(), noise, rng)
}

/// Sizes of a synthetic instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceSpec {
    pub d: usize,
    pub r: usize,
    pub t: usize,
    pub n_per_task: usize,
    pub n2: usize,
    pub sampling: Sampling,
    pub noise: Noise,
}

/// A full synthetic problem: training tasks plus one held-out task.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub true_features: FeatureMatrix,
    pub tasks: TaskSet,
    pub train: DataSet,
    pub new_task_alpha: Vec<f64>,
    /// Data for the new task; every label equals `tasks.count()`.
    pub test: DataSet,
}

impl Instance {
    /// Draws, in order: `B`, `A`, the training data, `α_{t+1}`, the new-task
    /// data.
    pub fn generate<R: RngCore + ?Sized>(spec: &InstanceSpec, rng: &mut R) -> Result<Self> {
        let true_features = sample_features(spec.d, spec.r, rng)?;
        let tasks = sample_tasks(spec.t, spec.r, rng)?;
        let train = generate_data(
            &true_features,
            &tasks,
            spec.n_per_task,
            spec.sampling,
            spec.noise,
            rng,
        )?;
        let new_task_alpha = sample_tasks(1, spec.r, rng)?.alpha(0).to_vec();
        let test = generate_task_data(
            &true_features,
            &new_task_alpha,
            spec.n2,
            spec.t,
            spec.noise,
            rng,
        )?;
        Ok(Self {
            true_features,
            tasks,
            train,
            new_task_alpha,
            test,
        })
    }

    pub fn new_task_beta(&self) -> Vec<f64> {
        self.true_features
            .basis()
            .mul_vec(&self.new_task_alpha)
            .expect("alpha has rank entries")
    }
}

/// `Λ̄ = (1/n) Σ_i α_{t(i)} α_{t(i)}ᵀ` with its diversity numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTaskMatrix {
    pub lambda_bar: Matrix,
    /// `σ_r(Λ̄)`.
    pub nu_tilde: f64,
    /// `tr(Λ̄) / (r ν̃)`.
    pub kappa_tilde: f64,
}

impl EmpiricalTaskMatrix {
    /// Wraps a symmetric PSD `r × r` matrix.
    pub fn from_lambda(lambda_bar: Matrix) -> Result<Self> {
        let (eigs, _) = linalg::symmetric_eigen_desc(&lambda_bar)?;
        let scale = libm::fabs(eigs[0]).max(1.0);
        if eigs[eigs.len() - 1] < -1e-10 * scale {
            return Err(Error::InvalidParameter("task matrix must be positive semidefinite"));
        }
        let stats = spectrum_stats(&eigs, lambda_bar.trace());
        Ok(Self {
            lambda_bar,
            nu_tilde: stats.nu,
            kappa_tilde: stats.kappa_bar,
        })
    }

    pub fn rank(&self) -> usize {
        self.lambda_bar.rows()
    }
}

pub fn empirical_task_matrix(tasks: &TaskSet, data: &DataSet) -> Result<EmpiricalTaskMatrix> {
    let t = tasks.count();
    let mut counts = vec![0usize; t];
    for &j in data.task_index() {
        if j >= t {
            return Err(Error::IndexOutOfRange { index: j, count: t });
        }
        counts[j] += 1;
    }
    let r = tasks.rank();
    let mut lambda = Matrix::zeros(r, r);
    for (j, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let a = tasks.alpha(j);
        for p in 0..r {
            for q in 0..r {
                lambda[(p, q)] += c as f64 * a[p] * a[q];
            }
        }
    }
    EmpiricalTaskMatrix::from_lambda(lambda.scaled(1.0 / data.len() as f64))
}

/// Row leverages of the left singular basis of `A` against the incoherence
/// bound implied by task diversity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncoherenceReport {
    pub holds: bool,
    /// `max_j ‖e_jᵀU‖²`.
    pub max_leverage: f64,
    /// `c · μ · r / t`.
    pub bound: f64,
    /// `1 / (r · σ_r(AᵀA/t))`.
    pub mu: f64,
}

/// Slack on exact theorem inequalities for rounding.
pub const INEQUALITY_SLACK: f64 = 1e-10;

/// Checks `max_j ‖e_jᵀU‖² ≤ c·μ·r/t` where `U` spans the columns of `A`.
pub fn incoherence_check(tasks: &TaskSet, c: f64) -> Result<IncoherenceReport> {
    let stats = diversity_stats(tasks);
    if !(stats.nu > 0.0) {
        return Err(Error::DegenerateTasks);
    }
    let (t, r) = (tasks.count(), tasks.rank());
    let u = linalg::svd(tasks.matrix()).u;
    let max_leverage = (0..t)
        .map(|j| linalg::dot(u.row(j), u.row(j)))
        .fold(0.0, f64::max);
    let mu = 1.0 / (r as f64 * stats.nu);
    let bound = c * mu * r as f64 / t as f64;
    Ok(IncoherenceReport {
        holds: max_leverage <= bound * (1.0 + INEQUALITY_SLACK),
        max_leverage,
        bound,
        mu,
    })
}

/// A basis whose principal angles with `features` all equal `angle`:
/// `B cos θ + C sin θ` with `C` a random orthonormal basis of directions
/// orthogonal to `B`. Needs `2r ≤ d`.
pub fn tilt_features<R: RngCore + ?Sized>(
    features: &FeatureMatrix,
    angle: f64,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    let (d, r) = (features.dim(), features.rank());
    if 2 * r > d {
        return Err(Error::InvalidDims("tilting needs 2r <= d"));
    }
    let b = features.basis();
    let g = Matrix::from_fn(d, r, |_, _| standard_normal(rng));
    // two projection passes keep the complement orthogonal to working precision
    let mut resid = g;
    for _ in 0..2 {
        let coef = b.t_matmul(&resid)?;
        resid = resid.sub(&b.matmul(&coef)?)?;
    }
    let c = linalg::orthonormalize(&resid)?;
    let tilted = b
        .scaled(libm::cos(angle))
        .add(&c.basis().scaled(libm::sin(angle)))?;
    linalg::orthonormalize(&tilted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::principal_sin_theta;
    use crate::rng::stream;

    #[test]
    fn full_rank_features_span_everything() {
        let f = sample_features(4, 4, &mut stream(3, 0)).unwrap();
        let id = FeatureMatrix::standard(4, 4).unwrap();
        assert!(principal_sin_theta(&f, &id).unwrap() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_features(10, 3, &mut stream(5, 0)).unwrap();
        let b = sample_features(10, 3, &mut stream(5, 0)).unwrap();
        assert_eq!(a, b);
        let ta = sample_tasks(6, 3, &mut stream(5, 1)).unwrap();
        let tb = sample_tasks(6, 3, &mut stream(5, 1)).unwrap();
        assert_eq!(ta, tb);
    }

    #[test]
    fn invalid_dims_rejected() {
        let mut rng = stream(0, 0);
        assert!(sample_features(3, 4, &mut rng).is_err());
        assert!(sample_features(3, 0, &mut rng).is_err());
        assert!(sample_tasks(0, 2, &mut rng).is_err());
        let f = FeatureMatrix::standard(3, 1).unwrap();
        let t = sample_tasks(2, 1, &mut rng).unwrap();
        assert!(generate_data(&f, &t, 0, Sampling::RoundRobin, Noise::Standard, &mut rng).is_err());
    }

    #[test]
    fn round_robin_counts() {
        let mut rng = stream(1, 0);
        let f = sample_features(5, 2, &mut rng).unwrap();
        let t = sample_tasks(4, 2, &mut rng).unwrap();
        let data = generate_data(&f, &t, 3, Sampling::RoundRobin, Noise::Standard, &mut rng).unwrap();
        assert_eq!(data.len(), 12);
        for j in 0..4 {
            assert_eq!(data.task_index().iter().filter(|&&k| k == j).count(), 3);
        }
        let uni = generate_data(&f, &t, 3, Sampling::Uniform, Noise::Standard, &mut rng).unwrap();
        assert_eq!(uni.len(), 12);
        assert!(uni.task_index().iter().all(|&k| k < 4));
    }

    #[test]
    fn noiseless_response() {
        let f = FeatureMatrix::standard(1, 1).unwrap();
        let data = generate_task_data(&f, &[1.0], 5, 0, Noise::Noiseless, &mut stream(2, 0)).unwrap();
        for i in 0..5 {
            assert_eq!(data.responses()[i], data.covariates()[(i, 0)]);
        }
        // x = e1 evaluation: y = e1ᵀ B α = 1
        let b = FeatureMatrix::standard(3, 1).unwrap();
        let beta = b.basis().mul_vec(&[1.0]).unwrap();
        assert_eq!(linalg::dot(&[1.0, 0.0, 0.0], &beta), 1.0);
    }

    #[test]
    fn identity_task_matrix_stats() {
        for r in 1..5 {
            let tasks = TaskSet::new(Matrix::identity(r)).unwrap();
            let s = diversity_stats(&tasks);
            assert!((s.nu - 1.0 / r as f64).abs() < 1e-14);
            assert!((s.kappa_bar - 1.0).abs() < 1e-12);
            assert!((s.kappa - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_rows_are_degenerate() {
        let tasks = TaskSet::new(Matrix::from_fn(5, 3, |_, j| (j + 1) as f64 * 0.3)).unwrap();
        let s = diversity_stats(&tasks);
        assert_eq!(s.nu, 0.0);
        assert!(s.kappa.is_infinite());
        assert_eq!(incoherence_check(&tasks, 1.0), Err(Error::DegenerateTasks));
    }

    #[test]
    fn empirical_task_matrix_round_robin_and_single_task() {
        let mut rng = stream(9, 0);
        let f = sample_features(6, 2, &mut rng).unwrap();
        let t = sample_tasks(5, 2, &mut rng).unwrap();
        let data = generate_data(&f, &t, 4, Sampling::RoundRobin, Noise::Standard, &mut rng).unwrap();
        let e = empirical_task_matrix(&t, &data).unwrap();
        assert!(e.lambda_bar.max_abs_diff(&t.gram()) < 1e-12);

        let single = TaskSet::new(Matrix::from_rows(&[&[0.5, -2.0]]).unwrap()).unwrap();
        let data = generate_data(&f, &single, 3, Sampling::RoundRobin, Noise::Standard, &mut rng).unwrap();
        let e = empirical_task_matrix(&single, &data).unwrap();
        let expect = Matrix::from_rows(&[&[0.25, -1.0], &[-1.0, 4.0]]).unwrap();
        assert!(e.lambda_bar.max_abs_diff(&expect) < 1e-15);
        assert_eq!(e.nu_tilde, 0.0);
    }

    #[test]
    fn empirical_task_matrix_rejects_bad_index() {
        let t = TaskSet::new(Matrix::identity(2)).unwrap();
        let data = DataSet::new(Matrix::identity(2), vec![1.0, 1.0], vec![0, 2]).unwrap();
        assert_eq!(
            empirical_task_matrix(&t, &data),
            Err(Error::IndexOutOfRange { index: 2, count: 2 })
        );
    }

    #[test]
    fn incoherence_identity_is_tight() {
        let tasks = TaskSet::new(Matrix::identity(4)).unwrap();
        let rep = incoherence_check(&tasks, 1.0).unwrap();
        assert!(rep.holds);
        assert!((rep.max_leverage - 1.0).abs() < 1e-12);
        assert!((rep.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incoherence_violation_detected() {
        let mut rng = stream(4, 0);
        let tasks = sample_tasks(20, 3, &mut rng).unwrap();
        let mut m = tasks.matrix().clone();
        for v in m.row_mut(0) {
            *v *= 10.0;
        }
        let rep = incoherence_check(&TaskSet::new(m).unwrap(), 1.0).unwrap();
        assert!(!rep.holds);
        assert!(rep.max_leverage > rep.bound);
    }

    #[test]
    fn tilted_features_have_requested_angle() {
        let mut rng = stream(11, 0);
        let b = sample_features(12, 3, &mut rng).unwrap();
        for angle in [0.0, 0.1, 0.7, 1.3] {
            let t = tilt_features(&b, angle, &mut rng).unwrap();
            let s = principal_sin_theta(&b, &t).unwrap();
            assert!((s - libm::sin(angle)).abs() < 1e-12, "{angle}: {s}");
        }
        assert!(tilt_features(&sample_features(5, 3, &mut rng).unwrap(), 0.1, &mut rng).is_err());
    }

    #[test]
    fn permuted_keeps_rows_together() {
        let data = DataSet::new(
            Matrix::from_rows(&[&[1.0], &[2.0], &[3.0]]).unwrap(),
            vec![10.0, 20.0, 30.0],
            vec![0, 1, 0],
        )
        .unwrap();
        let p = data.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.responses(), &[30.0, 10.0, 20.0]);
        assert_eq!(p.task_index(), &[0, 0, 1]);
        assert_eq!(p.covariates()[(0, 0)], 3.0);
    }
}
