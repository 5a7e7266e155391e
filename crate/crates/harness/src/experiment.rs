//! Sweep driver: one job per `(sweep point, repetition)`, each on its own
//! derived random stream.

use std::time::Instant;

use rayon::prelude::*;
use sharedrep_core::landscape::{self, OptimizerOptions, DEFAULT_C0};
use sharedrep_core::linalg::{principal_sin_theta, FeatureMatrix};
use sharedrep_core::model::{diversity_stats, Instance, InstanceSpec, Noise};
use sharedrep_core::rng::{self, trial_seed, Stream};
use sharedrep_core::{mom, transfer};

use crate::config::{Estimator, ExperimentConfig, SweepVar};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub estimator: Estimator,
    pub sweep_var: SweepVar,
    pub sweep_value: usize,
    pub rep: usize,
    pub seed: u64,
    /// Absent on a failed trial.
    pub sin_theta: Option<f64>,
    pub transfer_error_sq: Option<f64>,
    pub baseline_error_sq: Option<f64>,
    pub optimizer_iters: Option<usize>,
    pub in_constraint_set: Option<bool>,
    pub wall_millis: Option<u64>,
}

impl TrialResult {
    pub fn succeeded(&self) -> bool {
        self.sin_theta.is_some()
    }

    fn sort_key(&self) -> (Estimator, usize, usize) {
        (self.estimator, self.sweep_value, self.rep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    SinTheta,
    TransferErrorSq,
    BaselineErrorSq,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::SinTheta, Metric::TransferErrorSq, Metric::BaselineErrorSq];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SinTheta => "sin_theta",
            Metric::TransferErrorSq => "transfer_error_sq",
            Metric::BaselineErrorSq => "baseline_error_sq",
        }
    }

    pub fn of(self, t: &TrialResult) -> Option<f64> {
        match self {
            Metric::SinTheta => t.sin_theta,
            Metric::TransferErrorSq => t.transfer_error_sq,
            Metric::BaselineErrorSq => t.baseline_error_sq,
        }
    }
}

/// Mean and sample standard deviation of one metric over the successful
/// repetitions of an `(estimator, sweep_value)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub sweep_value: usize,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    /// Record per-trial wall time; this makes output run-dependent.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            timing: false,
        }
    }
}

struct Fitted {
    sin_theta: f64,
    transfer_error_sq: f64,
    baseline_error_sq: f64,
    optimizer_iters: Option<usize>,
    in_constraint_set: Option<bool>,
}

fn fit_estimator(cfg: &ExperimentConfig, inst: &Instance, estimator: Estimator, seed: u64) -> sharedrep_core::Result<Fitted> {
    let (features, iters, inside): (FeatureMatrix, _, _) = match estimator {
        Estimator::Mom => (mom::mom_estimate(&inst.train, cfg.r)?, None, None),
        Estimator::Fo => {
            let t = inst.tasks.count();
            let constraint = landscape::constraint_set_from_tasks(&diversity_stats(&inst.tasks), t, cfg.r, DEFAULT_C0).ok();
            let report = landscape::optimize(
                &inst.train,
                cfg.r,
                &OptimizerOptions {
                    seed,
                    num_tasks: Some(t),
                    constraint,
                    ..OptimizerOptions::default()
                },
            )?;
            let features = landscape::extract_features(&report.final_pair)?;
            (features, Some(report.iterations), report.in_constraint_set())
        }
    };
    let fit = transfer::evaluate_transfer(&inst.true_features, &inst.new_task_alpha, &features, &inst.test)?;
    Ok(Fitted {
        sin_theta: principal_sin_theta(&features, &inst.true_features)?,
        transfer_error_sq: fit.param_error_sq,
        baseline_error_sq: fit.baseline_error_sq,
        optimizer_iters: iters,
        in_constraint_set: inside,
    })
}

fn run_trial(cfg: &ExperimentConfig, sweep_index: usize, rep: usize, timing: bool) -> Vec<TrialResult> {
    let sweep_value = cfg.sweep_values[sweep_index];
    let seed = trial_seed(cfg.master_seed, sweep_index as u64, rep as u64);
    let (t, n_per_task) = cfg.sizes_at(sweep_value);
    let spec = InstanceSpec {
        d: cfg.d,
        r: cfg.r,
        t,
        n_per_task,
        n2: cfg.n2,
        sampling: cfg.sampling,
        noise: Noise::Standard,
    };
    let instance = Instance::generate(&spec, &mut rng::trial_stream(seed, Stream::Instance));
    cfg.estimators
        .iter()
        .map(|&estimator| {
            let start = Instant::now();
            let fitted = instance
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|inst| fit_estimator(cfg, inst, estimator, seed));
            let wall = timing.then(|| start.elapsed().as_millis() as u64);
            let mut row = TrialResult {
                estimator,
                sweep_var: cfg.sweep_var,
                sweep_value,
                rep,
                seed,
                sin_theta: None,
                transfer_error_sq: None,
                baseline_error_sq: None,
                optimizer_iters: None,
                in_constraint_set: None,
                wall_millis: wall,
            };
            if let Ok(f) = fitted {
                row.sin_theta = Some(f.sin_theta);
                row.transfer_error_sq = Some(f.transfer_error_sq);
                row.baseline_error_sq = Some(f.baseline_error_sq);
                row.optimizer_iters = f.optimizer_iters;
                row.in_constraint_set = f.in_constraint_set;
            }
            row
        })
        .collect()
}

/// Runs every `(sweep point, repetition)` job and returns trials sorted by
/// `(estimator, sweep_value, rep)` with their summary.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    opts: RunOptions,
) -> Result<(Vec<TrialResult>, Vec<SummaryRow>), rayon::ThreadPoolBuildError> {
    let jobs: Vec<(usize, usize)> = (0..cfg.sweep_values.len())
        .flat_map(|s| (0..cfg.reps).map(move |k| (s, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()?;
    let mut trials: Vec<TrialResult> = pool.install(|| {
        jobs.par_iter()
            .flat_map_iter(|&(s, k)| run_trial(cfg, s, k, opts.timing))
            .collect()
    });
    trials.sort_by_key(TrialResult::sort_key);
    let summary = summarize(&trials);
    Ok((trials, summary))
}

/// Per `(estimator, sweep_value)` cell and metric; failed trials are skipped.
/// Rows need not be pre-sorted.
pub fn summarize(trials: &[TrialResult]) -> Vec<SummaryRow> {
    let mut sorted: Vec<&TrialResult> = trials.iter().collect();
    sorted.sort_by_key(|t| t.sort_key());
    let mut out = Vec::new();
    for cell in sorted.chunk_by(|a, b| (a.estimator, a.sweep_value) == (b.estimator, b.sweep_value)) {
        for metric in Metric::ALL {
            let values: Vec<f64> = cell.iter().filter_map(|t| metric.of(t)).collect();
            if values.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&values);
            out.push(SummaryRow {
                estimator: cell[0].estimator,
                sweep_value: cell[0].sweep_value,
                metric,
                mean,
                std,
                reps: values.len(),
            });
        }
    }
    out
}

/// Mean and `n − 1` standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_basics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
