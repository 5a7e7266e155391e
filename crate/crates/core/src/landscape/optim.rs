//! Unconstrained smooth minimization: L-BFGS with a strong-Wolfe line
//! search, and gradient descent with backtracking.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{axpy, dot};

/// A differentiable function of a flat parameter vector.
pub trait Differentiable {
    fn dim(&self) -> usize;

    /// Writes the gradient at `x` into `grad` and returns the value.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Limited-memory BFGS with the given number of stored pairs.
    Lbfgs { memory: usize },
    /// Steepest descent with Armijo backtracking.
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient max-norm reached the tolerance.
    GradientTolerance,
    MaxIterations,
    /// The line search could not decrease the objective.
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_max_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Objective at the start point and after each accepted iteration.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub method: Method,
    pub max_iters: usize,
    pub grad_tol: f64,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_SEARCH: usize = 25;
const STEP_TOL: f64 = 1e-12;

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, libm::fabs(*x)))
}

struct Evaluator<'a, F: Differentiable + ?Sized> {
    f: &'a F,
    count: usize,
    scratch: Vec<f64>,
}

impl<F: Differentiable + ?Sized> Evaluator<'_, F> {
    /// Value and gradient at `x + t·d`.
    fn at(&mut self, x: &[f64], t: f64, d: &[f64]) -> (f64, Vec<f64>) {
        self.scratch.clear();
        self.scratch.extend(x.iter().zip(d).map(|(xi, di)| xi + t * di));
        let mut g = vec![0.0; x.len()];
        let v = self.f.value_grad(&self.scratch, &mut g);
        self.count += 1;
        (v, g)
    }
}

pub fn minimize<F: Differentiable + ?Sized>(f: &F, x0: Vec<f64>, opts: &MinimizeOptions) -> Minimum {
    let n = f.dim();
    assert_eq!(x0.len(), n, "start point has the wrong dimension");
    let mut ev = Evaluator {
        f,
        count: 0,
        scratch: Vec::with_capacity(n),
    };
    let mut x = x0;
    let zeros = vec![0.0; n];
    let (mut value, mut grad) = ev.at(&x, 0.0, &zeros);
    let mut history = vec![value];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    let memory = match opts.method {
        Method::Lbfgs { memory } => memory.max(1),
        Method::GradientDescent => 0,
    };
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(memory);
    let mut gd_step = 1.0 / max_norm(&grad).max(1.0);

    if !value.is_finite() {
        return Minimum {
            x,
            value,
            grad_max_norm: f64::INFINITY,
            iterations: 0,
            evaluations: ev.count,
            termination: Termination::LineSearchFailure,
            history,
        };
    }

    while iterations < opts.max_iters {
        if max_norm(&grad) <= opts.grad_tol {
            termination = Termination::GradientTolerance;
            break;
        }

        let step = match opts.method {
            Method::Lbfgs { .. } => {
                let mut d = two_loop(&grad, &pairs);
                let mut gtd = dot(&grad, &d);
                if !(gtd < 0.0) {
                    pairs.clear();
                    d = grad.iter().map(|g| -g).collect();
                    gtd = -dot(&grad, &grad);
                }
                let t0 = if pairs.is_empty() {
                    (1.0 / grad.iter().map(|g| libm::fabs(*g)).sum::<f64>()).min(1.0)
                } else {
                    1.0
                };
                let ls = strong_wolfe(&mut ev, &x, t0, &d, value, &grad, gtd);
                if !(ls.value <= value) || !ls.value.is_finite() {
                    termination = Termination::LineSearchFailure;
                    break;
                }
                let s: Vec<f64> = d.iter().map(|di| ls.t * di).collect();
                let y: Vec<f64> = ls.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                let ys = dot(&y, &s);
                if ys > 1e-10 {
                    if pairs.len() == memory {
                        pairs.pop_front();
                    }
                    pairs.push_back((s.clone(), y, 1.0 / ys));
                }
                Some((s, ls.value, ls.grad))
            }
            Method::GradientDescent => backtracking(&mut ev, &x, value, &grad, &mut gd_step),
        };

        let Some((s, new_value, new_grad)) = step else {
            termination = Termination::LineSearchFailure;
            break;
        };
        let moved = max_norm(&s);
        axpy(1.0, &s, &mut x);
        let stalled = moved == 0.0 || (new_value == value && moved <= STEP_TOL * max_norm(&x).max(1.0));
        value = new_value;
        grad = new_grad;
        history.push(value);
        iterations += 1;
        if stalled && max_norm(&grad) > opts.grad_tol {
            termination = Termination::LineSearchFailure;
            break;
        }
    }
    if iterations >= opts.max_iters && max_norm(&grad) <= opts.grad_tol {
        termination = Termination::GradientTolerance;
    }

    Minimum {
        grad_max_norm: max_norm(&grad),
        x,
        value,
        iterations,
        evaluations: ev.count,
        termination,
        history,
    }
}

/// `-H·g` from the stored curvature pairs.
fn two_loop(grad: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q
}

fn backtracking<F: Differentiable + ?Sized>(
    ev: &mut Evaluator<'_, F>,
    x: &[f64],
    value: f64,
    grad: &[f64],
    step: &mut f64,
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let d: Vec<f64> = grad.iter().map(|g| -g).collect();
    let gg = dot(grad, grad);
    let mut t = *step * 2.0;
    for _ in 0..60 {
        let (v, g) = ev.at(x, t, &d);
        if v.is_finite() && v <= value - C1 * t * gg {
            *step = t;
            return Some((d.iter().map(|di| t * di).collect(), v, g));
        }
        t *= 0.5;
    }
    None
}

struct LineSearchResult {
    t: f64,
    value: f64,
    grad: Vec<f64>,
}

/// Minimizer of the cubic interpolating `(x1, f1, g1)` and `(x2, f2, g2)`,
/// clamped to `bounds` (defaults to the interval between the points).
fn cubic_interpolate(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64, bounds: Option<(f64, f64)>) -> f64 {
    let (lo, hi) = bounds.unwrap_or(if x1 <= x2 { (x1, x2) } else { (x2, x1) });
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= 0.0 {
        let d2 = libm::sqrt(d2_sq);
        let min_pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if min_pos.is_finite() {
            return min_pos.max(lo).min(hi);
        }
    }
    (lo + hi) / 2.0
}

/// Bracketing phase followed by zoom, as in Nocedal & Wright (Alg. 3.5/3.6),
/// with safeguarded cubic interpolation.
fn strong_wolfe<F: Differentiable + ?Sized>(
    ev: &mut Evaluator<'_, F>,
    x: &[f64],
    mut t: f64,
    d: &[f64],
    f0: f64,
    g0: &[f64],
    gtd0: f64,
) -> LineSearchResult {
    let d_norm = max_norm(d);
    let (mut f_new, mut g_new) = ev.at(x, t, d);
    let mut gtd_new = dot(&g_new, d);

    let (mut t_prev, mut f_prev, mut g_prev, mut gtd_prev) = (0.0, f0, g0.to_vec(), gtd0);
    let mut done = false;
    let mut iters = 0;

    // bracket = [(t, f, g, gtd); 2]
    let mut bracket: Option<[(f64, f64, Vec<f64>, f64); 2]> = None;
    while iters < MAX_LINE_SEARCH {
        if !f_new.is_finite() {
            // overshoot into overflow: shrink towards the previous point
            bracket = None;
            t = t_prev + 0.1 * (t - t_prev);
            let (f, g) = ev.at(x, t, d);
            f_new = f;
            g_new = g;
            gtd_new = dot(&g_new, d);
            iters += 1;
            continue;
        }
        if f_new > f0 + C1 * t * gtd0 || (iters > 1 && f_new >= f_prev) {
            bracket = Some([
                (t_prev, f_prev, g_prev.clone(), gtd_prev),
                (t, f_new, g_new.clone(), gtd_new),
            ]);
            break;
        }
        if libm::fabs(gtd_new) <= -C2 * gtd0 {
            done = true;
            bracket = Some([
                (t, f_new, g_new.clone(), gtd_new),
                (t, f_new, g_new.clone(), gtd_new),
            ]);
            break;
        }
        if gtd_new >= 0.0 {
            bracket = Some([
                (t_prev, f_prev, g_prev.clone(), gtd_prev),
                (t, f_new, g_new.clone(), gtd_new),
            ]);
            break;
        }
        let min_step = t + 0.01 * (t - t_prev);
        let max_step = t * 10.0;
        let tmp = t;
        t = cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new, Some((min_step, max_step)));
        t_prev = tmp;
        f_prev = f_new;
        g_prev = core::mem::take(&mut g_new);
        gtd_prev = gtd_new;
        let (f, g) = ev.at(x, t, d);
        f_new = f;
        g_new = g;
        gtd_new = dot(&g_new, d);
        iters += 1;
    }
    let mut br = match bracket {
        Some(b) => b,
        None => {
            if f_new.is_finite() {
                [(0.0, f0, g0.to_vec(), gtd0), (t, f_new, g_new, gtd_new)]
            } else {
                [(0.0, f0, g0.to_vec(), gtd0), (0.0, f0, g0.to_vec(), gtd0)]
            }
        }
    };

    let mut insufficient_progress = false;
    let (mut low, mut high) = if br[0].1 <= br[1].1 { (0, 1) } else { (1, 0) };
    while !done && iters < MAX_LINE_SEARCH {
        if libm::fabs(br[1].0 - br[0].0) * d_norm < 1e-14 {
            break;
        }
        let mut t = cubic_interpolate(br[0].0, br[0].1, br[0].3, br[1].0, br[1].1, br[1].3, None);
        let b_max = br[0].0.max(br[1].0);
        let b_min = br[0].0.min(br[1].0);
        let eps = 0.1 * (b_max - b_min);
        if (b_max - t).min(t - b_min) < eps {
            if insufficient_progress || t >= b_max || t <= b_min {
                t = if libm::fabs(t - b_max) < libm::fabs(t - b_min) {
                    b_max - eps
                } else {
                    b_min + eps
                };
                insufficient_progress = false;
            } else {
                insufficient_progress = true;
            }
        } else {
            insufficient_progress = false;
        }

        let (f, g) = ev.at(x, t, d);
        let gtd = dot(&g, d);
        iters += 1;

        if !f.is_finite() || f > f0 + C1 * t * gtd0 || f >= br[low].1 {
            br[high] = (t, if f.is_finite() { f } else { f64::MAX }, g, gtd);
            (low, high) = if br[0].1 <= br[1].1 { (0, 1) } else { (1, 0) };
        } else {
            if libm::fabs(gtd) <= -C2 * gtd0 {
                done = true;
            } else if gtd * (br[high].0 - br[low].0) >= 0.0 {
                br[high] = br[low].clone();
            }
            br[low] = (t, f, g, gtd);
        }
    }
    let (t, value, grad, _) = core::mem::replace(&mut br[low], (0.0, 0.0, Vec::new(), 0.0));
    LineSearchResult { t, value, grad }
}
