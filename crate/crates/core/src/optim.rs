//! Deterministic unconstrained minimization of smooth convex objectives.
//!
//! Limited-memory quasi-Newton (two-loop recursion) with a strong Wolfe line
//! search. The objectives fitted here are strongly convex with exact
//! gradients, so the method converges to tight gradient tolerances; the
//! privacy mechanisms rely on that because their noise calibration assumes
//! the reported optimum is essentially exact.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Optimizer controls.
#[derive(Debug, Clone)]
pub struct OptimSettings {
    /// Stop once the gradient norm falls at or below this.
    pub grad_tol: f64,
    /// Hard iteration cap.
    pub max_iters: usize,
    /// Number of curvature pairs kept for the inverse-Hessian approximation.
    pub memory: usize,
}

impl Default for OptimSettings {
    fn default() -> Self {
        OptimSettings {
            grad_tol: 1e-8,
            max_iters: 500,
            memory: 10,
        }
    }
}

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at each accepted iterate, starting from `x0`.
    pub objective_trace: Vec<f64>,
}

const ARMIJO_C1: f64 = 1e-4;
const CURVATURE_C2: f64 = 0.9;
const MAX_LINE_SEARCH: usize = 60;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: applies the current inverse-Hessian approximation to
/// the gradient, returning the descent direction.
fn search_direction(grad: &[f64], history: &VecDeque<CurvaturePair>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some(last) = history.back() {
        let scale = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qi in &mut q {
            *qi *= scale;
        }
    }
    for (pair, a) in history.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * dot(&pair.y, &q);
        for (qi, si) in q.iter_mut().zip(&pair.s) {
            *qi += (a - b) * si;
        }
    }
    for qi in &mut q {
        *qi = -*qi;
    }
    q
}

struct LineSearchResult {
    step: f64,
    value: f64,
    grad: Vec<f64>,
    ok: bool,
}

/// Strong Wolfe line search (bracket and zoom). Non-finite trial values are
/// treated as infinitely bad, which shrinks the step. The sufficient-decrease
/// test carries a small absolute slack so that flat regions near machine
/// precision remain navigable.
fn line_search<F>(
    objective: &mut F,
    x: &[f64],
    direction: &[f64],
    f0: f64,
    g0_dot_d: f64,
    initial_step: f64,
) -> LineSearchResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let eval = |objective: &mut F, step: f64| {
        let trial: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + step * di)
            .collect();
        let (v, g) = objective(&trial);
        let slope = dot(&g, direction);
        (v, g, slope)
    };
    // Absolute slack at the scale of the objective's own rounding noise
    // (sums over thousands of terms), so near-stationary regions where value
    // differences drown in roundoff remain navigable.
    let slack = 1e-12 * (1.0 + f0.abs());
    let armijo = |step: f64, v: f64| v <= f0 + ARMIJO_C1 * step * g0_dot_d + slack;
    let curvature = |slope: f64| slope.abs() <= CURVATURE_C2 * g0_dot_d.abs();

    let mut lo = 0.0;
    let mut f_lo = f0;
    let mut hi = f64::INFINITY;
    let mut step = initial_step;
    let mut best = LineSearchResult {
        step: 0.0,
        value: f0,
        grad: Vec::new(),
        ok: false,
    };

    for _ in 0..MAX_LINE_SEARCH {
        let (v, g, slope) = eval(objective, step);
        if v.is_finite() && v < best.value {
            best = LineSearchResult {
                step,
                value: v,
                grad: g.clone(),
                ok: false,
            };
        }
        if !v.is_finite() || !armijo(step, v) {
            hi = step;
        } else if curvature(slope) {
            return LineSearchResult {
                step,
                value: v,
                grad: g,
                ok: true,
            };
        } else if slope < 0.0 {
            lo = step;
            f_lo = v;
            if hi.is_infinite() {
                step *= 2.0;
                continue;
            }
        } else {
            hi = step;
        }
        // Zoom by bisection once a bracket exists.
        step = if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            step * 2.0
        };
        if hi.is_finite() && (hi - lo) <= 1e-16 * hi.max(1.0) {
            break;
        }
    }
    let _ = f_lo;
    best
}

/// Minimizes `objective` (returning value and gradient) from `x0`.
///
/// Returns an error if the objective is non-finite at the start point.
/// A failed line search ends the run early with `converged = false` and the
/// best iterate found.
pub fn minimize<F>(mut objective: F, x0: &[f64], settings: &OptimSettings) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    if settings.grad_tol <= 0.0 {
        return Err(Error::Config("grad_tol must be positive".into()));
    }
    if settings.max_iters < 1 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }

    let mut x = x0.to_vec();
    let (mut value, mut grad) = objective(&x);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric(
            "objective is not finite at the start point".into(),
        ));
    }
    let mut trace = vec![value];
    let mut history: VecDeque<CurvaturePair> = VecDeque::with_capacity(settings.memory);
    let mut converged = norm(&grad) <= settings.grad_tol;
    let mut iterations = 0;

    while !converged && iterations < settings.max_iters {
        let mut direction = search_direction(&grad, &history);
        let mut slope = dot(&grad, &direction);
        if !slope.is_finite() || slope >= 0.0 {
            // Degenerate curvature information; restart from steepest descent.
            history.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &direction);
        }
        let initial_step = if history.is_empty() {
            (1.0 / norm(&grad).max(1.0)).min(1.0)
        } else {
            1.0
        };
        let ls = line_search(&mut objective, &x, &direction, value, slope, initial_step);
        if ls.step == 0.0 || ls.grad.is_empty() {
            // No acceptable step; return the best point seen.
            break;
        }
        let step_vec: Vec<f64> = direction.iter().map(|d| d * ls.step).collect();
        let y: Vec<f64> = ls.grad.iter().zip(&grad).map(|(gn, go)| gn - go).collect();
        let sy = dot(&step_vec, &y);
        if sy > 1e-12 * norm(&step_vec) * norm(&y) {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back(CurvaturePair {
                rho: 1.0 / sy,
                s: step_vec.clone(),
                y,
            });
        }
        for (xi, si) in x.iter_mut().zip(&step_vec) {
            *xi += si;
        }
        value = ls.value;
        grad = ls.grad;
        trace.push(value);
        iterations += 1;
        if !ls.ok {
            break;
        }
        converged = norm(&grad) <= settings.grad_tol;
    }

    Ok(OptimResult {
        grad_norm: norm(&grad),
        x,
        value,
        iterations,
        converged,
        objective_trace: trace,
    })
}
