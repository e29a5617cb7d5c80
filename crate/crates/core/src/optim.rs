//! Box-constrained quasi-Newton ascent (projected L-BFGS with Armijo
//! backtracking). Used for every likelihood / ELBO maximization.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Self {
        Bounds {
            lower: vec![lower; n],
            upper: vec![upper; n],
        }
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Stop when an accepted step changes the objective by less than
    /// `rel_tol·|f|`.
    pub rel_tol: f64,
    /// Stop when the projected gradient's max-norm falls below this.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iter: 500,
            rel_tol: 1e-6,
            grad_tol: 1e-8,
            memory: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step (first entry is the start).
    pub trace: Vec<f64>,
}

/// Maximizes `f` inside `bounds`, starting from `x0` (projected first).
///
/// `f` returns the value and its gradient. A failing evaluation at a trial
/// point is treated like an insufficient-increase step; a failure at the
/// starting point is returned to the caller.
pub fn maximize<F>(mut f: F, x0: &[f64], bounds: &Bounds, opts: &OptimOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    if bounds.lower.len() != n || bounds.upper.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bounds.lower.len(),
        });
    }
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let (mut fx, mut gx) = f(&x)?;
    if !fx.is_finite() || gx.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("objective at starting point".into()));
    }
    let mut trace = vec![fx];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        // minimize phi = -f; q = grad phi
        let q: Vec<f64> = gx.iter().map(|g| -g).collect();
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let at_lo = x[i] <= bounds.lower[i] && q[i] > 0.0;
                let at_hi = x[i] >= bounds.upper[i] && q[i] < 0.0;
                !(at_lo || at_hi)
            })
            .collect();
        let q_free: Vec<f64> = (0..n).map(|i| if free[i] { q[i] } else { 0.0 }).collect();
        let pg = q_free.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if pg < opts.grad_tol {
            converged = true;
            break;
        }

        let mut d = two_loop(&q_free, &memory);
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        if !(dot(&d, &q) < 0.0) {
            memory.clear();
            d = q_free.iter().map(|v| -v).collect();
        }
        let mut alpha = if memory.is_empty() {
            let dn = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            (1.0 / dn).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            bounds.project(&mut xn);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            if let Ok((fn_, gn)) = f(&xn) {
                let decrease = dot(&q, &step);
                if fn_.is_finite()
                    && gn.iter().all(|g| g.is_finite())
                    && -fn_ <= -fx + 1e-4 * decrease.min(0.0)
                    && fn_ >= fx
                {
                    accepted = Some((xn, fn_, gn, step));
                    break;
                }
            }
            alpha *= 0.5;
        }

        let Some((xn, fn_, gn, step)) = accepted else {
            // no ascent possible along the projected direction
            if memory.is_empty() {
                converged = pg < 1e-4;
                break;
            }
            memory.clear();
            continue;
        };

        let ydiff: Vec<f64> = gn.iter().zip(&gx).map(|(a, b)| -(a - b)).collect();
        let sy = dot(&step, &ydiff);
        if sy > 1e-12 * norm(&step) * norm(&ydiff) && sy > 0.0 {
            memory.push_back((step, ydiff, sy));
            if memory.len() > opts.memory {
                memory.pop_front();
            }
        }
        let change = (fn_ - fx).abs();
        x = xn;
        fx = fn_;
        gx = gn;
        trace.push(fx);
        if change <= opts.rel_tol * fx.abs() {
            converged = true;
            break;
        }
    }

    Ok(OptimResult {
        x,
        value: fx,
        gradient: gx,
        iterations,
        converged,
        trace,
    })
}

fn two_loop(q: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut r = q.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, sy) in memory.iter().rev() {
        let a = dot(s, &r) / sy;
        for (ri, yi) in r.iter_mut().zip(y) {
            *ri -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((_, y, sy)) = memory.back() {
        let gamma = sy / dot(y, y);
        for ri in r.iter_mut() {
            *ri *= gamma;
        }
    }
    for ((s, y, sy), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = dot(y, &r) / sy;
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (a - b) * si;
        }
    }
    r.iter().map(|v| -v).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
