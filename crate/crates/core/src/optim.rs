//! Box-constrained limited-memory quasi-Newton minimization.
//!
//! A compact projected L-BFGS in the spirit of L-BFGS-B: variables sitting on
//! a bound with the gradient pushing outwards are frozen for the iteration,
//! the two-loop recursion runs on the free subspace, and a backtracking
//! Armijo search is carried out along the projected path.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods exist only when std is linked
use num_traits::Float;



#[derive(Debug, Clone, Copy)]
pub struct LbfgsbOptions {
    /// Number of stored correction pairs.
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the projected gradient's infinity norm drops below this.
    pub pg_tol: f64,
    /// Stop when the relative objective decrease drops below this.
    pub f_tol: f64,
}

impl Default for LbfgsbOptions {
    fn default() -> Self {
        Self { memory: 7, max_iter: 200, pg_tol: 1e-9, f_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Central finite-difference gradient with absolute step `step`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], step: f64, grad: &mut [f64]) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = f(&probe);
        probe[i] = x[i] - step;
        let down = f(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * step);
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `fg` over the box `[lower, upper]` starting from `x0`.
///
/// `fg(x, grad)` returns the objective and writes the gradient. Non-finite
/// objective values are treated as failures of the trial step.
pub fn minimize_box<FG>(mut fg: FG, x0: &[f64], lower: &[f64], upper: &[f64], opts: &LbfgsbOptions) -> Minimum
where
    FG: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut g = vec![0.0; n];
    let mut f = fg(&x, &mut g);
    let mut evaluations = 1;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;

    if !f.is_finite() {
        return Minimum { x, f, iterations, evaluations, converged };
    }

    let mut free = vec![true; n];
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    while iterations < opts.max_iter {
        let mut pg_norm: f64 = 0.0;
        for i in 0..n {
            let at_lower = x[i] <= lower[i] && g[i] > 0.0;
            let at_upper = x[i] >= upper[i] && g[i] < 0.0;
            free[i] = !(at_lower || at_upper);
            if free[i] {
                pg_norm = pg_norm.max(g[i].abs());
            }
        }
        if pg_norm < opts.pg_tol {
            converged = true;
            break;
        }

        // two-loop recursion on the free components
        for i in 0..n {
            d[i] = if free[i] { -g[i] } else { 0.0 };
        }
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * masked_dot(s, &d, &free);
            for i in 0..n {
                if free[i] {
                    d[i] -= a * y[i];
                }
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let yy = masked_dot(y, y, &free);
            let sy = masked_dot(s, y, &free);
            if yy > 0.0 && sy > 0.0 {
                let gamma = sy / yy;
                d.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * masked_dot(y, &d, &free);
            for i in 0..n {
                if free[i] {
                    d[i] += (a - b) * s[i];
                }
            }
        }
        if dot(&d, &g) >= 0.0 {
            pairs.clear();
            for i in 0..n {
                d[i] = if free[i] { -g[i] } else { 0.0 };
            }
        }

        let mut step = if pairs.is_empty() { (1.0 / pg_norm).min(1.0) } else { 1.0 };
        let mut accepted = false;
        let mut f_new = f;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            project(&mut x_new, lower, upper);
            let moved: f64 = x_new.iter().zip(&x).map(|(a, b)| a - b).zip(&g).map(|(s, gi)| s * gi).sum();
            f_new = fg(&x_new, &mut g_new);
            evaluations += 1;
            if f_new.is_finite() && f_new <= f + 1e-4 * moved {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }

        let decrease = f - f_new;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        f = f_new;
        if decrease <= opts.f_tol * f.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Minimum { x, f, iterations, evaluations, converged }
}

fn masked_dot(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    a.iter().zip(b).zip(mask).filter(|(_, m)| **m).map(|((x, y), _)| x * y).sum()
}
