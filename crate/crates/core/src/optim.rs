//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_evaluations: usize,
    /// Stop when `|Δf| < rel_tol · max(|f|, 1)` between iterations.
    pub rel_tol: f64,
    /// Stop when `‖∇f‖ < grad_tol`.
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_evaluations: 100_000,
            rel_tol: 1e-9,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    RelativeChange,
    /// No descent step found at machine precision.
    Stalled,
    MaxEvaluations,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        self.termination != Termination::MaxEvaluations
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimize `f`, which returns the value and writes the gradient into its second argument.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    let mut iterations = 0;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);

    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];

    let termination = loop {
        if !fx.is_finite() {
            break Termination::Stalled;
        }
        if norm(&g) < opts.grad_tol {
            break Termination::GradientTolerance;
        }
        if evaluations >= opts.max_evaluations {
            break Termination::MaxEvaluations;
        }

        // two-loop recursion
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= alpha[k] * yi);
        }
        let gamma = history
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / norm(&g).max(1.0));
        dir.iter_mut().for_each(|d| *d *= gamma);
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let beta = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (alpha[k] - beta) * si);
        }

        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi / norm(&g).max(1.0));
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            x_new.iter_mut().zip(x.iter().zip(&dir)).for_each(|(xn, (xi, di))| *xn = xi + step * di);
            let f_try = f(&x_new, &mut g_new);
            evaluations += 1;
            if f_try.is_finite() && f_try <= fx + 1e-4 * step * slope {
                accepted = Some(f_try);
                break;
            }
            if evaluations >= opts.max_evaluations {
                break;
            }
            step *= 0.5;
        }

        let Some(f_new) = accepted else {
            if evaluations >= opts.max_evaluations {
                break Termination::MaxEvaluations;
            }
            if history.is_empty() {
                break Termination::Stalled;
            }
            history.clear();
            continue;
        };

        iterations += 1;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let change = (fx - f_new).abs();
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if change < opts.rel_tol * fx.abs().max(1.0) {
            break if norm(&g) < opts.grad_tol {
                Termination::GradientTolerance
            } else {
                Termination::RelativeChange
            };
        }
    };

    Minimum {
        x,
        f: fx,
        iterations,
        evaluations,
        termination,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let opts = LbfgsOptions { rel_tol: 0.0, grad_tol: 1e-10, ..LbfgsOptions::default() };
        let m = minimize(f, &[-1.2, 1.0], &opts);
        assert!(m.converged());
        assert!((m.x[0] - 1.0).abs() < 1e-8 && (m.x[1] - 1.0).abs() < 1e-8, "{:?}", m);
    }

    #[test]
    fn quadratic_converges_fast() {
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for (i, xi) in x.iter().enumerate() {
                let w = (i + 1) as f64;
                v += 0.5 * w * (xi - 1.0).powi(2);
                g[i] = w * (xi - 1.0);
            }
            v
        };
        let m = minimize(f, &[0.0; 8], &LbfgsOptions::default());
        assert!(m.converged());
        assert!(m.x.iter().all(|x| (x - 1.0).abs() < 1e-4), "{m:?}");
        assert!(m.evaluations < 200);
    }

    #[test]
    fn evaluation_budget_is_respected() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 1.0;
            x[0]
        };
        let opts = LbfgsOptions { max_evaluations: 30, ..LbfgsOptions::default() };
        let m = minimize(f, &[0.0], &opts);
        assert_eq!(m.termination, Termination::MaxEvaluations);
        assert!(m.evaluations <= 30);
        assert!(!m.converged());
    }
}
