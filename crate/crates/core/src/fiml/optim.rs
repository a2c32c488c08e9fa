//! Dense BFGS minimizer with a strong-Wolfe line search.
//!
//! The objective may signal an infeasible point by returning a huge finite
//! value; the line search then simply backtracks.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Stop when `max |∇f| < grad_tol`.
    pub grad_tol: f64,
    /// Stop when `|Δf| < rel_f_tol · max(|f|, 1)` after an accepted step.
    pub rel_f_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            grad_tol: 1e-5,
            rel_f_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    FunctionChange,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

impl OptimOutcome {
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::Gradient | Termination::FunctionChange
        )
    }

    pub fn grad_max_norm(&self) -> f64 {
        max_norm(&self.grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_EVALS: usize = 40;

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    evals: usize,
    trial: Vec<f64>,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> LineSearch<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        self.evals += 1;
        for ((t, x), d) in self.trial.iter_mut().zip(self.x).zip(self.dir) {
            *t = x + alpha * d;
        }
        let mut g = vec![0.0; self.x.len()];
        let f = (self.objective)(&self.trial, &mut g);
        let f = if f.is_finite() { f } else { f64::MAX };
        let slope = dot(&g, self.dir);
        Point { alpha, f, g, slope }
    }

    fn sufficient(&self, p: &Point) -> bool {
        p.f <= self.f0 + C1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.abs() <= -C2 * self.slope0
    }

    /// Returns the accepted point, or the best sufficient-decrease point seen.
    fn run(&mut self, first_alpha: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = first_alpha;
        let mut first = true;
        loop {
            let p = self.eval(alpha);
            if !self.sufficient(&p) || (!first && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Some(p);
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            if self.evals >= MAX_LINE_EVALS {
                return Some(p);
            }
            first = false;
            alpha = p.alpha * 2.0;
            prev = p;
        }
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        loop {
            if self.evals >= MAX_LINE_EVALS
                || (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.max(1.0)
            {
                return (lo.alpha > 0.0).then_some(lo);
            }
            let width = hi.alpha - lo.alpha;
            // minimizer of the quadratic through (lo.f, lo.slope) and hi.f
            let denom = 2.0 * (hi.f - lo.f - lo.slope * width);
            let mut alpha = if denom > 0.0 && hi.f < f64::MAX {
                lo.alpha - lo.slope * width * width / denom
            } else {
                lo.alpha + 0.5 * width
            };
            let (a, b) = if lo.alpha < hi.alpha {
                (lo.alpha, hi.alpha)
            } else {
                (hi.alpha, lo.alpha)
            };
            let guard = 0.1 * (b - a);
            if !(alpha >= a + guard && alpha <= b - guard) {
                alpha = lo.alpha + 0.5 * width;
            }
            let p = self.eval(alpha);
            if !self.sufficient(&p) || p.f >= lo.f {
                hi = p;
            } else {
                if self.curvature(&p) {
                    return Some(p);
                }
                if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
    }
}

/// Minimizes `objective(x, grad) -> f`, which must fill `grad`.
pub fn minimize<F>(mut objective: F, x0: &[f64], opts: &OptimOptions) -> OptimOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g);
    let mut h = identity(n);
    let mut fresh_h = true;
    let mut iterations = 0;

    let outcome = |x: Vec<f64>, f: f64, grad: Vec<f64>, iterations, termination| OptimOutcome {
        x,
        f,
        grad,
        iterations,
        termination,
    };

    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return outcome(x, f, g, 0, Termination::NonFinite);
    }

    loop {
        if max_norm(&g) < opts.grad_tol {
            return outcome(x, f, g, iterations, Termination::Gradient);
        }
        if iterations >= opts.max_iterations {
            return outcome(x, f, g, iterations, Termination::MaxIterations);
        }
        iterations += 1;

        let mut dir: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        let mut slope = dot(&g, &dir);
        if slope.is_nan() || slope >= 0.0 {
            h = identity(n);
            fresh_h = true;
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let first_alpha = if fresh_h {
            (1.0 / max_norm(&g)).min(1.0)
        } else {
            1.0
        };

        let mut ls = LineSearch {
            objective: &mut objective,
            x: &x,
            dir: &dir,
            f0: f,
            slope0: slope,
            evals: 0,
            trial: vec![0.0; n],
        };
        let accepted = match ls.run(first_alpha) {
            Some(p) => p,
            None if !fresh_h => {
                // retry once along steepest descent
                h = identity(n);
                fresh_h = true;
                continue;
            }
            None => return outcome(x, f, g, iterations, Termination::LineSearchFailed),
        };

        let s: Vec<f64> = dir.iter().map(|d| accepted.alpha * d).collect();
        let y: Vec<f64> = accepted.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let f_old = f;
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        f = accepted.f;
        g = accepted.g;
        if g.iter().any(|v| !v.is_finite()) {
            return outcome(x, f, g, iterations, Termination::NonFinite);
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * libm::sqrt(dot(&s, &s) * dot(&y, &y)) {
            if fresh_h {
                let scale = sy / dot(&y, &y);
                h = identity(n);
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] = scale;
                }
                fresh_h = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }

        if (f_old - f).abs() < opts.rel_f_tol * f_old.abs().max(1.0) {
            let term = if max_norm(&g) < opts.grad_tol {
                Termination::Gradient
            } else {
                Termination::FunctionChange
            };
            return outcome(x, f, g, iterations, term);
        }
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row
        })
        .collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1 / sᵀy`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i][j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
