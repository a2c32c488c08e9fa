//! Full-information maximum likelihood fitting of the growth model.
//!
//! The objective is the pattern-wise normal log-likelihood of the observed cells
//! ([`loglik`]), maximized with BFGS ([`optim`]) on the raw parameter scale.
//! Points whose implied covariance is not positive definite get a finite
//! barrier value, so negative variance estimates remain reachable and are
//! reported as inadmissible rather than hidden by a transform.

pub mod loglik;
pub mod optim;
mod params;
mod start;

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

pub use loglik::{pattern_loglik, PatternStats, BARRIER_LOGLIK};
pub use optim::{OptimOptions, Termination};
pub use params::{
    evaluate as evaluate_param, param_name, param_names, resolve as resolve_param, true_value,
    ModelSpec, ParamVector, Quantity, N_PARAMS, SLOPE_SLOPE_CORR,
};
pub use start::data_driven_start;

use crate::lgm::{DataMatrix, GROWTH_FACTORS, N_VARS};
use crate::linalg::Cholesky;
use crate::{Error, Result};
use params::cov_index;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub optim: OptimOptions,
    /// Jittered restarts after a non-converged attempt.
    pub max_restarts: usize,
    /// Relative size of the restart jitter.
    pub jitter: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optim: OptimOptions::default(),
            max_restarts: 3,
            jitter: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    /// Total log-likelihood at `theta_hat`.
    pub loglik: f64,
    pub converged: bool,
    pub admissible: bool,
    pub n_iterations: usize,
    pub n_restarts: usize,
    /// Max-norm of the gradient of the per-row mean log-likelihood.
    pub gradient_norm: f64,
}

/// Variances non-negative, growth correlations within `[−1, 1]`, implied
/// covariance positive definite.
pub fn is_admissible(theta: &ParamVector, spec: &ModelSpec) -> bool {
    if ParamVector::variance_indices().any(|i| theta.0[i].is_nan() || theta.0[i] < 0.0) {
        return false;
    }
    for a in 0..GROWTH_FACTORS {
        for b in 0..a {
            let (va, vb) = (theta.0[cov_index(a, a)], theta.0[cov_index(b, b)]);
            let cov = theta.0[cov_index(a, b)];
            if va == 0.0 || vb == 0.0 {
                if cov != 0.0 {
                    return false;
                }
                continue;
            }
            if (cov / libm::sqrt(va * vb)).abs() > 1.0 {
                return false;
            }
        }
    }
    Cholesky::new(&theta.to_population(spec).implied_moments().sigma).is_ok()
}

fn jittered<R: Rng + ?Sized>(start: &ParamVector, scale: f64, rng: &mut R) -> ParamVector {
    let mut v = start.0.clone();
    for (i, x) in v.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        if ParamVector::is_variance(i) {
            *x *= libm::exp(scale * z);
        } else {
            *x = *x * (1.0 + scale * z) + 0.1 * scale * z;
        }
    }
    ParamVector(v)
}

fn attempt(
    stats: &PatternStats,
    spec: &ModelSpec,
    start: &ParamVector,
    opts: &OptimOptions,
) -> optim::OptimOutcome {
    let rows = stats.n_rows() as f64;
    let objective = |x: &[f64], grad: &mut [f64]| {
        let eval = loglik::evaluate(&ParamVector(x.to_vec()), spec, stats, true);
        for (g, d) in grad.iter_mut().zip(&eval.gradient) {
            *g = -d / rows;
        }
        -eval.loglik / rows
    };
    optim::minimize(objective, start.as_slice(), opts)
}

/// Maximizes the FIML log-likelihood.
///
/// Starts from `start` or from [`data_driven_start`]; after a non-converged
/// attempt, restarts from a jittered copy of the start, up to
/// `max_restarts` times. A fit that never converges is returned with
/// `converged = false` and the best parameters seen.
pub fn fit<R: Rng + ?Sized>(
    data: &DataMatrix,
    spec: &ModelSpec,
    start: Option<&ParamVector>,
    options: &FitOptions,
    rng: &mut R,
) -> Result<FitResult> {
    if data.n_cols() != N_VARS {
        return Err(Error::LengthMismatch {
            expected: N_VARS,
            got: data.n_cols(),
        });
    }
    let stats = PatternStats::new(data)?;
    if data.n_rows() < N_PARAMS {
        log::warn!(
            "fitting {} free parameters to {} rows; the information matrix may be singular",
            N_PARAMS,
            data.n_rows()
        );
    }
    let base = match start {
        Some(s) => s.clone(),
        None => data_driven_start(data, spec),
    };

    let mut best: Option<(optim::OptimOutcome, usize)> = None;
    for restart in 0..=options.max_restarts {
        let init = if restart == 0 {
            base.clone()
        } else {
            jittered(&base, options.jitter, rng)
        };
        let out = attempt(&stats, spec, &init, &options.optim);
        let converged = out.converged();
        let better = match &best {
            None => true,
            Some((b, _)) => out.f < b.f,
        };
        if better {
            best = Some((out, restart));
        }
        if converged {
            break;
        }
    }
    let (out, restarts) = best.expect("at least one attempt");
    let rows = stats.n_rows() as f64;
    let theta_hat = ParamVector(out.x.clone());
    let admissible = is_admissible(&theta_hat, spec);
    Ok(FitResult {
        loglik: -out.f * rows,
        converged: out.converged(),
        admissible,
        n_iterations: out.iterations,
        n_restarts: restarts,
        gradient_norm: out.grad_max_norm(),
        theta_hat,
    })
}

/// Named quantity from a converged fit; see [`resolve_param`] for names.
pub fn extract_param(fit: &FitResult, name: &str) -> Result<f64> {
    if !fit.converged {
        return Err(Error::NonConverged);
    }
    params::evaluate(&fit.theta_hat, name)
}

/// Gradient of the total log-likelihood, for diagnostics and checks.
pub fn loglik_gradient(
    theta: &ParamVector,
    spec: &ModelSpec,
    stats: &PatternStats,
) -> (f64, Vec<f64>) {
    let e = loglik::evaluate(theta, spec, stats, true);
    (e.loglik, e.gradient)
}
