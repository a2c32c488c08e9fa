//! Pattern-wise multivariate normal log-likelihood over observed cells.
//!
//! Rows sharing a missingness pattern are reduced to their count, mean and
//! (biased) cross-product matrix on the observed columns. For a pattern with
//! `n` rows, `k` observed columns, implied moments `(μ, Σ)` restricted to those
//! columns, sample mean `ȳ` and scatter `S`:
//!
//! ```text
//! ℓ = −n/2 · [k·ln 2π + ln|Σ| + tr(Σ⁻¹ (S + d dᵀ))],   d = ȳ − μ
//! ```
//!
//! which equals the sum of the casewise log-densities.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{
    cov_index, free_slot, psi_index, ModelSpec, ParamVector, INTERCEPTS, LOADINGS, MEANS, N_PARAMS,
    THETA,
};
use crate::lgm::{
    construct_of, first_order, indicator_of, wave_of, DataMatrix, ModelMoments, CONSTRUCTS,
    GROWTH_FACTORS, N_VARS, WAVES,
};
use crate::linalg::{Cholesky, Matrix};
use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log-likelihood reported when an implied covariance block is not positive definite.
pub const BARRIER_LOGLIK: f64 = -1.0e12;

/// Sufficient statistics of the rows sharing one missingness pattern.
#[derive(Debug, Clone)]
pub struct Pattern {
    pub observed: Vec<usize>,
    pub n: usize,
    pub mean: Vec<f64>,
    /// `(1/n) Σ (y − ȳ)(y − ȳ)ᵀ` on the observed columns.
    pub scatter: Matrix,
}

#[derive(Debug, Clone)]
pub struct PatternStats {
    n_vars: usize,
    n_rows: usize,
    patterns: Vec<Pattern>,
}

impl PatternStats {
    /// Groups rows by identical mask.
    pub fn new(data: &DataMatrix) -> Result<Self> {
        let mut groups: BTreeMap<&[bool], Vec<usize>> = BTreeMap::new();
        for r in 0..data.n_rows() {
            groups.entry(data.row_mask(r)).or_default().push(r);
        }
        Self::from_groups(data, groups.into_values())
    }

    /// One group per row; same likelihood, no pooling.
    pub fn per_row(data: &DataMatrix) -> Result<Self> {
        Self::from_groups(data, (0..data.n_rows()).map(|r| vec![r]))
    }

    fn from_groups(data: &DataMatrix, groups: impl Iterator<Item = Vec<usize>>) -> Result<Self> {
        let mut patterns = Vec::new();
        for rows in groups {
            let mask = data.row_mask(rows[0]);
            let observed: Vec<usize> = (0..data.n_cols()).filter(|&c| mask[c]).collect();
            if observed.is_empty() {
                return Err(Error::RowWithoutData(rows[0]));
            }
            let k = observed.len();
            let n = rows.len();
            let mut mean = vec![0.0; k];
            for &r in &rows {
                let row = data.row(r);
                for (m, &c) in mean.iter_mut().zip(&observed) {
                    *m += row[c];
                }
            }
            for m in mean.iter_mut() {
                *m /= n as f64;
            }
            let mut scatter = Matrix::zeros(k, k);
            let mut dev = vec![0.0; k];
            for &r in &rows {
                let row = data.row(r);
                for (i, &c) in observed.iter().enumerate() {
                    dev[i] = row[c] - mean[i];
                }
                for i in 0..k {
                    for j in 0..=i {
                        scatter[(i, j)] += dev[i] * dev[j];
                    }
                }
            }
            for i in 0..k {
                for j in 0..=i {
                    let v = scatter[(i, j)] / n as f64;
                    scatter[(i, j)] = v;
                    scatter[(j, i)] = v;
                }
            }
            patterns.push(Pattern {
                observed,
                n,
                mean,
                scatter,
            });
        }
        Ok(Self {
            n_vars: data.n_cols(),
            n_rows: data.n_rows(),
            patterns,
        })
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_observed_cells(&self) -> usize {
        self.patterns.iter().map(|p| p.n * p.observed.len()).sum()
    }
}

/// Log-likelihood and its derivatives with respect to the implied moments.
#[derive(Debug, Clone)]
pub struct MomentsEval {
    pub loglik: f64,
    /// Set when some implied covariance block was not positive definite; the
    /// value is then [`BARRIER_LOGLIK`] and the derivatives are zero.
    pub barrier: bool,
    pub d_mu: Vec<f64>,
    /// `∂ℓ/∂Σ` with every entry of `Σ` treated as free (symmetric).
    pub d_sigma: Matrix,
}

pub fn moments_loglik(moments: &ModelMoments, stats: &PatternStats, gradient: bool) -> MomentsEval {
    let p = stats.n_vars;
    let mut out = MomentsEval {
        loglik: 0.0,
        barrier: false,
        d_mu: vec![0.0; p],
        d_sigma: Matrix::zeros(p, p),
    };
    for pat in &stats.patterns {
        let k = pat.observed.len();
        let sigma = moments.sigma.select(&pat.observed);
        let chol = match Cholesky::new(&sigma) {
            Ok(c) => c,
            Err(_) => {
                return MomentsEval {
                    loglik: BARRIER_LOGLIK,
                    barrier: true,
                    d_mu: vec![0.0; p],
                    d_sigma: Matrix::zeros(p, p),
                };
            }
        };
        let d: Vec<f64> = pat
            .observed
            .iter()
            .zip(&pat.mean)
            .map(|(&c, m)| m - moments.mu[c])
            .collect();
        let n = pat.n as f64;
        let inv = chol.inverse();
        // W = S + d dᵀ
        let mut w = pat.scatter.clone();
        for i in 0..k {
            for j in 0..k {
                w[(i, j)] += d[i] * d[j];
            }
        }
        let inv_w = inv.matmul(&w);
        let trace: f64 = (0..k).map(|i| inv_w[(i, i)]).sum();
        out.loglik += -0.5 * n * (k as f64 * LN_2PI + chol.log_det() + trace);

        if gradient {
            let inv_d = inv.mul_vec(&d);
            for (i, &c) in pat.observed.iter().enumerate() {
                out.d_mu[c] += n * inv_d[i];
            }
            // −n/2 (Σ⁻¹ − Σ⁻¹ W Σ⁻¹)
            let inv_w_inv = inv_w.matmul(&inv);
            for (i, &ci) in pat.observed.iter().enumerate() {
                for (j, &cj) in pat.observed.iter().enumerate() {
                    out.d_sigma[(ci, cj)] += -0.5 * n * (inv[(i, j)] - inv_w_inv[(i, j)]);
                }
            }
        }
    }
    out
}

/// Chain rule from moment derivatives to the 62 model parameters.
pub fn chain_to_params(
    theta: &ParamVector,
    spec: &ModelSpec,
    d_mu: &[f64],
    d_sigma: &Matrix,
) -> Vec<f64> {
    let pop = theta.to_population(spec);
    let lambda = pop.loading_matrix();
    let basis = pop.growth_basis();
    let eta_cov = pop.first_order_cov();
    let eta_mean = basis.mul_vec(&pop.growth_means);
    let mut grad = vec![0.0; N_PARAMS];

    // μ = τ + Λ B κ
    let lt_g = lambda.transpose().mul_vec(d_mu);
    let d_kappa = basis.transpose().mul_vec(&lt_g);
    grad[MEANS..MEANS + GROWTH_FACTORS].copy_from_slice(&d_kappa);
    for col in 0..N_VARS {
        let j = indicator_of(col);
        if j > 0 {
            grad[INTERCEPTS + free_slot(construct_of(col), j)] += d_mu[col];
        }
    }

    // Σ = Λ C Λᵀ + Θ
    let g_lambda = d_sigma.matmul(&lambda);
    let h = lambda.transpose().matmul(&g_lambda);
    for c in 0..CONSTRUCTS {
        for t in 0..WAVES {
            let f = first_order(c, t);
            grad[psi_index(c, t)] = h[(f, f)];
        }
    }
    let k = basis.transpose().matmul(&h).matmul(&basis);
    for a in 0..GROWTH_FACTORS {
        for b in 0..=a {
            grad[cov_index(a, b)] = if a == b {
                k[(a, a)]
            } else {
                k[(a, b)] + k[(b, a)]
            };
        }
    }
    let g_lambda_c = g_lambda.matmul(&eta_cov);
    for col in 0..N_VARS {
        let (c, j) = (construct_of(col), indicator_of(col));
        if j == 0 {
            continue;
        }
        let f = first_order(c, wave_of(col));
        grad[LOADINGS + free_slot(c, j)] += 2.0 * g_lambda_c[(col, f)] + d_mu[col] * eta_mean[f];
    }
    for col in 0..N_VARS {
        grad[THETA + col] = d_sigma[(col, col)];
    }
    grad
}

/// Log-likelihood and gradient of the growth model at `theta`.
#[derive(Debug, Clone)]
pub struct LoglikEval {
    pub loglik: f64,
    pub barrier: bool,
    pub gradient: Vec<f64>,
}

pub fn evaluate(
    theta: &ParamVector,
    spec: &ModelSpec,
    stats: &PatternStats,
    gradient: bool,
) -> LoglikEval {
    let moments = theta.to_population(spec).implied_moments();
    let m = moments_loglik(&moments, stats, gradient);
    let gradient = if gradient && !m.barrier {
        chain_to_params(theta, spec, &m.d_mu, &m.d_sigma)
    } else {
        vec![0.0; N_PARAMS]
    };
    LoglikEval {
        loglik: m.loglik,
        barrier: m.barrier,
        gradient,
    }
}

/// Pattern-wise FIML log-likelihood of the growth model.
///
/// A non-positive-definite implied covariance returns [`BARRIER_LOGLIK`].
pub fn pattern_loglik(theta: &ParamVector, spec: &ModelSpec, data: &DataMatrix) -> Result<f64> {
    if data.n_cols() != N_VARS {
        return Err(Error::LengthMismatch {
            expected: N_VARS,
            got: data.n_cols(),
        });
    }
    let stats = PatternStats::new(data)?;
    Ok(evaluate(theta, spec, &stats, false).loglik)
}
