//! Method-of-moments starting values from available-case statistics.
//!
//! Marker indicators carry the growth structure: their cross-wave covariances
//! are regressed on the time-score polynomial to recover the growth covariance,
//! loadings come from cross-wave covariance ratios, and the remaining variance
//! is split between the disturbance and the indicator residuals.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{
    cov_index, free_slot, psi_index, ModelSpec, ParamVector, INTERCEPTS, LOADINGS, MEANS, N_PARAMS,
    THETA,
};
use crate::lgm::{column, first_order, DataMatrix, CONSTRUCTS, GROWTH_FACTORS, INDICATORS, WAVES};
use crate::linalg::{Cholesky, Matrix};

/// Pairwise available-case means and covariances.
struct PairwiseMoments {
    mean: Vec<f64>,
    cov: Matrix,
}

impl PairwiseMoments {
    fn new(data: &DataMatrix) -> Self {
        let p = data.n_cols();
        let mut mean = vec![0.0; p];
        let mut count = vec![0usize; p];
        for r in 0..data.n_rows() {
            for c in 0..p {
                if let Some(v) = data.get(r, c) {
                    mean[c] += v;
                    count[c] += 1;
                }
            }
        }
        for c in 0..p {
            mean[c] = if count[c] > 0 {
                mean[c] / count[c] as f64
            } else {
                0.0
            };
        }
        let mut cov = Matrix::zeros(p, p);
        let mut pairs = Matrix::zeros(p, p);
        for r in 0..data.n_rows() {
            let row = data.row(r);
            let mask = data.row_mask(r);
            for a in 0..p {
                if !mask[a] {
                    continue;
                }
                let da = row[a] - mean[a];
                for b in 0..=a {
                    if mask[b] {
                        cov[(a, b)] += da * (row[b] - mean[b]);
                        pairs[(a, b)] += 1.0;
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..=a {
                let n = pairs[(a, b)];
                let v = if n > 1.0 {
                    cov[(a, b)] / (n - 1.0)
                } else {
                    0.0
                };
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        Self { mean, cov }
    }
}

/// Least squares via normal equations; `None` when ill-posed.
fn least_squares(rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let k = rows.first()?.0.len();
    let mut xtx = Matrix::zeros(k, k);
    let mut xty = vec![0.0; k];
    for (x, y) in rows {
        for i in 0..k {
            xty[i] += x[i] * y;
            for j in 0..k {
                xtx[(i, j)] += x[i] * x[j];
            }
        }
    }
    let sol = Cholesky::new(&xtx).ok()?.solve(&xty);
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

fn positive_or(v: f64, floor: f64) -> f64 {
    if v.is_finite() && v > floor {
        v
    } else {
        floor
    }
}

pub fn data_driven_start(data: &DataMatrix, spec: &ModelSpec) -> ParamVector {
    let m = PairwiseMoments::new(data);
    let s = &spec.time_scores;
    let mut v = vec![0.0; N_PARAMS];
    let mut loadings = [[1.0; INDICATORS]; CONSTRUCTS];

    for c in 0..CONSTRUCTS {
        let marker = |t: usize| column(c, t, 0);
        for j in 1..INDICATORS {
            let (mut num, mut den) = (0.0, 0.0);
            for t in 0..WAVES {
                for u in 0..WAVES {
                    if t != u {
                        num += m.cov[(column(c, t, j), marker(u))];
                        den += m.cov[(marker(t), marker(u))];
                    }
                }
            }
            let l = num / den;
            loadings[c][j] = if l.is_finite() && l > 0.05 && l < 20.0 {
                l
            } else {
                1.0
            };
            let tau = (0..WAVES)
                .map(|t| m.mean[column(c, t, j)] - loadings[c][j] * m.mean[marker(t)])
                .sum::<f64>()
                / WAVES as f64;
            v[LOADINGS + free_slot(c, j)] = loadings[c][j];
            v[INTERCEPTS + free_slot(c, j)] = tau;
        }

        let mean_rows: Vec<_> = (0..WAVES)
            .map(|t| (vec![1.0, s[t]], m.mean[marker(t)]))
            .collect();
        let kappa = least_squares(&mean_rows).unwrap_or_else(|| vec![m.mean[marker(0)], 0.0]);
        v[MEANS + 2 * c] = kappa[0];
        v[MEANS + 2 * c + 1] = kappa[1];

        let mut cov_rows = Vec::new();
        for t in 0..WAVES {
            for u in 0..t {
                cov_rows.push((
                    vec![1.0, s[t] + s[u], s[t] * s[u]],
                    m.cov[(marker(t), marker(u))],
                ));
            }
        }
        let marker_var = m.cov[(marker(0), marker(0))].max(1e-6);
        let phi = least_squares(&cov_rows)
            .unwrap_or_else(|| vec![0.5 * marker_var, 0.0, 0.05 * marker_var]);
        let (i, sl) = (2 * c, 2 * c + 1);
        v[cov_index(i, i)] = positive_or(phi[0], 0.05 * marker_var);
        v[cov_index(sl, i)] = phi[1];
        v[cov_index(sl, sl)] = positive_or(phi[2], 0.01 * marker_var);
    }

    let mut cross_rows = Vec::new();
    for t in 0..WAVES {
        for u in 0..WAVES {
            cross_rows.push((
                vec![1.0, s[u], s[t], s[t] * s[u]],
                m.cov[(column(0, t, 0), column(1, u, 0))],
            ));
        }
    }
    if let Some(x) = least_squares(&cross_rows) {
        use crate::lgm::{INTERCEPT_B, INTERCEPT_H, SLOPE_B, SLOPE_H};
        v[cov_index(INTERCEPT_B, INTERCEPT_H)] = x[0];
        v[cov_index(INTERCEPT_B, SLOPE_H)] = x[1];
        v[cov_index(SLOPE_B, INTERCEPT_H)] = x[2];
        v[cov_index(SLOPE_B, SLOPE_H)] = x[3];
    }
    shrink_to_positive_definite(&mut v);

    let theta = ParamVector(v);
    let growth_part = theta.to_population(spec);
    let basis = growth_part.growth_basis();
    let implied = basis
        .matmul(&growth_part.growth_cov_matrix())
        .matmul(&basis.transpose());
    let mut v = theta.0;
    for c in 0..CONSTRUCTS {
        for t in 0..WAVES {
            let f = first_order(c, t);
            let y0 = column(c, t, 0);
            // same-wave covariance of the marker with the other indicators estimates var(η)
            let eta_var = (1..INDICATORS)
                .map(|j| m.cov[(y0, column(c, t, j))] / loadings[c][j])
                .sum::<f64>()
                / (INDICATORS - 1) as f64;
            let total = m.cov[(y0, y0)].max(1e-6);
            let psi = positive_or(eta_var - implied[(f, f)], 0.05 * total);
            v[psi_index(c, t)] = psi;
            let eta_var = implied[(f, f)] + psi;
            for j in 0..INDICATORS {
                let col = column(c, t, j);
                let var = m.cov[(col, col)].max(1e-6);
                let l = loadings[c][j];
                v[THETA + col] = positive_or(var - l * l * eta_var, 0.05 * var);
            }
        }
    }
    ParamVector(v)
}

/// Shrinks the growth correlations toward zero until `Φ` factorizes.
fn shrink_to_positive_definite(v: &mut [f64]) {
    for _ in 0..50 {
        let mut phi = Matrix::zeros(GROWTH_FACTORS, GROWTH_FACTORS);
        for a in 0..GROWTH_FACTORS {
            for b in 0..GROWTH_FACTORS {
                phi[(a, b)] = v[cov_index(a, b)];
            }
        }
        if Cholesky::new(&phi).is_ok() {
            return;
        }
        for a in 0..GROWTH_FACTORS {
            for b in 0..a {
                v[cov_index(a, b)] *= 0.8;
            }
        }
    }
    for a in 0..GROWTH_FACTORS {
        for b in 0..a {
            v[cov_index(a, b)] = 0.0;
        }
    }
}
