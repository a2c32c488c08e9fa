//! Bivariate second-order latent growth model.
//!
//! Two constructs (B and H) are each measured at five waves by three
//! indicators. For construct `c`, wave `t` and indicator `j`:
//!
//! ```text
//! η[c,t]   = I[c] + time[t]·S[c] + ζ[c,t]          var(ζ[c,t]) = ψ[c,t]
//! y[c,t,j] = τ[c,j] + λ[c,j]·η[c,t] + ε[c,t,j]      var(ε[c,t,j]) = θ[c,t,j]
//! ```
//!
//! The growth factors `(I_B, S_B, I_H, S_H)` have mean `κ` and covariance `Φ`.
//! Loadings and intercepts are invariant over waves; the first indicator of each
//! construct is the marker (`λ = 1`, `τ = 0`).
//!
//! Observed columns are ordered construct-major, wave-minor, indicator-innermost:
//! `col = c·15 + t·3 + j`, named like `B_t1_y1`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Cholesky, Matrix};
use crate::{Error, Result};

pub const CONSTRUCTS: usize = 2;
pub const WAVES: usize = 5;
pub const INDICATORS: usize = 3;
pub const GROWTH_FACTORS: usize = 4;
pub const FIRST_ORDER_FACTORS: usize = CONSTRUCTS * WAVES;
pub const N_VARS: usize = CONSTRUCTS * WAVES * INDICATORS;

pub const CONSTRUCT_NAMES: [&str; CONSTRUCTS] = ["B", "H"];
pub const GROWTH_FACTOR_NAMES: [&str; GROWTH_FACTORS] = ["I_B", "S_B", "I_H", "S_H"];

pub const INTERCEPT_B: usize = 0;
pub const SLOPE_B: usize = 1;
pub const INTERCEPT_H: usize = 2;
pub const SLOPE_H: usize = 3;

#[inline]
pub const fn column(construct: usize, wave: usize, indicator: usize) -> usize {
    construct * WAVES * INDICATORS + wave * INDICATORS + indicator
}

#[inline]
pub const fn wave_of(col: usize) -> usize {
    (col % (WAVES * INDICATORS)) / INDICATORS
}

#[inline]
pub const fn construct_of(col: usize) -> usize {
    col / (WAVES * INDICATORS)
}

#[inline]
pub const fn indicator_of(col: usize) -> usize {
    col % INDICATORS
}

/// Index of the first-order factor `η[c,t]`.
#[inline]
pub const fn first_order(construct: usize, wave: usize) -> usize {
    construct * WAVES + wave
}

pub fn column_name(col: usize) -> String {
    format!(
        "{}_t{}_y{}",
        CONSTRUCT_NAMES[construct_of(col)],
        wave_of(col) + 1,
        indicator_of(col) + 1
    )
}

pub fn column_names() -> Vec<String> {
    (0..N_VARS).map(column_name).collect()
}

/// Generating (or fitted) parameters of the growth model.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationParams {
    /// Means of `(I_B, S_B, I_H, S_H)`.
    pub growth_means: [f64; GROWTH_FACTORS],
    pub growth_cov: [[f64; GROWTH_FACTORS]; GROWTH_FACTORS],
    pub time_scores: [f64; WAVES],
    /// `ψ[c][t]`, disturbance variance of each first-order factor.
    pub wave_residual_var: [[f64; WAVES]; CONSTRUCTS],
    pub loadings: [[f64; INDICATORS]; CONSTRUCTS],
    /// Residual variance of every observed column, in column order.
    pub indicator_residual_var: [f64; N_VARS],
    pub indicator_intercepts: [[f64; INDICATORS]; CONSTRUCTS],
}

/// Settings for [`PopulationParams::from_settings`].
///
/// The defaults are illustrative values chosen for this crate, not estimates
/// from any empirical study.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSettings {
    pub intercept_means: [f64; CONSTRUCTS],
    pub slope_means: [f64; CONSTRUCTS],
    pub intercept_variances: [f64; CONSTRUCTS],
    pub slope_variances: [f64; CONSTRUCTS],
    /// Within-construct intercept-slope correlation.
    pub intercept_slope_corr: [f64; CONSTRUCTS],
    /// Correlation of `I_B` with `I_H`.
    pub cross_intercept_corr: f64,
    /// Correlations of `I_B` with `S_H` and of `S_B` with `I_H`.
    pub cross_intercept_slope_corr: [f64; 2],
    pub slope_slope_corr: f64,
    pub wave_residual_var: f64,
    pub loadings: [f64; INDICATORS],
    pub indicator_intercepts: [f64; INDICATORS],
    /// Target reliability `λ²var(η) / var(y)` of every indicator; sets the residual variances.
    pub indicator_reliability: f64,
    pub time_scores: [f64; WAVES],
}

impl Default for PopulationSettings {
    fn default() -> Self {
        Self {
            intercept_means: [1.0, 1.0],
            slope_means: [0.2, 0.2],
            intercept_variances: [1.0, 1.0],
            slope_variances: [0.25, 0.25],
            intercept_slope_corr: [0.2, 0.2],
            cross_intercept_corr: 0.3,
            cross_intercept_slope_corr: [0.0, 0.0],
            slope_slope_corr: 0.3,
            wave_residual_var: 0.25,
            loadings: [1.0, 0.9, 0.8],
            indicator_intercepts: [0.0, 0.2, -0.1],
            indicator_reliability: 0.8,
            time_scores: [0.0, 1.0, 2.0, 3.0, 4.0],
        }
    }
}

impl Default for PopulationParams {
    fn default() -> Self {
        Self::from_settings(&PopulationSettings::default())
            .expect("default population settings are valid")
    }
}

impl PopulationParams {
    pub fn from_settings(s: &PopulationSettings) -> Result<Self> {
        if !(s.indicator_reliability > 0.0 && s.indicator_reliability <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "indicator reliability {} outside (0, 1]",
                s.indicator_reliability
            )));
        }
        let sd = [
            libm::sqrt(s.intercept_variances[0]),
            libm::sqrt(s.slope_variances[0]),
            libm::sqrt(s.intercept_variances[1]),
            libm::sqrt(s.slope_variances[1]),
        ];
        let mut corr = [[0.0; GROWTH_FACTORS]; GROWTH_FACTORS];
        let mut set = |a: usize, b: usize, r: f64| {
            corr[a][b] = r;
            corr[b][a] = r;
        };
        for a in 0..GROWTH_FACTORS {
            set(a, a, 1.0);
        }
        set(INTERCEPT_B, SLOPE_B, s.intercept_slope_corr[0]);
        set(INTERCEPT_H, SLOPE_H, s.intercept_slope_corr[1]);
        set(INTERCEPT_B, INTERCEPT_H, s.cross_intercept_corr);
        set(INTERCEPT_B, SLOPE_H, s.cross_intercept_slope_corr[0]);
        set(SLOPE_B, INTERCEPT_H, s.cross_intercept_slope_corr[1]);
        set(SLOPE_B, SLOPE_H, s.slope_slope_corr);
        let mut growth_cov = [[0.0; GROWTH_FACTORS]; GROWTH_FACTORS];
        for a in 0..GROWTH_FACTORS {
            for b in 0..GROWTH_FACTORS {
                growth_cov[a][b] = corr[a][b] * sd[a] * sd[b];
            }
        }

        let mut params = Self {
            growth_means: [
                s.intercept_means[0],
                s.slope_means[0],
                s.intercept_means[1],
                s.slope_means[1],
            ],
            growth_cov,
            time_scores: s.time_scores,
            wave_residual_var: [[s.wave_residual_var; WAVES]; CONSTRUCTS],
            loadings: [s.loadings; CONSTRUCTS],
            indicator_residual_var: [0.0; N_VARS],
            indicator_intercepts: [s.indicator_intercepts; CONSTRUCTS],
        };
        let eta_cov = params.first_order_cov();
        let noise_ratio = (1.0 - s.indicator_reliability) / s.indicator_reliability;
        for col in 0..N_VARS {
            let (c, t, j) = (construct_of(col), wave_of(col), indicator_of(col));
            let lambda = params.loadings[c][j];
            let f = first_order(c, t);
            params.indicator_residual_var[col] = lambda * lambda * eta_cov[(f, f)] * noise_ratio;
        }
        params.validate()?;
        Ok(params)
    }

    /// `cov(S_B, S_H) / sqrt(var(S_B)·var(S_H))`.
    pub fn slope_slope_corr(&self) -> f64 {
        let g = &self.growth_cov;
        g[SLOPE_B][SLOPE_H] / libm::sqrt(g[SLOPE_B][SLOPE_B] * g[SLOPE_H][SLOPE_H])
    }

    /// Sets the slope-slope covariance so that the implied correlation is `rho`.
    pub fn with_slope_slope_corr(mut self, rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidParams(format!(
                "slope-slope correlation {rho} outside (-1, 1)"
            )));
        }
        let g = &mut self.growth_cov;
        let cov = rho * libm::sqrt(g[SLOPE_B][SLOPE_B] * g[SLOPE_H][SLOPE_H]);
        g[SLOPE_B][SLOPE_H] = cov;
        g[SLOPE_H][SLOPE_B] = cov;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.growth_cov;
        for a in 0..GROWTH_FACTORS {
            for b in 0..a {
                if g[a][b] != g[b][a] {
                    return Err(Error::InvalidParams(
                        "growth covariance is not symmetric".into(),
                    ));
                }
            }
        }
        Cholesky::new(&self.growth_cov_matrix())
            .map_err(|_| Error::NotPositiveDefinite("growth factor covariance"))?;
        if self
            .time_scores
            .windows(2)
            .any(|w| w[1].partial_cmp(&w[0]) != Some(core::cmp::Ordering::Greater))
        {
            return Err(Error::InvalidParams(
                "time scores must be strictly increasing".into(),
            ));
        }
        let variances = self
            .wave_residual_var
            .iter()
            .flatten()
            .chain(self.indicator_residual_var.iter());
        for &v in variances {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "residual variance {v} is negative"
                )));
            }
        }
        let all_finite = self
            .growth_means
            .iter()
            .chain(self.loadings.iter().flatten())
            .chain(self.indicator_intercepts.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn growth_cov_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(GROWTH_FACTORS, GROWTH_FACTORS);
        for a in 0..GROWTH_FACTORS {
            for b in 0..GROWTH_FACTORS {
                m[(a, b)] = self.growth_cov[a][b];
            }
        }
        m
    }

    /// `B`: 10×4 map from growth factors to first-order factors.
    pub fn growth_basis(&self) -> Matrix {
        let mut b = Matrix::zeros(FIRST_ORDER_FACTORS, GROWTH_FACTORS);
        for c in 0..CONSTRUCTS {
            for t in 0..WAVES {
                let f = first_order(c, t);
                b[(f, 2 * c)] = 1.0;
                b[(f, 2 * c + 1)] = self.time_scores[t];
            }
        }
        b
    }

    /// `Λ`: 30×10 loading matrix.
    pub fn loading_matrix(&self) -> Matrix {
        let mut l = Matrix::zeros(N_VARS, FIRST_ORDER_FACTORS);
        for col in 0..N_VARS {
            let (c, t, j) = (construct_of(col), wave_of(col), indicator_of(col));
            l[(col, first_order(c, t))] = self.loadings[c][j];
        }
        l
    }

    /// Mean of the first-order factors, `B κ`.
    pub fn first_order_mean(&self) -> Vec<f64> {
        self.growth_basis().mul_vec(&self.growth_means)
    }

    /// Covariance of the first-order factors, `B Φ Bᵀ + Ψ`.
    pub fn first_order_cov(&self) -> Matrix {
        let b = self.growth_basis();
        let mut c = b.matmul(&self.growth_cov_matrix()).matmul(&b.transpose());
        for k in 0..CONSTRUCTS {
            for t in 0..WAVES {
                let f = first_order(k, t);
                c[(f, f)] += self.wave_residual_var[k][t];
            }
        }
        c
    }

    /// Implied moments without any definiteness check.
    pub fn implied_moments(&self) -> ModelMoments {
        let lambda = self.loading_matrix();
        let eta_mean = self.first_order_mean();
        let mut mu = lambda.mul_vec(&eta_mean);
        for (col, m) in mu.iter_mut().enumerate() {
            *m += self.indicator_intercepts[construct_of(col)][indicator_of(col)];
        }
        let mut sigma = lambda
            .matmul(&self.first_order_cov())
            .matmul(&lambda.transpose());
        for col in 0..N_VARS {
            sigma[(col, col)] += self.indicator_residual_var[col];
            for other in 0..col {
                let v = 0.5 * (sigma[(col, other)] + sigma[(other, col)]);
                sigma[(col, other)] = v;
                sigma[(other, col)] = v;
            }
        }
        ModelMoments { mu, sigma }
    }
}

/// Model-implied mean vector and covariance matrix of the 30 observed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMoments {
    pub mu: Vec<f64>,
    pub sigma: Matrix,
}

pub fn build_moments(params: &PopulationParams) -> Result<ModelMoments> {
    Cholesky::new(&params.growth_cov_matrix())
        .map_err(|_| Error::NotPositiveDefinite("growth factor covariance"))?;
    let moments = params.implied_moments();
    Cholesky::new(&moments.sigma)
        .map_err(|_| Error::NotPositiveDefinite("implied observed covariance"))?;
    Ok(moments)
}

/// `n × 30` observations with a missingness mask (`true` = observed).
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    column_names: Vec<String>,
}

impl DataMatrix {
    /// Complete data from row-major values.
    pub fn complete(n_cols: usize, values: Vec<f64>, column_names: Vec<String>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::with_mask(n_cols, values, mask, column_names)
    }

    pub fn with_mask(
        n_cols: usize,
        values: Vec<f64>,
        mask: Vec<bool>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if n_cols == 0 || !values.len().is_multiple_of(n_cols) {
            return Err(Error::LengthMismatch {
                expected: n_cols,
                got: values.len(),
            });
        }
        if mask.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: values.len(),
                got: mask.len(),
            });
        }
        if column_names.len() != n_cols {
            return Err(Error::LengthMismatch {
                expected: n_cols,
                got: column_names.len(),
            });
        }
        Ok(Self {
            n_rows: values.len() / n_cols,
            n_cols,
            values,
            mask,
            column_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn row_mask(&self, r: usize) -> &[bool] {
        &self.mask[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub(crate) fn mask_mut(&mut self) -> &mut [bool] {
        &mut self.mask
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Observed value, or `None` for a masked cell.
    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let i = r * self.n_cols + c;
        self.mask[i].then(|| self.values[i])
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    /// Row-wise concatenation.
    pub fn stack(&self, other: &DataMatrix) -> Result<DataMatrix> {
        if other.n_cols != self.n_cols {
            return Err(Error::LengthMismatch {
                expected: self.n_cols,
                got: other.n_cols,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let mut mask = self.mask.clone();
        mask.extend_from_slice(&other.mask);
        Self::with_mask(self.n_cols, values, mask, self.column_names.clone())
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        let mut mask = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
            mask.extend_from_slice(self.row_mask(r));
        }
        Self {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
            mask,
            column_names: self.column_names.clone(),
        }
    }
}

/// `n` independent draws from `N(mu, sigma)` as `mu + L z`.
///
/// Standard normals are consumed row by row, 30 per row, so the result is a
/// pure function of the stream state.
pub fn generate_dataset<R: Rng + ?Sized>(
    moments: &ModelMoments,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::InsufficientSample { needed: 1, got: 0 });
    }
    let chol = Cholesky::new(&moments.sigma)
        .map_err(|_| Error::NotPositiveDefinite("implied observed covariance"))?;
    let p = moments.mu.len();
    let mut values = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let x = chol.lower_mul(&z);
        values.extend(x.iter().zip(&moments.mu).map(|(a, m)| a + m));
    }
    let names = if p == N_VARS {
        column_names()
    } else {
        (0..p).map(|i| format!("v{}", i + 1)).collect()
    };
    DataMatrix::complete(p, values, names)
}
