use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::lgm::{
    column_name, first_order, PopulationParams, CONSTRUCTS, CONSTRUCT_NAMES, GROWTH_FACTORS,
    GROWTH_FACTOR_NAMES, INDICATORS, N_VARS, WAVES,
};
use crate::{Error, Result};

pub(crate) const MEANS: usize = 0;
pub(crate) const GROWTH_COV: usize = MEANS + GROWTH_FACTORS;
pub(crate) const PSI: usize = GROWTH_COV + GROWTH_FACTORS * (GROWTH_FACTORS + 1) / 2;
pub(crate) const LOADINGS: usize = PSI + CONSTRUCTS * WAVES;
pub(crate) const INTERCEPTS: usize = LOADINGS + CONSTRUCTS * (INDICATORS - 1);
pub(crate) const THETA: usize = INTERCEPTS + CONSTRUCTS * (INDICATORS - 1);
pub const N_PARAMS: usize = THETA + N_VARS;

/// Position of `Φ[a][b]` (either order) in the packed lower triangle.
#[inline]
pub(crate) const fn cov_index(a: usize, b: usize) -> usize {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    GROWTH_COV + hi * (hi + 1) / 2 + lo
}

#[inline]
pub(crate) const fn psi_index(construct: usize, wave: usize) -> usize {
    PSI + first_order(construct, wave)
}

/// Free loading/intercept slot for indicator `j ≥ 1`.
#[inline]
pub(crate) const fn free_slot(construct: usize, indicator: usize) -> usize {
    construct * (INDICATORS - 1) + indicator - 1
}

/// Fitted growth-model structure that is not estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub time_scores: [f64; WAVES],
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            time_scores: [0.0, 1.0, 2.0, 3.0, 4.0],
        }
    }
}

impl ModelSpec {
    pub fn from_population(p: &PopulationParams) -> Self {
        Self {
            time_scores: p.time_scores,
        }
    }
}

/// The 62 free parameters of the fitted model, on the raw scale.
///
/// Layout:
///
/// | range  | content |
/// |--------|---------|
/// | 0..4   | growth means `I_B, S_B, I_H, S_H` |
/// | 4..14  | growth covariance, lower triangle row by row |
/// | 14..24 | first-order disturbance variances, `B` waves 1–5 then `H` |
/// | 24..28 | loadings of indicators 2 and 3, `B` then `H` |
/// | 28..32 | intercepts of indicators 2 and 3, `B` then `H` |
/// | 32..62 | indicator residual variances in column order |
///
/// Variances are unconstrained so negative (Heywood) solutions are representable.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != N_PARAMS {
            return Err(Error::LengthMismatch {
                expected: N_PARAMS,
                got: values.len(),
            });
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn growth_cov(&self, a: usize, b: usize) -> f64 {
        self.0[cov_index(a, b)]
    }

    pub fn from_population(p: &PopulationParams) -> Self {
        let mut v = alloc::vec![0.0; N_PARAMS];
        v[MEANS..MEANS + GROWTH_FACTORS].copy_from_slice(&p.growth_means);
        for a in 0..GROWTH_FACTORS {
            for b in 0..=a {
                v[cov_index(a, b)] = p.growth_cov[a][b];
            }
        }
        for c in 0..CONSTRUCTS {
            for t in 0..WAVES {
                v[psi_index(c, t)] = p.wave_residual_var[c][t];
            }
            for j in 1..INDICATORS {
                v[LOADINGS + free_slot(c, j)] = p.loadings[c][j];
                v[INTERCEPTS + free_slot(c, j)] = p.indicator_intercepts[c][j];
            }
        }
        v[THETA..].copy_from_slice(&p.indicator_residual_var);
        Self(v)
    }

    /// Expands to the full model with marker loading 1 and marker intercept 0.
    pub fn to_population(&self, spec: &ModelSpec) -> PopulationParams {
        let v = &self.0;
        let mut growth_means = [0.0; GROWTH_FACTORS];
        growth_means.copy_from_slice(&v[MEANS..MEANS + GROWTH_FACTORS]);
        let mut growth_cov = [[0.0; GROWTH_FACTORS]; GROWTH_FACTORS];
        for a in 0..GROWTH_FACTORS {
            for b in 0..GROWTH_FACTORS {
                growth_cov[a][b] = v[cov_index(a, b)];
            }
        }
        let mut wave_residual_var = [[0.0; WAVES]; CONSTRUCTS];
        let mut loadings = [[1.0; INDICATORS]; CONSTRUCTS];
        let mut indicator_intercepts = [[0.0; INDICATORS]; CONSTRUCTS];
        for c in 0..CONSTRUCTS {
            for t in 0..WAVES {
                wave_residual_var[c][t] = v[psi_index(c, t)];
            }
            for j in 1..INDICATORS {
                loadings[c][j] = v[LOADINGS + free_slot(c, j)];
                indicator_intercepts[c][j] = v[INTERCEPTS + free_slot(c, j)];
            }
        }
        let mut indicator_residual_var = [0.0; N_VARS];
        indicator_residual_var.copy_from_slice(&v[THETA..]);
        PopulationParams {
            growth_means,
            growth_cov,
            time_scores: spec.time_scores,
            wave_residual_var,
            loadings,
            indicator_residual_var,
            indicator_intercepts,
        }
    }

    /// Indices of every variance parameter.
    pub fn variance_indices() -> impl Iterator<Item = usize> {
        (0..GROWTH_FACTORS)
            .map(|a| cov_index(a, a))
            .chain(PSI..LOADINGS)
            .chain(THETA..N_PARAMS)
    }

    pub fn is_variance(i: usize) -> bool {
        Self::variance_indices().any(|k| k == i)
    }
}

pub fn param_name(i: usize) -> String {
    match i {
        _ if i < GROWTH_COV => format!("mean_{}", GROWTH_FACTOR_NAMES[i - MEANS]),
        _ if i < PSI => {
            let k = i - GROWTH_COV;
            let mut hi = 0;
            while (hi + 1) * (hi + 2) / 2 <= k {
                hi += 1;
            }
            let lo = k - hi * (hi + 1) / 2;
            format!(
                "cov_{}_{}",
                GROWTH_FACTOR_NAMES[hi], GROWTH_FACTOR_NAMES[lo]
            )
        }
        _ if i < LOADINGS => {
            let f = i - PSI;
            format!("psi_{}_t{}", CONSTRUCT_NAMES[f / WAVES], f % WAVES + 1)
        }
        _ if i < INTERCEPTS => {
            let k = i - LOADINGS;
            format!(
                "lambda_{}_y{}",
                CONSTRUCT_NAMES[k / (INDICATORS - 1)],
                k % (INDICATORS - 1) + 2
            )
        }
        _ if i < THETA => {
            let k = i - INTERCEPTS;
            format!(
                "tau_{}_y{}",
                CONSTRUCT_NAMES[k / (INDICATORS - 1)],
                k % (INDICATORS - 1) + 2
            )
        }
        _ => format!("theta_{}", column_name(i - THETA)),
    }
}

pub fn param_names() -> Vec<String> {
    (0..N_PARAMS).map(param_name).collect()
}

fn growth_factor(name: &str) -> Option<usize> {
    GROWTH_FACTOR_NAMES.iter().position(|&n| n == name)
}

/// A quantity derivable from the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Raw(usize),
    Correlation(usize, usize),
}

pub const SLOPE_SLOPE_CORR: &str = "slope_slope_corr";

/// Resolves `slope_slope_corr`, `corr_<F1>_<F2>`, `cov_<F1>_<F2>` in either
/// order, or any name from [`param_names`].
pub fn resolve(name: &str) -> Result<Quantity> {
    use crate::lgm::{SLOPE_B, SLOPE_H};
    if name == SLOPE_SLOPE_CORR {
        return Ok(Quantity::Correlation(SLOPE_B, SLOPE_H));
    }
    for (prefix, corr) in [("corr_", true), ("cov_", false)] {
        if let Some(rest) = name.strip_prefix(prefix) {
            for split in 0..rest.len() {
                if rest.as_bytes()[split] != b'_' {
                    continue;
                }
                if let (Some(a), Some(b)) = (
                    growth_factor(&rest[..split]),
                    growth_factor(&rest[split + 1..]),
                ) {
                    return Ok(if corr {
                        Quantity::Correlation(a, b)
                    } else {
                        Quantity::Raw(cov_index(a, b))
                    });
                }
            }
        }
    }
    (0..N_PARAMS)
        .find(|&i| param_name(i) == name)
        .map(Quantity::Raw)
        .ok_or_else(|| Error::UnknownParam(name.into()))
}

/// Evaluates a named quantity on a parameter vector.
pub fn evaluate(theta: &ParamVector, name: &str) -> Result<f64> {
    match resolve(name)? {
        Quantity::Raw(i) => Ok(theta.0[i]),
        Quantity::Correlation(a, b) => {
            let va = theta.growth_cov(a, a);
            let vb = theta.growth_cov(b, b);
            if !(va > 0.0 && vb > 0.0) {
                return Err(Error::InadmissibleForParam(name.into()));
            }
            Ok(theta.growth_cov(a, b) / libm::sqrt(va * vb))
        }
    }
}

/// Population value of a named quantity.
pub fn true_value(population: &PopulationParams, name: &str) -> Result<f64> {
    evaluate(&ParamVector::from_population(population), name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgm::{SLOPE_B, SLOPE_H};

    #[test]
    fn layout_is_62_wide() {
        assert_eq!(N_PARAMS, 62);
        assert_eq!(cov_index(3, 3), 13);
        assert_eq!(cov_index(SLOPE_B, SLOPE_H), cov_index(SLOPE_H, SLOPE_B));
        let names = param_names();
        assert_eq!(names[0], "mean_I_B");
        assert_eq!(names[4], "cov_I_B_I_B");
        assert_eq!(names[12], "cov_S_H_I_H");
        assert_eq!(names[14], "psi_B_t1");
        assert_eq!(names[24], "lambda_B_y2");
        assert_eq!(names[31], "tau_H_y3");
        assert_eq!(names[61], "theta_H_t5_y3");
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), N_PARAMS);
        assert_eq!(ParamVector::variance_indices().count(), 4 + 10 + 30);
    }

    #[test]
    fn population_round_trip() {
        let p = PopulationParams::default();
        let v = ParamVector::from_population(&p);
        assert_eq!(v.to_population(&ModelSpec::from_population(&p)), p);
    }

    #[test]
    fn named_quantities() {
        let mut v = ParamVector::from_population(&PopulationParams::default());
        v.0[cov_index(SLOPE_B, SLOPE_B)] = 0.25;
        v.0[cov_index(SLOPE_H, SLOPE_H)] = 0.25;
        v.0[cov_index(SLOPE_B, SLOPE_H)] = 0.15;
        assert!((evaluate(&v, SLOPE_SLOPE_CORR).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(evaluate(&v, "cov_S_B_S_H").unwrap(), 0.15);
        assert_eq!(evaluate(&v, "cov_S_H_S_B").unwrap(), 0.15);
        assert!((evaluate(&v, "corr_S_H_S_B").unwrap() - 0.6).abs() < 1e-15);
        v.0[cov_index(SLOPE_B, SLOPE_H)] = 0.0;
        assert_eq!(evaluate(&v, SLOPE_SLOPE_CORR).unwrap(), 0.0);
        v.0[cov_index(SLOPE_B, SLOPE_B)] = -0.01;
        assert!(matches!(
            evaluate(&v, SLOPE_SLOPE_CORR),
            Err(Error::InadmissibleForParam(_))
        ));
        assert_eq!(evaluate(&v, "lambda_H_y3").unwrap(), 0.8);
        assert!(matches!(evaluate(&v, "nope"), Err(Error::UnknownParam(_))));
        assert!(matches!(
            evaluate(&v, "corr_I_B_X"),
            Err(Error::UnknownParam(_))
        ));
    }
}
