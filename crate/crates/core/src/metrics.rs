//! Relative-efficiency metrics for comparing two distributions of estimates.
//!
//! Two efficiency measures are provided:
//!
//! - [`traditional_re`]: `100 × var(reference) / var(comparison)`. It ignores
//!   bias and exceeds 100% whenever the comparison estimates happen to be less
//!   variable than the reference ones.
//! - [`bre`]: `IQR overlap × (1 − |median relative bias|)`, where the overlap
//!   measures how much of the two central 50% ranges coincide and the bias term
//!   is computed on the comparison estimates only.
//!
//! All quantiles use linear interpolation between order statistics at the
//! 1-based plotting position `h = (n − 1)·p + 1`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// A set of estimates of one parameter, one value per usable replication.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSample {
    values: Vec<f64>,
    label: String,
}

impl EstimateSample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidEstimate(bad));
        }
        Ok(Self {
            values,
            label: label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn sorted(&self) -> Result<Vec<f64>> {
        if self.values.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// How the two interquartile ranges relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OverlapCase {
    /// The ranges intersect (or coincide); Dice-style ratio.
    Partial,
    /// The comparison range is strictly narrower and lies inside the reference range.
    Containment,
    /// No intersection; the ratio is zero.
    Disjoint,
}

impl OverlapCase {
    pub fn as_str(self) -> &'static str {
        match self {
            OverlapCase::Partial => "PARTIAL",
            OverlapCase::Containment => "CONTAINMENT",
            OverlapCase::Disjoint => "DISJOINT",
        }
    }
}

impl fmt::Display for OverlapCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for OverlapCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PARTIAL" => Ok(OverlapCase::Partial),
            "CONTAINMENT" => Ok(OverlapCase::Containment),
            "DISJOINT" => Ok(OverlapCase::Disjoint),
            _ => Err(Error::UnknownParam(s.into())),
        }
    }
}

/// Which IQR-overlap formula to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OverlapMode {
    /// Containment uses `IQR_reference / IQR_comparison` (unbounded above);
    /// everything else uses the Dice-style ratio.
    #[default]
    Paper,
    /// Dice-style ratio everywhere, bounded in `[0, 1]`.
    Symmetric,
}

impl OverlapMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OverlapMode::Paper => "paper",
            OverlapMode::Symmetric => "symmetric",
        }
    }
}

impl core::str::FromStr for OverlapMode {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(OverlapMode::Paper),
            "symmetric" => Ok(OverlapMode::Symmetric),
            other => Err(alloc::format!(
                "unknown overlap mode `{other}` (expected `paper` or `symmetric`)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub re_percent: f64,
    pub iqr_overlap: f64,
    pub overlap_case: OverlapCase,
    pub median_rb: f64,
    pub amrb: f64,
    pub bre: f64,
    pub n_reference: usize,
    pub n_comparison: usize,
}

/// Linear-interpolation quantile of sorted data at the 1-based position `(n − 1)p + 1`.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(pos) as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return sorted[lo];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

pub fn quartiles(sample: &EstimateSample) -> Result<Quartiles> {
    let sorted = sample.sorted()?;
    Ok(Quartiles {
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

pub fn median(sample: &EstimateSample) -> Result<f64> {
    Ok(quantile_sorted(&sample.sorted()?, 0.5))
}

/// Unbiased (`n − 1`) sample variance.
pub fn sample_variance(sample: &EstimateSample) -> Result<f64> {
    let v = sample.values();
    if v.len() < 2 {
        return Err(Error::InsufficientSample {
            needed: 2,
            got: v.len(),
        });
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    Ok(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0))
}

fn dice_overlap(comparison: &Quartiles, reference: &Quartiles) -> Result<(f64, OverlapCase)> {
    let total = comparison.iqr() + reference.iqr();
    if total == 0.0 {
        return if comparison.median == reference.median {
            Ok((1.0, OverlapCase::Partial))
        } else {
            Err(Error::DegenerateDistribution(
                "both interquartile ranges are zero and the medians differ",
            ))
        };
    }
    let intersection = comparison.q3.min(reference.q3) - comparison.q1.max(reference.q1);
    if intersection <= 0.0 {
        return Ok((0.0, OverlapCase::Disjoint));
    }
    Ok((2.0 * intersection / total, OverlapCase::Partial))
}

/// IQR overlap of the comparison distribution with the reference distribution.
///
/// In [`OverlapMode::Paper`], a comparison IQR that lies inside the reference
/// IQR (inclusive bounds) and is strictly narrower yields
/// `IQR_reference / IQR_comparison`. Identical quartiles are not containment
/// and give exactly 1.
pub fn iqr_overlap(
    comparison: &Quartiles,
    reference: &Quartiles,
    mode: OverlapMode,
) -> Result<(f64, OverlapCase)> {
    if mode == OverlapMode::Paper {
        let contained = comparison.q1 >= reference.q1
            && comparison.q3 <= reference.q3
            && comparison.iqr() < reference.iqr();
        if contained {
            if comparison.iqr() == 0.0 {
                return Err(Error::DegenerateDistribution(
                    "comparison interquartile range is zero inside the reference range",
                ));
            }
            return Ok((reference.iqr() / comparison.iqr(), OverlapCase::Containment));
        }
    }
    dice_overlap(comparison, reference)
}

/// Median over the sample of `(θ̂ − θ) / θ`.
pub fn median_relative_bias(estimates: &EstimateSample, theta_true: f64) -> Result<f64> {
    if theta_true == 0.0 {
        return Err(Error::ZeroTrueParameter);
    }
    if !theta_true.is_finite() {
        return Err(Error::InvalidEstimate(theta_true));
    }
    let rb = estimates
        .values()
        .iter()
        .map(|x| (x - theta_true) / theta_true)
        .collect();
    median(&EstimateSample::new("relative_bias", rb)?)
}

/// `100 × var(reference) / var(comparison)`, in percent.
pub fn traditional_re(reference: &EstimateSample, comparison: &EstimateSample) -> Result<f64> {
    let vr = sample_variance(reference)?;
    let vc = sample_variance(comparison)?;
    if vc == 0.0 {
        return Err(Error::DegenerateDistribution(
            "comparison estimates have zero variance",
        ));
    }
    Ok(100.0 * vr / vc)
}

/// `overlap × (1 − |median_rb|)`, unclamped.
pub fn bre(iqr_overlap: f64, median_rb: f64) -> Result<f64> {
    for x in [iqr_overlap, median_rb] {
        if !x.is_finite() {
            return Err(Error::InvalidEstimate(x));
        }
    }
    // adding +0.0 turns a signed zero from a disjoint overlap into 0
    Ok(iqr_overlap * (1.0 - median_rb.abs()) + 0.0)
}

pub fn compute_report(
    reference: &EstimateSample,
    comparison: &EstimateSample,
    theta_true: f64,
    mode: OverlapMode,
) -> Result<MetricReport> {
    let re_percent = traditional_re(reference, comparison)?;
    let (iqr_overlap, overlap_case) =
        iqr_overlap(&quartiles(comparison)?, &quartiles(reference)?, mode)?;
    let median_rb = median_relative_bias(comparison, theta_true)?;
    let amrb = median_rb.abs();
    Ok(MetricReport {
        re_percent,
        iqr_overlap,
        overlap_case,
        median_rb,
        amrb,
        bre: bre(iqr_overlap, median_rb)?,
        n_reference: reference.len(),
        n_comparison: comparison.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sample(v: &[f64]) -> EstimateSample {
        EstimateSample::new("t", v.to_vec()).unwrap()
    }

    fn q(q1: f64, median: f64, q3: f64) -> Quartiles {
        Quartiles { q1, median, q3 }
    }

    #[test]
    fn quartiles_interpolate() {
        let qs = quartiles(&sample(&[4.0, 1.0, 3.0, 2.0])).unwrap();
        assert_eq!(qs, q(1.75, 2.5, 3.25));
        assert_eq!(quartiles(&sample(&[5.0; 4])).unwrap(), q(5.0, 5.0, 5.0));
        assert_eq!(quartiles(&sample(&[7.0])).unwrap(), q(7.0, 7.0, 7.0));
    }

    #[test]
    fn quartile_errors() {
        assert_eq!(quartiles(&sample(&[])), Err(Error::EmptySample));
        assert!(matches!(
            EstimateSample::new("x", vec![1.0, f64::NAN]),
            Err(Error::InvalidEstimate(_))
        ));
    }

    #[test]
    fn overlap_identity_and_disjoint() {
        let a = q(1.0, 2.0, 3.0);
        for mode in [OverlapMode::Paper, OverlapMode::Symmetric] {
            assert_eq!(
                iqr_overlap(&a, &a, mode).unwrap(),
                (1.0, OverlapCase::Partial)
            );
        }
        let c = q(0.0, 0.5, 1.0);
        let r = q(2.0, 2.5, 3.0);
        assert_eq!(
            iqr_overlap(&c, &r, OverlapMode::Paper).unwrap(),
            (0.0, OverlapCase::Disjoint)
        );
    }

    #[test]
    fn overlap_containment_modes() {
        let c = q(1.0, 1.5, 2.0);
        let r = q(0.0, 2.0, 4.0);
        assert_eq!(
            iqr_overlap(&c, &r, OverlapMode::Paper).unwrap(),
            (4.0, OverlapCase::Containment)
        );
        assert_eq!(
            iqr_overlap(&c, &r, OverlapMode::Symmetric).unwrap(),
            (0.4, OverlapCase::Partial)
        );
    }

    #[test]
    fn overlap_degenerate_inputs() {
        let point = q(1.0, 1.0, 1.0);
        assert!(matches!(
            iqr_overlap(&point, &q(0.0, 1.0, 2.0), OverlapMode::Paper),
            Err(Error::DegenerateDistribution(_))
        ));
        assert!(matches!(
            iqr_overlap(&point, &q(2.0, 2.0, 2.0), OverlapMode::Symmetric),
            Err(Error::DegenerateDistribution(_))
        ));
        assert_eq!(
            iqr_overlap(&point, &point, OverlapMode::Paper).unwrap(),
            (1.0, OverlapCase::Partial)
        );
        // Point touching a range edge has no interior overlap.
        assert_eq!(
            iqr_overlap(&point, &q(0.0, 1.0, 2.0), OverlapMode::Symmetric).unwrap(),
            (0.0, OverlapCase::Disjoint)
        );
    }

    #[test]
    fn median_relative_bias_cases() {
        assert_eq!(median_relative_bias(&sample(&[0.3; 5]), 0.3).unwrap(), 0.0);
        let mrb = median_relative_bias(&sample(&[1.1, 0.9, 1.2]), 1.0).unwrap();
        assert!((mrb - 0.1).abs() < 1e-15);
        let mrb = median_relative_bias(&sample(&[0.45, 0.45, 0.45]), 0.3).unwrap();
        assert!((mrb - 0.5).abs() < 1e-15);
        assert_eq!(
            median_relative_bias(&sample(&[1.0]), 0.0),
            Err(Error::ZeroTrueParameter)
        );
    }

    #[test]
    fn traditional_re_cases() {
        let a = sample(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(traditional_re(&a, &a).unwrap(), 100.0);
        // variances 2.0, 1.0 and 0.8
        let two = sample(&[0.0, 2.0]);
        let one = sample(&[0.0, libm::sqrt(2.0)]);
        assert!((traditional_re(&two, &one).unwrap() - 200.0).abs() < 1e-12);
        let point_eight = sample(&[0.0, libm::sqrt(1.6)]);
        assert!((traditional_re(&point_eight, &one).unwrap() - 80.0).abs() < 1e-12);
        assert!(matches!(
            traditional_re(&a, &sample(&[3.0, 3.0])),
            Err(Error::DegenerateDistribution(_))
        ));
        assert_eq!(
            traditional_re(&sample(&[1.0]), &a),
            Err(Error::InsufficientSample { needed: 2, got: 1 })
        );
    }

    #[test]
    fn bre_arithmetic() {
        assert!((bre(0.8, 0.05).unwrap() - 0.76).abs() < 1e-15);
        assert!((bre(0.8, -0.05).unwrap() - 0.76).abs() < 1e-15);
        assert_eq!(bre(0.37, 0.0).unwrap(), 0.37);
        assert!((bre(0.5, 1.2).unwrap() + 0.1).abs() < 1e-15);
        assert!(bre(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn report_identity() {
        let s = sample(&[0.2, 0.25, 0.3, 0.35, 0.4]);
        let r = compute_report(&s, &s, 0.3, OverlapMode::Paper).unwrap();
        assert_eq!(r.re_percent, 100.0);
        assert_eq!(r.iqr_overlap, 1.0);
        assert_eq!(r.overlap_case, OverlapCase::Partial);
        assert_eq!(r.median_rb, 0.0);
        assert_eq!(r.bre, 1.0);
        assert_eq!((r.n_reference, r.n_comparison), (5, 5));
    }

    #[test]
    fn report_disjoint_is_zero() {
        let r = sample(&[1.0, 1.1, 1.2, 1.3, 1.4]);
        let c = sample(&[2.0, 2.1, 2.2, 2.3, 2.4]);
        let rep = compute_report(&r, &c, 1.2, OverlapMode::Paper).unwrap();
        assert_eq!(rep.overlap_case, OverlapCase::Disjoint);
        assert_eq!(rep.bre, 0.0);
    }

    #[test]
    fn report_uses_comparison_bias_only() {
        let r = sample(&[2.0, 2.1, 2.2, 2.3, 2.4]);
        let c = sample(&[0.9, 1.0, 1.1, 1.2, 1.3]);
        let rep = compute_report(&r, &c, 1.1, OverlapMode::Symmetric).unwrap();
        assert_eq!(rep.median_rb, 0.0);
        assert_eq!(rep.amrb, 0.0);
    }
}
