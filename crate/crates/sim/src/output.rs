//! Result files: `estimates.csv`, `metrics.csv` and `plotdata.json`.
//!
//! Floats are written like C's `%.17g`, which round-trips every `f64`.
//! Missing values are `NA`. Lines end in `\n`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use bre_core::sim::{Arm, ConditionResult};
use serde::Serialize;
use serde_json::value::RawValue;

pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const PLOTDATA_FILE: &str = "plotdata.json";

pub const ESTIMATES_HEADER: [&str; 9] = [
    "condition_id",
    "rho",
    "n",
    "rep",
    "arm",
    "converged",
    "admissible",
    "param",
    "estimate",
];

pub const METRICS_HEADER: [&str; 14] = [
    "condition_id",
    "rho",
    "n",
    "param",
    "re_percent",
    "iqr_overlap",
    "overlap_case",
    "median_rb",
    "amrb",
    "bre",
    "n_ref",
    "n_comp",
    "excluded_ref",
    "excluded_comp",
];

pub const NA: &str = "NA";

/// Formats `x` as `printf("%.17g", x)` does.
pub fn fmt_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), fmt_g17)
}

fn csv_writer(path: &Path) -> io::Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path)?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_err(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// One row per replication, arm and tracked parameter, in that nesting order.
pub fn write_estimates(
    path: &Path,
    results: &[ConditionResult],
    params: &[String],
) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(ESTIMATES_HEADER).map_err(csv_err)?;
    for c in results {
        let (id, rho, n) = (c.condition_id.to_string(), fmt_g17(c.rho), c.n.to_string());
        for r in &c.records {
            let rep = r.rep.to_string();
            for arm in [Arm::Reference, Arm::Comparison] {
                let a = r.arm(arm);
                for (k, p) in params.iter().enumerate() {
                    w.write_record([
                        id.as_str(),
                        rho.as_str(),
                        n.as_str(),
                        rep.as_str(),
                        arm.as_str(),
                        bool_str(a.converged),
                        bool_str(a.admissible),
                        p.as_str(),
                        opt(a.estimates[k]).as_str(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()
}

fn bool_str(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// One row per condition and tracked parameter. Metric fields are `NA` when
/// the condition is degenerate for that parameter.
pub fn write_metrics(path: &Path, results: &[ConditionResult]) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for c in results {
        let ex_ref = c.exclusions.excluded(Arm::Reference).to_string();
        let ex_comp = c.exclusions.excluded(Arm::Comparison).to_string();
        for m in &c.metrics {
            let metric_fields: [String; 6] = match &m.report {
                Ok(r) => [
                    fmt_g17(r.re_percent),
                    fmt_g17(r.iqr_overlap),
                    r.overlap_case.as_str().to_string(),
                    fmt_g17(r.median_rb),
                    fmt_g17(r.amrb),
                    fmt_g17(r.bre),
                ],
                Err(_) => core::array::from_fn(|_| NA.to_string()),
            };
            let mut row = vec![
                c.condition_id.to_string(),
                fmt_g17(c.rho),
                c.n.to_string(),
                m.param.clone(),
            ];
            row.extend(metric_fields);
            row.extend([
                m.reference.len().to_string(),
                m.comparison.len().to_string(),
                ex_ref.clone(),
                ex_comp.clone(),
            ]);
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()
}

/// A float that serializes as its `%.17g` text, or `null` if not finite.
#[derive(Debug, Clone, Copy)]
pub struct G17(pub f64);

impl Serialize for G17 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        RawValue::from_string(fmt_g17(self.0))
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }
}

#[derive(Serialize)]
struct PlotData {
    conditions: Vec<PlotCondition>,
}

#[derive(Serialize)]
struct PlotCondition {
    condition_id: u32,
    rho: G17,
    n: usize,
    params: Vec<PlotParam>,
}

#[derive(Serialize)]
struct PlotParam {
    param: String,
    truth: G17,
    reference: PlotArm,
    comparison: PlotArm,
}

#[derive(Serialize)]
struct PlotArm {
    estimates: Vec<G17>,
    relative_bias: Vec<G17>,
}

impl PlotArm {
    fn new(estimates: &[f64], truth: f64) -> Self {
        Self {
            estimates: estimates.iter().copied().map(G17).collect(),
            relative_bias: estimates.iter().map(|e| G17((e - truth) / truth)).collect(),
        }
    }
}

/// Usable estimates and their relative biases per condition, parameter and arm.
pub fn write_plotdata(path: &Path, results: &[ConditionResult]) -> io::Result<()> {
    let doc = PlotData {
        conditions: results
            .iter()
            .map(|c| PlotCondition {
                condition_id: c.condition_id,
                rho: G17(c.rho),
                n: c.n,
                params: c
                    .metrics
                    .iter()
                    .map(|m| PlotParam {
                        param: m.param.clone(),
                        truth: G17(m.truth),
                        reference: PlotArm::new(&m.reference, m.truth),
                        comparison: PlotArm::new(&m.comparison, m.truth),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
    text.push('\n');
    fs::File::create(path)?.write_all(text.as_bytes())
}

/// Writes all three files into `dir`, creating it if needed.
pub fn write_all(dir: &Path, results: &[ConditionResult], params: &[String]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_estimates(&dir.join(ESTIMATES_FILE), results, params)?;
    write_metrics(&dir.join(METRICS_FILE), results)?;
    write_plotdata(&dir.join(PLOTDATA_FILE), results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        let cases = [
            (0.3, "0.29999999999999999"),
            (1.0, "1"),
            (100.0, "100"),
            (-0.5, "-0.5"),
            (0.1, "0.10000000000000001"),
            (1e-5, "1.0000000000000001e-05"),
            (1.5e-4, "0.00014999999999999999"),
            (1e17, "1e+17"),
            (12345678901234567.0, "12345678901234568"),
            (2.5e300, "2.5000000000000001e+300"),
            (0.0, "0"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_g17(x), s, "{x:e}");
        }
    }

    #[test]
    fn g17_round_trips() {
        let mut x = 1.2345e-7_f64;
        for _ in 0..200 {
            let s = fmt_g17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            x *= -3.7;
        }
    }
}
