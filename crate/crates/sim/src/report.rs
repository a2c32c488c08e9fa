//! Text summaries and the standalone metrics computation.

use std::fmt::Write as _;
use std::path::Path;

use bre_core::metrics::{compute_report, EstimateSample, MetricReport, OverlapMode};
use bre_core::sim::{Arm, ConditionResult};

use crate::output::{fmt_g17, METRICS_HEADER, NA};

/// One line per condition and tracked parameter.
pub fn condition_summary(c: &ConditionResult) -> Vec<String> {
    let usable_ref = c.replications - c.exclusions.excluded(Arm::Reference);
    let usable_comp = c.replications - c.exclusions.excluded(Arm::Comparison);
    c.metrics
        .iter()
        .map(|m| {
            let head = format!(
                "condition {} rho={} n={} {}: usable ref {}/{} comp {}/{}",
                c.condition_id,
                c.rho,
                c.n,
                m.param,
                usable_ref,
                c.replications,
                usable_comp,
                c.replications
            );
            match &m.report {
                Ok(r) => format!(
                    "{head} RE={:.2}% overlap={:.4} ({}) MRB={:.4} BRE={:.4}",
                    r.re_percent, r.iqr_overlap, r.overlap_case, r.median_rb, r.bre
                ),
                Err(e) => format!("{head} metrics suppressed: {e}"),
            }
        })
        .collect()
}

/// Human-readable block for a single metric report.
pub fn format_report(r: &MetricReport) -> String {
    let mut s = String::new();
    for (k, v) in [
        ("re_percent", fmt_g17(r.re_percent)),
        ("iqr_overlap", fmt_g17(r.iqr_overlap)),
        ("overlap_case", r.overlap_case.to_string()),
        ("median_rb", fmt_g17(r.median_rb)),
        ("amrb", fmt_g17(r.amrb)),
        ("bre", fmt_g17(r.bre)),
        ("n_ref", r.n_reference.to_string()),
        ("n_comp", r.n_comparison.to_string()),
    ] {
        writeln!(s, "{k}: {v}").unwrap();
    }
    s
}

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Metric(#[from] bre_core::Error),
}

fn schema(path: &Path, message: impl Into<String>) -> InputError {
    InputError::Schema {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Reads a `label,estimate` CSV and splits it into reference and comparison
/// samples. Without explicit labels, `reference` and `comparison` are used if
/// present, otherwise the first label seen is the reference.
pub fn read_labeled_estimates(
    path: &Path,
    reference_label: Option<&str>,
    comparison_label: Option<&str>,
) -> Result<(EstimateSample, EstimateSample), InputError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["label", "estimate"] {
        return Err(schema(path, "header must be `label,estimate`"));
    }
    let mut rows: Vec<(String, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let value: f64 = rec[1].trim().parse().map_err(|_| {
            schema(
                path,
                format!("row {}: `{}` is not a number", i + 2, &rec[1]),
            )
        })?;
        rows.push((rec[0].to_string(), value));
    }
    let mut labels: Vec<&str> = Vec::new();
    for (l, _) in &rows {
        if !labels.contains(&l.as_str()) {
            labels.push(l);
        }
    }
    let (ref_label, comp_label) = match (reference_label, comparison_label) {
        (Some(r), Some(c)) => (r.to_string(), c.to_string()),
        _ if labels.contains(&"reference") && labels.contains(&"comparison") => {
            ("reference".to_string(), "comparison".to_string())
        }
        (r, c) => {
            if labels.len() != 2 {
                return Err(schema(
                    path,
                    format!("expected exactly two labels, found {}", labels.len()),
                ));
            }
            let r = r
                .map(str::to_string)
                .unwrap_or_else(|| labels.iter().find(|&&l| Some(l) != c).unwrap().to_string());
            let c = c
                .map(str::to_string)
                .unwrap_or_else(|| labels.iter().find(|&&l| l != r).unwrap().to_string());
            (r, c)
        }
    };
    let pick = |label: &str| -> Vec<f64> {
        rows.iter()
            .filter(|(l, _)| l == label)
            .map(|(_, v)| *v)
            .collect()
    };
    Ok((
        EstimateSample::new(&ref_label, pick(&ref_label))?,
        EstimateSample::new(&comp_label, pick(&comp_label))?,
    ))
}

pub fn metrics_from_file(
    path: &Path,
    truth: f64,
    mode: OverlapMode,
    reference_label: Option<&str>,
    comparison_label: Option<&str>,
) -> Result<MetricReport, InputError> {
    let (r, c) = read_labeled_estimates(path, reference_label, comparison_label)?;
    Ok(compute_report(&r, &c, truth, mode)?)
}

/// Renders `metrics.csv` as an aligned table.
pub fn render_metrics_table(path: &Path) -> Result<String, InputError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != METRICS_HEADER {
        return Err(schema(path, "unexpected metrics.csv header"));
    }
    let cols = [
        "condition_id",
        "rho",
        "n",
        "param",
        "re_percent",
        "iqr_overlap",
        "overlap_case",
        "amrb",
        "bre",
        "n_ref",
        "n_comp",
    ];
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| headers.iter().position(|h| h == *c).unwrap())
        .collect();
    let mut table: Vec<Vec<String>> = vec![cols.iter().map(|c| c.to_string()).collect()];
    for rec in rdr.records() {
        let rec = rec?;
        table.push(
            idx.iter()
                .map(|&i| {
                    let v = &rec[i];
                    match v.parse::<f64>() {
                        Ok(x) if v.contains('.') || v.contains('e') => format!("{x:.4}"),
                        _ if v == NA => "-".to_string(),
                        _ => v.to_string(),
                    }
                })
                .collect(),
        );
    }
    let widths: Vec<usize> = (0..cols.len())
        .map(|j| table.iter().map(|r| r[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:>w$}"))
            .collect();
        writeln!(out, "{}", line.join("  ")).unwrap();
    }
    Ok(out)
}
