use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bre-sim"));
    c.env_remove("BRE_SIM_WORKERS");
    c
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn simulate(config: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("simulate")
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .unwrap()
}

const SMALL: &str = "rho_levels = [0.3]\nn_levels = [200]\nreplications = 30\n";

#[test]
fn simulate_writes_three_files_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let mut outputs = Vec::new();
    for (run, workers) in [("a", "1"), ("b", "3")] {
        let out = tmp.path().join(run);
        let o = simulate(
            &cfg,
            &[
                "--seed",
                "42",
                "--reps",
                "20",
                "--workers",
                workers,
                "--out",
                out.to_str().unwrap(),
            ],
        );
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        let stdout = String::from_utf8(o.stdout).unwrap();
        assert_eq!(stdout.lines().count(), 1);
        assert!(stdout.starts_with("condition 0 rho=0.3 n=200"));
        outputs.push(out);
    }
    for f in ["estimates.csv", "metrics.csv", "plotdata.json"] {
        let a = fs::read(outputs[0].join(f)).unwrap();
        let b = fs::read(outputs[1].join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs between runs");
        assert!(!a.contains(&b'\r'));
    }
    let est = fs::read_to_string(outputs[0].join("estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 1 + 20 * 2);
}

#[test]
fn env_var_sets_workers_without_changing_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "master_seed = 3\nrho_levels = [0.3]\nn_levels = [500]\nreplications = 30\n",
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(
        simulate(&cfg, &["--reps", "12", "--out", a.to_str().unwrap()])
            .status
            .success()
    );
    let o = bin()
        .env("BRE_SIM_WORKERS", "2")
        .args(["simulate", "--reps", "12", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert!(o.status.success());
    for f in ["estimates.csv", "metrics.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let bad = bin()
        .env("BRE_SIM_WORKERS", "zero")
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_2_naming_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "master_seed = 1\nrho_levels = [1.5]\nn_levels = [100]\nreplications = 5\n",
    );
    let o = simulate(&cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(
        err.contains("rho_levels") && err.contains("(-1, 1)"),
        "{err}"
    );

    let cfg = write_config(tmp.path(), &format!("master_seed = 1\n{SMALL}colour = 1\n"));
    let o = simulate(&cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let o = simulate(&tmp.path().join("missing.toml"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(tmp.path(), &format!("master_seed = 1\n{SMALL}"));
    let o = simulate(
        &cfg,
        &[
            "--reps",
            "1",
            "--out",
            blocker.join("sub").to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(4));
}

/// 24 conditions at one replication each: every condition is degenerate,
/// files are still written, and the process reports it with exit 3.
#[test]
fn full_grid_counts_and_degenerate_exit() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        &format!(
            "master_seed = 9\nrho_levels = [0.1, 0.3, 0.55]\nn_levels = [40, 60, 80, 100, 300, 500, 800, 1000]\nreplications = 1\noutput_dir = \"{}\"\n",
            out.display()
        ),
    );
    let o = simulate(&cfg, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 24);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 25);
    assert!(metrics.lines().skip(1).all(|l| l.contains(",NA,")));
    let est = fs::read_to_string(out.join("estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 1 + 24 * 2);
}

mod rederive {
    //! Metrics recomputed from `estimates.csv` without using the library.

    pub fn quantile(sorted: &[f64], p: f64) -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }

    pub fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    }

    /// `(re_percent, overlap, case, median_rb, bre)`.
    pub fn metrics(
        reference: &[f64],
        comparison: &[f64],
        truth: f64,
    ) -> (f64, f64, &'static str, f64, f64) {
        let mut r = reference.to_vec();
        let mut c = comparison.to_vec();
        r.sort_by(f64::total_cmp);
        c.sort_by(f64::total_cmp);
        let (r1, r3) = (quantile(&r, 0.25), quantile(&r, 0.75));
        let (c1, c3) = (quantile(&c, 0.25), quantile(&c, 0.75));
        let (overlap, case) = if c1 >= r1 && c3 <= r3 && c3 - c1 < r3 - r1 {
            ((r3 - r1) / (c3 - c1), "CONTAINMENT")
        } else {
            let inter = r3.min(c3) - r1.max(c1);
            if inter <= 0.0 {
                (0.0, "DISJOINT")
            } else {
                (2.0 * inter / ((c3 - c1) + (r3 - r1)), "PARTIAL")
            }
        };
        let mut rb: Vec<f64> = c.iter().map(|x| (x - truth) / truth).collect();
        rb.sort_by(f64::total_cmp);
        let mrb = quantile(&rb, 0.5);
        (
            100.0 * variance(&r) / variance(&c),
            overlap,
            case,
            mrb,
            overlap * (1.0 - mrb.abs()),
        )
    }
}

#[test]
fn metrics_csv_rederives_from_estimates_csv() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "master_seed = 77\nrho_levels = [0.1, 0.55]\nn_levels = [300]\nreplications = 40\n",
    );
    let o = simulate(&cfg, &["--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let mut pooled: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    let mut rows = 0;
    let mut rdr = csv::Reader::from_path(out.join("estimates.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        rows += 1;
        if &rec[5] == "true" && &rec[6] == "true" && &rec[8] != "NA" {
            pooled
                .entry((rec[0].to_string(), rec[4].to_string()))
                .or_default()
                .push(rec[8].parse().unwrap());
        }
    }
    assert_eq!(rows, 2 * 40 * 2);

    let mut rdr = csv::Reader::from_path(out.join("metrics.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header.join(","),
        "condition_id,rho,n,param,re_percent,iqr_overlap,overlap_case,median_rb,amrb,bre,n_ref,n_comp,excluded_ref,excluded_comp"
    );
    let mut n_rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        n_rows += 1;
        let id = rec[0].to_string();
        let truth: f64 = rec[1].parse().unwrap();
        let reference = &pooled[&(id.clone(), "reference".to_string())];
        let comparison = &pooled[&(id.clone(), "comparison".to_string())];
        let (re, ov, case, mrb, bre) = rederive::metrics(reference, comparison, truth);
        let field = |i: usize| rec[i].parse::<f64>().unwrap();
        for (got, want) in [
            (field(4), re),
            (field(5), ov),
            (field(7), mrb),
            (field(8), mrb.abs()),
            (field(9), bre),
        ] {
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1e-300),
                "{got} vs {want}"
            );
        }
        assert_eq!(&rec[6], case);
        assert_eq!(rec[10].parse::<usize>().unwrap(), reference.len());
        assert_eq!(rec[11].parse::<usize>().unwrap(), comparison.len());
        assert_eq!(rec[12].parse::<usize>().unwrap() + reference.len(), 40);
        assert_eq!(rec[13].parse::<usize>().unwrap() + comparison.len(), 40);
    }
    assert_eq!(n_rows, 2);

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("plotdata.json")).unwrap()).unwrap();
    let conds = json["conditions"].as_array().unwrap();
    assert_eq!(conds.len(), 2);
    for c in conds {
        let id = c["condition_id"].as_u64().unwrap().to_string();
        let p = &c["params"][0];
        assert_eq!(p["param"], "slope_slope_corr");
        let truth = p["truth"].as_f64().unwrap();
        for arm in ["reference", "comparison"] {
            let est: Vec<f64> = p[arm]["estimates"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            assert_eq!(est, pooled[&(id.clone(), arm.to_string())]);
            let rb = p[arm]["relative_bias"].as_array().unwrap();
            for (e, r) in est.iter().zip(rb) {
                assert_eq!(r.as_f64().unwrap(), (e - truth) / truth);
            }
        }
    }
    let round_trip: serde_json::Value =
        serde_json::from_str(&serde_json::to_string(&json).unwrap()).unwrap();
    assert_eq!(round_trip, json);

    let report = bin()
        .arg("report")
        .arg("--input-dir")
        .arg(&out)
        .output()
        .unwrap();
    assert!(report.status.success());
    assert_eq!(String::from_utf8(report.stdout).unwrap().lines().count(), 3);
}

fn metrics_cmd(tmp: &Path, rows: &[(&str, f64)], truth: &str) -> Output {
    let path = tmp.join("est.csv");
    let mut body = String::from("label,estimate\n");
    for (l, v) in rows {
        body += &format!("{l},{v}\n");
    }
    fs::write(&path, body).unwrap();
    bin()
        .arg("metrics")
        .arg("--input")
        .arg(&path)
        .args(["--truth", truth])
        .output()
        .unwrap()
}

fn field(stdout: &[u8], key: &str) -> String {
    String::from_utf8_lossy(stdout)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")).map(String::from))
        .unwrap_or_else(|| panic!("{key} missing"))
}

#[test]
fn metrics_subcommand_cases() {
    let tmp = TempDir::new().unwrap();
    let values = [0.1, 0.2, 0.3, 0.4, 0.5];
    let identical: Vec<(&str, f64)> = values
        .iter()
        .flat_map(|&v| [("reference", v), ("comparison", v)])
        .collect();
    let o = metrics_cmd(tmp.path(), &identical, "0.3");
    assert!(o.status.success());
    assert_eq!(field(&o.stdout, "re_percent"), "100");
    assert_eq!(field(&o.stdout, "bre"), "1");

    let core: Vec<f64> = (0..20).map(|i| 0.3 + 0.01 * (i as f64 - 9.5)).collect();
    let mut paradox: Vec<(&str, f64)> = core
        .iter()
        .map(|&v| ("comparison", 0.3 + 1.3 * (v - 0.3)))
        .collect();
    let mut reference = core.clone();
    reference[0] = -0.6;
    reference[19] = 1.2;
    paradox.extend(reference.iter().map(|&v| ("reference", v)));
    let o = metrics_cmd(tmp.path(), &paradox, "0.3");
    assert!(o.status.success());
    assert!(field(&o.stdout, "re_percent").parse::<f64>().unwrap() > 100.0);
    assert!(field(&o.stdout, "bre").parse::<f64>().unwrap() <= 1.0);

    let disjoint: Vec<(&str, f64)> = values
        .iter()
        .flat_map(|&v| [("a", v), ("b", v + 10.0)])
        .collect();
    let o = metrics_cmd(tmp.path(), &disjoint, "0.3");
    assert!(o.status.success());
    assert_eq!(field(&o.stdout, "bre"), "0");
    assert_eq!(field(&o.stdout, "overlap_case"), "DISJOINT");

    let o = metrics_cmd(tmp.path(), &identical, "0");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ZeroTrueParameter"));
}

#[test]
fn shipped_configs_parse() {
    use bre_sim::config::{Overrides, RunConfig};
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let desk = RunConfig::load(&dir.join("desk.toml"), &Overrides::default()).unwrap();
    assert_eq!(desk.replications, 200);
    let full = RunConfig::load(&dir.join("full.toml"), &Overrides::default()).unwrap();
    assert_eq!(full.rho_levels.len() * full.n_levels.len(), 24);
    assert_eq!(full.population, bre_core::lgm::PopulationParams::default());
}
