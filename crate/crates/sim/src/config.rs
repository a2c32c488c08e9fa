//! Run configuration.
//!
//! Configurations are TOML documents. Every key is checked: an unknown key,
//! a wrong type or an out-of-range value is an error that names the key.
//!
//! ```toml
//! master_seed = 42
//! rho_levels = [0.1, 0.3, 0.55]
//! n_levels = [100, 500]
//! replications = 200
//! overlap_mode = "paper"        # or "symmetric"
//! design = "swmd6"              # "swmd6", "complete" or "custom"
//! # design_mask = [[1,1,1,1,1], [1,1,1,1,0]]   # rows = groups, 0/1 per wave; custom only
//! # design_weights = [1, 1]                    # optional, custom only
//! params = ["slope_slope_corr"]
//! output_dir = "out"
//! workers = 4
//!
//! [population]
//! slope_variances = [0.25, 0.25]
//! ```

use std::path::{Path, PathBuf};

use bre_core::design::{complete_design, swmd6, MissingDesign};
use bre_core::fiml::resolve_param;
use bre_core::lgm::{PopulationParams, PopulationSettings, WAVES};
use bre_core::metrics::OverlapMode;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    master_seed: Option<u64>,
    rho_levels: Option<Vec<f64>>,
    n_levels: Option<Vec<usize>>,
    replications: Option<usize>,
    overlap_mode: Option<String>,
    design: Option<String>,
    design_mask: Option<Vec<Vec<u8>>>,
    design_weights: Option<Vec<u32>>,
    params: Option<Vec<String>>,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
    population: Option<RawPopulation>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPopulation {
    intercept_means: Option<[f64; 2]>,
    slope_means: Option<[f64; 2]>,
    intercept_variances: Option<[f64; 2]>,
    slope_variances: Option<[f64; 2]>,
    intercept_slope_corr: Option<[f64; 2]>,
    cross_intercept_corr: Option<f64>,
    cross_intercept_slope_corr: Option<[f64; 2]>,
    wave_residual_var: Option<f64>,
    loadings: Option<[f64; 3]>,
    indicator_intercepts: Option<[f64; 3]>,
    indicator_reliability: Option<f64>,
    time_scores: Option<[f64; WAVES]>,
}

impl RawPopulation {
    fn apply(self, s: &mut PopulationSettings) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { s.$f = v; } )* };
        }
        set!(
            intercept_means,
            slope_means,
            intercept_variances,
            slope_variances,
            intercept_slope_corr,
            cross_intercept_corr,
            cross_intercept_slope_corr,
            wave_residual_var,
            loadings,
            indicator_intercepts,
            indicator_reliability,
            time_scores
        );
    }
}

/// Values that command-line flags may supply instead of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub master_seed: Option<u64>,
    pub replications: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub master_seed: u64,
    pub rho_levels: Vec<f64>,
    pub n_levels: Vec<usize>,
    pub replications: usize,
    pub overlap_mode: OverlapMode,
    pub design: MissingDesign,
    pub params: Vec<String>,
    pub population: PopulationParams,
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_raw(raw, overrides)
    }

    fn from_raw(raw: RawConfig, overrides: &Overrides) -> Result<Self, ConfigError> {
        let master_seed = overrides
            .master_seed
            .or(raw.master_seed)
            .ok_or_else(|| invalid("master_seed", "required (or pass --seed)"))?;

        let rho_levels = raw
            .rho_levels
            .ok_or_else(|| invalid("rho_levels", "required"))?;
        if rho_levels.is_empty() {
            return Err(invalid("rho_levels", "must not be empty"));
        }
        if let Some(r) = rho_levels.iter().find(|r| r.is_nan() || r.abs() >= 1.0) {
            return Err(invalid(
                "rho_levels",
                format!("{r} is outside the open interval (-1, 1)"),
            ));
        }

        let n_levels = raw
            .n_levels
            .ok_or_else(|| invalid("n_levels", "required"))?;
        if n_levels.is_empty() {
            return Err(invalid("n_levels", "must not be empty"));
        }

        let replications = overrides
            .replications
            .or(raw.replications)
            .ok_or_else(|| invalid("replications", "required (or pass --reps)"))?;
        if replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        if replications > u32::MAX as usize {
            return Err(invalid("replications", "too large"));
        }

        let overlap_mode = match raw.overlap_mode {
            None => OverlapMode::default(),
            Some(s) => s.parse().map_err(|e: String| invalid("overlap_mode", e))?,
        };

        let design = build_design(raw.design.as_deref(), raw.design_mask, raw.design_weights)?;
        if let Some(&n) = n_levels.iter().find(|&&n| n < design.groups()) {
            return Err(invalid(
                "n_levels",
                format!("{n} is smaller than the {} design groups", design.groups()),
            ));
        }

        let params = raw
            .params
            .unwrap_or_else(|| vec![bre_core::fiml::SLOPE_SLOPE_CORR.to_string()]);
        if params.is_empty() {
            return Err(invalid("params", "must not be empty"));
        }
        for p in &params {
            resolve_param(p).map_err(|e| invalid("params", e.to_string()))?;
        }

        let mut settings = PopulationSettings::default();
        if let Some(pop) = raw.population {
            pop.apply(&mut settings);
        }
        let population = PopulationParams::from_settings(&settings)
            .map_err(|e| invalid("population", e.to_string()))?;
        for &rho in &rho_levels {
            population
                .clone()
                .with_slope_slope_corr(rho)
                .map_err(|e| invalid("rho_levels", format!("{rho}: {e}")))?;
        }

        if raw.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }

        Ok(Self {
            master_seed,
            rho_levels,
            n_levels,
            replications,
            overlap_mode,
            design,
            params,
            population,
            output_dir: overrides
                .output_dir
                .clone()
                .or(raw.output_dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            workers: raw.workers,
        })
    }
}

fn build_design(
    name: Option<&str>,
    mask: Option<Vec<Vec<u8>>>,
    weights: Option<Vec<u32>>,
) -> Result<MissingDesign, ConfigError> {
    let name = name.unwrap_or("swmd6");
    if name != "custom" {
        if mask.is_some() {
            return Err(invalid(
                "design_mask",
                "only allowed with design = \"custom\"",
            ));
        }
        if weights.is_some() {
            return Err(invalid(
                "design_weights",
                "only allowed with design = \"custom\"",
            ));
        }
    }
    match name {
        "swmd6" => Ok(swmd6()),
        "complete" => Ok(complete_design()),
        "custom" => {
            let mask =
                mask.ok_or_else(|| invalid("design_mask", "required for a custom design"))?;
            let rows = mask
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|v| match v {
                            0 => Ok(false),
                            1 => Ok(true),
                            other => Err(invalid(
                                "design_mask",
                                format!("entry {other} is not 0 or 1"),
                            )),
                        })
                        .collect::<Result<Vec<bool>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let result = match weights {
                Some(w) => MissingDesign::new("custom", rows, w),
                None => MissingDesign::balanced("custom", rows),
            };
            result.map_err(|e| invalid("design_mask", e.to_string()))
        }
        other => Err(invalid(
            "design",
            format!("unknown design `{other}` (expected swmd6, complete or custom)"),
        )),
    }
}
