//! Replication and condition logic of the Monte Carlo study.
//!
//! One replication draws a single complete dataset, fits it (reference arm),
//! masks the same draw with the planned design and fits again (comparison
//! arm). A condition pools the usable estimates of each arm over its
//! replications and reduces them to a [`MetricReport`] per tracked parameter.
//!
//! Random streams are counter based: replication `r` of condition `c` under
//! master seed `s` uses ChaCha20 keyed by `seed_from_u64(s)` on stream
//! `(c << 32) | r`, so any replication can be recomputed in isolation and
//! results do not depend on how work is scheduled. Within that stream, data
//! generation starts at word 0, group assignment at word `2^64` and fit
//! restarts at word `2^65`; both arms restart from the same position.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::design::{apply_design, assign_groups, MissingDesign};
use crate::fiml::{self, FitOptions, FitResult, ModelSpec};
use crate::lgm::{build_moments, generate_dataset, ModelMoments, PopulationParams};
use crate::metrics::{compute_report, EstimateSample, MetricReport, OverlapMode};
use crate::{Error, Result};

/// Fewest usable estimates per arm before metrics are reported.
pub const MIN_USABLE: usize = 10;

const GROUPS_WORD_POS: u128 = 1 << 64;
const FIT_WORD_POS: u128 = 1 << 65;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Data,
    Groups,
    Fit,
}

/// The random stream for one purpose within one replication.
pub fn replication_rng(
    master_seed: u64,
    condition_index: u32,
    rep_index: u32,
    purpose: StreamPurpose,
) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream((u64::from(condition_index) << 32) | u64::from(rep_index));
    rng.set_word_pos(match purpose {
        StreamPurpose::Data => 0,
        StreamPurpose::Groups => GROUPS_WORD_POS,
        StreamPurpose::Fit => FIT_WORD_POS,
    });
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Reference,
    Comparison,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Reference => "reference",
            Arm::Comparison => "comparison",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSpec {
    pub condition_id: u32,
    pub rho: f64,
    pub n: usize,
    pub replications: usize,
    pub design: MissingDesign,
    /// Generating parameters with the slope-slope correlation already set to `rho`.
    pub population: PopulationParams,
    pub overlap_mode: OverlapMode,
    /// Quantities to collect; see [`fiml::resolve_param`].
    pub params: Vec<String>,
    pub fit_options: FitOptions,
}

impl ConditionSpec {
    /// A condition with the population's slope-slope correlation set to `rho`.
    pub fn new(
        condition_id: u32,
        rho: f64,
        n: usize,
        replications: usize,
        design: MissingDesign,
        population: &PopulationParams,
    ) -> Result<Self> {
        Ok(Self {
            condition_id,
            rho,
            n,
            replications,
            design,
            population: population.clone().with_slope_slope_corr(rho)?,
            overlap_mode: OverlapMode::default(),
            params: alloc::vec![fiml::SLOPE_SLOPE_CORR.to_string()],
            fit_options: FitOptions::default(),
        })
    }
}

/// Outcome of one fit in one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmRecord {
    pub converged: bool,
    pub admissible: bool,
    /// One entry per tracked parameter; `None` when the fit did not converge
    /// or the quantity is undefined for the solution.
    pub estimates: Vec<Option<f64>>,
    pub loglik: f64,
    pub iterations: usize,
    pub restarts: usize,
}

impl ArmRecord {
    fn from_fit(fit: &FitResult, params: &[String]) -> Self {
        Self {
            converged: fit.converged,
            admissible: fit.admissible,
            estimates: params
                .iter()
                .map(|p| fiml::extract_param(fit, p).ok())
                .collect(),
            loglik: fit.loglik,
            iterations: fit.n_iterations,
            restarts: fit.n_restarts,
        }
    }

    fn failed(n_params: usize) -> Self {
        Self {
            converged: false,
            admissible: false,
            estimates: alloc::vec![None; n_params],
            loglik: f64::NAN,
            iterations: 0,
            restarts: 0,
        }
    }

    /// Converged, admissible, and every tracked quantity defined.
    pub fn usable(&self) -> bool {
        self.converged && self.admissible && self.estimates.iter().all(Option::is_some)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: u32,
    pub reference: ArmRecord,
    pub comparison: ArmRecord,
}

impl RepRecord {
    pub fn arm(&self, arm: Arm) -> &ArmRecord {
        match arm {
            Arm::Reference => &self.reference,
            Arm::Comparison => &self.comparison,
        }
    }
}

/// A validated condition with its implied moments precomputed.
#[derive(Debug, Clone)]
pub struct Condition {
    spec: ConditionSpec,
    moments: ModelMoments,
    model: ModelSpec,
    truths: Vec<f64>,
}

impl Condition {
    pub fn new(spec: ConditionSpec) -> Result<Self> {
        if spec.replications == 0 {
            return Err(Error::InsufficientSample { needed: 1, got: 0 });
        }
        if spec.n < spec.design.groups() {
            return Err(Error::InsufficientSample {
                needed: spec.design.groups(),
                got: spec.n,
            });
        }
        let implied_rho = spec.population.slope_slope_corr();
        if (implied_rho - spec.rho).abs() > 1e-12 {
            return Err(Error::InvalidParams(alloc::format!(
                "population slope-slope correlation {implied_rho} differs from rho {}",
                spec.rho
            )));
        }
        let moments = build_moments(&spec.population)?;
        let truths = spec
            .params
            .iter()
            .map(|p| fiml::true_value(&spec.population, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model: ModelSpec::from_population(&spec.population),
            spec,
            moments,
            truths,
        })
    }

    pub fn spec(&self) -> &ConditionSpec {
        &self.spec
    }

    /// Population values of the tracked quantities.
    pub fn truths(&self) -> &[f64] {
        &self.truths
    }

    pub fn run_replication(&self, master_seed: u64, rep: u32) -> RepRecord {
        let spec = &self.spec;
        let id = spec.condition_id;
        let params = &spec.params;
        let mut data_rng = replication_rng(master_seed, id, rep, StreamPurpose::Data);
        let data = match generate_dataset(&self.moments, spec.n, &mut data_rng) {
            Ok(d) => d,
            Err(_) => {
                return RepRecord {
                    rep,
                    reference: ArmRecord::failed(params.len()),
                    comparison: ArmRecord::failed(params.len()),
                }
            }
        };
        let arm = |data: &crate::lgm::DataMatrix| {
            let mut fit_rng = replication_rng(master_seed, id, rep, StreamPurpose::Fit);
            match fiml::fit(data, &self.model, None, &spec.fit_options, &mut fit_rng) {
                Ok(fit) => ArmRecord::from_fit(&fit, params),
                Err(_) => ArmRecord::failed(params.len()),
            }
        };
        let reference = arm(&data);
        let mut group_rng = replication_rng(master_seed, id, rep, StreamPurpose::Groups);
        let comparison = assign_groups(spec.n, &spec.design, &mut group_rng)
            .and_then(|labels| apply_design(&data, &labels, &spec.design))
            .map(|masked| arm(&masked))
            .unwrap_or_else(|_| ArmRecord::failed(params.len()));
        RepRecord {
            rep,
            reference,
            comparison,
        }
    }

    /// Runs every replication in order on the current thread.
    pub fn run(&self, master_seed: u64) -> ConditionResult {
        let records = (0..self.spec.replications as u32)
            .map(|rep| self.run_replication(master_seed, rep))
            .collect();
        self.summarize(records)
    }

    /// Pools replication records (in replication order) into a result.
    pub fn summarize(&self, records: Vec<RepRecord>) -> ConditionResult {
        let spec = &self.spec;
        let exclusions = Exclusions::count(&records);
        let metrics = spec
            .params
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let pooled = |arm: Arm| -> Vec<f64> {
                    records
                        .iter()
                        .map(|r| r.arm(arm))
                        .filter(|a| a.usable())
                        .filter_map(|a| a.estimates[k])
                        .collect()
                };
                let reference = pooled(Arm::Reference);
                let comparison = pooled(Arm::Comparison);
                let report =
                    metrics_for(&reference, &comparison, self.truths[k], spec.overlap_mode);
                ParamMetrics {
                    param: name.clone(),
                    truth: self.truths[k],
                    reference,
                    comparison,
                    report,
                }
            })
            .collect();
        ConditionResult {
            condition_id: spec.condition_id,
            rho: spec.rho,
            n: spec.n,
            replications: spec.replications,
            records,
            exclusions,
            metrics,
        }
    }
}

fn metrics_for(
    reference: &[f64],
    comparison: &[f64],
    truth: f64,
    mode: OverlapMode,
) -> Result<MetricReport> {
    for (arm, v) in [("reference", reference), ("comparison", comparison)] {
        if v.len() < MIN_USABLE {
            return Err(Error::ConditionDegenerate {
                arm,
                usable: v.len(),
                minimum: MIN_USABLE,
            });
        }
    }
    compute_report(
        &EstimateSample::new("reference", reference.to_vec())?,
        &EstimateSample::new("comparison", comparison.to_vec())?,
        truth,
        mode,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Exclusions {
    pub nonconverged_ref: usize,
    pub nonconverged_comp: usize,
    pub inadmissible_ref: usize,
    pub inadmissible_comp: usize,
}

impl Exclusions {
    fn count(records: &[RepRecord]) -> Self {
        let mut e = Self::default();
        for r in records {
            for (arm, nonconv, inadm) in [
                (
                    &r.reference,
                    &mut e.nonconverged_ref,
                    &mut e.inadmissible_ref,
                ),
                (
                    &r.comparison,
                    &mut e.nonconverged_comp,
                    &mut e.inadmissible_comp,
                ),
            ] {
                if !arm.converged {
                    *nonconv += 1;
                } else if !arm.usable() {
                    *inadm += 1;
                }
            }
        }
        e
    }

    pub fn excluded(&self, arm: Arm) -> usize {
        match arm {
            Arm::Reference => self.nonconverged_ref + self.inadmissible_ref,
            Arm::Comparison => self.nonconverged_comp + self.inadmissible_comp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamMetrics {
    pub param: String,
    pub truth: f64,
    /// Usable reference-arm estimates in replication order.
    pub reference: Vec<f64>,
    pub comparison: Vec<f64>,
    /// `Err(ConditionDegenerate)` when an arm has fewer than [`MIN_USABLE`] estimates.
    pub report: Result<MetricReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub condition_id: u32,
    pub rho: f64,
    pub n: usize,
    pub replications: usize,
    pub records: Vec<RepRecord>,
    pub exclusions: Exclusions,
    pub metrics: Vec<ParamMetrics>,
}

impl ConditionResult {
    pub fn is_degenerate(&self) -> bool {
        self.metrics
            .iter()
            .any(|m| matches!(m.report, Err(Error::ConditionDegenerate { .. })))
    }
}

/// Cartesian product of the levels, `rho`-major; ids are positions in the list.
pub fn grid(
    rho_levels: &[f64],
    n_levels: &[usize],
    replications: usize,
    design: &MissingDesign,
    population: &PopulationParams,
) -> Result<Vec<ConditionSpec>> {
    let mut out = Vec::with_capacity(rho_levels.len() * n_levels.len());
    for &rho in rho_levels {
        for &n in n_levels {
            let id = out.len() as u32;
            out.push(ConditionSpec::new(
                id,
                rho,
                n,
                replications,
                design.clone(),
                population,
            )?);
        }
    }
    Ok(out)
}
