use bre_core::design::{complete_design, swmd6};
use bre_core::lgm::{PopulationParams, PopulationSettings};
use bre_core::metrics::OverlapCase;
use bre_core::sim::{grid, Arm, Condition, ConditionSpec, MIN_USABLE};
use bre_core::Error;

fn condition(rho: f64, n: usize, reps: usize, complete: bool, pop: &PopulationParams) -> Condition {
    let design = if complete { complete_design() } else { swmd6() };
    Condition::new(ConditionSpec::new(0, rho, n, reps, design, pop).unwrap()).unwrap()
}

#[test]
fn replication_is_reproducible() {
    let c = condition(0.3, 120, 3, false, &PopulationParams::default());
    assert_eq!(c.run_replication(5, 1), c.run_replication(5, 1));
    assert_ne!(c.run_replication(5, 1), c.run_replication(5, 2));
    assert_ne!(c.run_replication(5, 1), c.run_replication(6, 1));
}

#[test]
fn exclusions_balance_and_arms_coincide_without_missingness() {
    let c = condition(0.3, 150, 30, true, &PopulationParams::default());
    let result = c.run(11);
    for r in &result.records {
        assert_eq!(r.reference, r.comparison);
    }
    let m = &result.metrics[0];
    for arm in [Arm::Reference, Arm::Comparison] {
        let usable = result
            .records
            .iter()
            .filter(|r| r.arm(arm).usable())
            .count();
        assert_eq!(usable + result.exclusions.excluded(arm), 30);
    }
    assert_eq!(m.reference, m.comparison);
    let report = m.report.as_ref().unwrap();
    assert_eq!(report.re_percent, 100.0);
    assert_eq!(report.iqr_overlap, 1.0);
    assert_eq!(report.overlap_case, OverlapCase::Partial);
    assert_eq!(report.bre, 1.0 - report.amrb);
}

#[test]
fn single_replication_suppresses_metrics() {
    let c = condition(0.3, 400, 1, false, &PopulationParams::default());
    let result = c.run(3);
    assert!(result.records[0].reference.usable());
    assert!(result.records[0].comparison.usable());
    assert_eq!(result.exclusions.excluded(Arm::Reference), 0);
    assert_eq!(result.exclusions.excluded(Arm::Comparison), 0);
    assert!(matches!(
        result.metrics[0].report,
        Err(Error::ConditionDegenerate {
            usable: 1,
            minimum: MIN_USABLE,
            ..
        })
    ));
    assert!(result.is_degenerate());
}

/// Residual variances close to zero leave only sampling error in the growth
/// factors, which both arms see identically.
#[test]
fn near_noiseless_population_arms_agree() {
    let settings = PopulationSettings {
        wave_residual_var: 1e-4,
        indicator_reliability: 0.9999,
        ..PopulationSettings::default()
    };
    let pop = PopulationParams::from_settings(&settings).unwrap();
    let c = condition(0.3, 2000, 1, false, &pop);
    let rec = c.run_replication(17, 0);
    let r = rec.reference.estimates[0].unwrap();
    let k = rec.comparison.estimates[0].unwrap();
    assert!(rec.reference.converged && rec.comparison.converged);
    assert!((r - k).abs() < 5e-3, "{r} vs {k}");
    assert!((r - 0.3).abs() < 0.05, "{r}");
}

#[test]
fn reference_estimates_are_calibrated_at_n_500() {
    let c = condition(0.3, 500, 200, false, &PopulationParams::default());
    let result = c.run(2024);
    let close = result
        .records
        .iter()
        .filter_map(|r| r.reference.estimates[0])
        .filter(|e| (e - 0.3).abs() < 0.15)
        .count();
    assert!(close >= 190, "{close} of 200 within 0.15");
}

#[test]
fn grid_is_rho_major() {
    let specs = grid(
        &[0.1, 0.3, 0.55],
        &[40, 60, 80, 100, 300, 500, 800, 1000],
        5,
        &swmd6(),
        &PopulationParams::default(),
    )
    .unwrap();
    assert_eq!(specs.len(), 24);
    assert_eq!(
        (specs[8].condition_id, specs[8].rho, specs[8].n),
        (8, 0.3, 40)
    );
}
