use std::f64::consts::PI;

use specmeasure::geometry::Domain;
use specmeasure::model::{check_recip_integrability, CoefficientField, RecipIntegrability};
use specmeasure::presets;
use specmeasure::spectral::{assemble_full, classify_regime, level_lambda_p, EigenobjectKind, Regime};

#[test]
fn lambda_p_respects_discrete_bounds() {
    for spec in [
        presets::ball(0.05).unwrap(),
        presets::ball(0.1).unwrap(),
        presets::cylinder(0.3).unwrap(),
    ] {
        for level in 0..2 {
            let p = spec.build(level).unwrap();
            let (diag, _) = level_lambda_p(&p).unwrap();
            let m = assemble_full(&p);
            let max_a = p.a_values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let diag_max = m.entries.diagonal().max();
            let row_max = m.entries.row_iter().map(|r| r.sum()).fold(f64::NEG_INFINITY, f64::max);
            assert!(diag_max > max_a);
            assert!(diag.lambda_p <= -diag_max + 1e-9);
            assert!(diag.lambda_p >= -row_max - 1e-9);
            assert!(diag.lambda_p < -max_a);
        }
    }
}

#[test]
fn continuous_eigenpair_passes_residual_checks() {
    let p = presets::ball(0.1).unwrap().build(0).unwrap();
    let report = classify_regime(&p, &p.default_x0()).unwrap();
    assert_eq!(report.regime, Regime::ContinuousEigenfunction);
    assert_eq!(report.eigenobject.as_ref().unwrap().kind, EigenobjectKind::PerronVector);
    let residuals = report.residuals.unwrap();
    let tol = p.tol().tol_power;
    assert!(residuals.pointwise_sup <= 1e3 * tol, "{}", residuals.pointwise_sup);
    assert!(residuals.weak_max() <= 1e-2, "{}", residuals.weak_max());
}

#[test]
fn cylinder_integral_approaches_two_pi_from_below() {
    let a = CoefficientField::axial_power(1.0, 1.0, 1.0).unwrap();
    let domain = Domain::cylinder(1.0, 1.0).unwrap();
    let values: Vec<f64> = (6..=12)
        .step_by(2)
        .map(|depth| match check_recip_integrability(&a, &domain, depth).unwrap() {
            RecipIntegrability::Integrable { value } => value,
            other => panic!("depth {depth}: {other:?}"),
        })
        .collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]), "{values:?}");
    assert!(values.iter().all(|v| *v <= 2.0 * PI * (1.0 + 1e-12)));
    assert!((values.last().unwrap() - 2.0 * PI).abs() < 1e-2 * 2.0 * PI);
}

#[test]
fn non_integrable_reciprocal_is_detected() {
    let a = CoefficientField::radial_power(vec![0.0; 3], 1.0, 1.0, 4.0).unwrap();
    let domain = Domain::ball(vec![0.0; 3], 1.0).unwrap();
    assert_eq!(
        check_recip_integrability(&a, &domain, 10).unwrap(),
        RecipIntegrability::NonIntegrable
    );
}
