//! One pass/fail line per acceptance criterion; run with `--nocapture` to see them.

mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specmeasure::measure::{cantor_approximant, span_combination, DiscreteMeasure, FredholmSystem};
use specmeasure::model::{MaxComponent, Problem, ProblemSpec};
use specmeasure::presets;
use specmeasure::spectral::{
    assemble_ktilde, classify_regime, level_lambda_p, perron, perron_dense, EigenobjectKind, PerronMethod, Regime,
    SpectralReport,
};
use specmeasure::verify::{
    recip_integral_on_grid, refinement_study, residual_report, weak_residual, StudyOptions, StudyQuantity,
    WeakQuadrature,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn classify(spec: &ProblemSpec) -> Result<SpectralReport, String> {
    let p = spec.build(0).map_err(|e| e.to_string())?;
    classify_regime(&p, &p.default_x0()).map_err(|e| e.to_string())
}

fn expect_regime(spec: &ProblemSpec, regime: Regime, label: &str) -> Result<(), String> {
    let r = classify(spec)?;
    ensure(r.regime == regime && r.confirmed, || {
        format!(
            "{label}: {} (confirmed {}), expected {}",
            r.regime.name(),
            r.confirmed,
            regime.name()
        )
    })
}

fn recip_study_limit(spec: &ProblemSpec, exact: f64) -> Result<f64, String> {
    let study =
        refinement_study(spec, 3, StudyQuantity::RecipIntegral, StudyOptions::default()).map_err(|e| e.to_string())?;
    let last = *study.values().last().unwrap();
    let rel = (last - exact).abs() / exact;
    ensure(rel <= 0.01, || {
        format!("recip integral {last} is {rel:.2e} from {exact}")
    })?;
    Ok(last)
}

fn criterion_1() -> Outcome {
    let spec = presets::ball(0.05).unwrap();
    let depth = spec.grid.grading.as_ref().map_or(0, |g| g.depth);
    ensure(depth >= 8, || format!("grading depth {depth} < 8"))?;
    let integral = recip_study_limit(&spec, 4.0 * PI)?;
    expect_regime(
        &presets::ball(0.1).unwrap(),
        Regime::ContinuousEigenfunction,
        "rho = 0.1",
    )?;
    expect_regime(&spec, Regime::SingularMeasure, "rho = 0.05")?;
    Ok(format!(
        "integral {integral:.6} vs 4pi; rho 0.1 continuous, rho 0.05 singular"
    ))
}

fn criterion_2() -> Outcome {
    let integral = recip_study_limit(&presets::cylinder(0.1).unwrap(), 2.0 * PI)?;
    let threshold = 1.0 / (2.0 * PI);
    expect_regime(
        &presets::cylinder(0.9 * threshold).unwrap(),
        Regime::SingularMeasure,
        "rho = 0.9/(2pi)",
    )?;
    expect_regime(
        &presets::cylinder(1.1 * threshold).unwrap(),
        Regime::ContinuousEigenfunction,
        "rho = 1.1/(2pi)",
    )?;
    Ok(format!(
        "integral {integral:.6} vs 2pi; flips between 0.9 and 1.1 times 1/(2pi)"
    ))
}

fn criterion_3() -> Outcome {
    let rho = 0.05;
    let p = presets::ball(rho).unwrap().build(0).unwrap();
    let i_h = recip_integral_on_grid(&p);
    let alpha = 1.0 / rho - i_h;
    let system = FredholmSystem::new(&p).map_err(|e| e.to_string())?;
    let mu = system
        .measure(&system.solve_atom(&p.default_x0(), alpha).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure((mu.atom_mass() - alpha).abs() <= 1e-12 * alpha, || {
        format!("atom weight {} vs 1/rho - I_h = {alpha}", mu.atom_mass())
    })?;
    let fraction = mu.atom_mass() / mu.total_mass();
    let expected = (1.0 / rho - 4.0 * PI) * rho;
    let rel = (fraction - expected).abs() / expected;
    ensure(rel <= 0.02, || {
        format!("atom fraction {fraction} vs {expected} ({rel:.2e})")
    })?;
    Ok(format!(
        "alpha {alpha:.6}, atom fraction {fraction:.6} vs {expected:.6}"
    ))
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut specs = Vec::new();
    for rho in [0.02, 0.05, 0.07, 1.0 / (4.0 * PI), 0.1] {
        specs.push(presets::ball(rho).unwrap());
    }
    for rho in [0.05, 0.1, 0.15, 1.0 / (2.0 * PI), 0.2] {
        specs.push(presets::cylinder(rho).unwrap());
    }
    for spec in &specs {
        let p = spec.build(0).map_err(|e| e.to_string())?;
        let rho = p.kernel().constant_value().unwrap();
        let oracle = rho * recip_integral_on_grid(&p);
        let lambda1 = perron(&assemble_ktilde(&p, &p.default_x0()).unwrap(), 1e-12, 100_000)
            .unwrap()
            .value;
        let rel = (lambda1 - oracle).abs() / oracle;
        worst = worst.max(rel);
        ensure(rel <= 1e-6, || {
            format!("rho {rho}: lambda1 {lambda1} vs rho I_h {oracle}")
        })?;
        let (diag, _) = level_lambda_p(&p).map_err(|e| e.to_string())?;
        if diag.lambda_p >= -p.sup_a() - p.tol().tol_classify {
            ensure(lambda1 <= 1.0 + 1e-3, || {
                format!("rho {rho}: lambda1 {lambda1} > 1 with lambda_p = -sup a")
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "max rel error {worst:.2e} over {} configs; lambda1 <= 1 on {checked} with lambda_p = -sup a",
        specs.len()
    ))
}

fn criterion_5() -> Outcome {
    let rho = 1.0 / (4.0 * PI);
    let spec = presets::ball(rho).unwrap();
    let r = classify(&spec)?;
    ensure(r.regime == Regime::L1Eigenfunction && r.confirmed, || {
        format!("{} (confirmed {})", r.regime.name(), r.confirmed)
    })?;
    let mut gaps = Vec::new();
    for level in 0..3 {
        let p = spec.build(level).unwrap();
        let l1 = perron(&assemble_ktilde(&p, &p.default_x0()).unwrap(), 1e-12, 100_000)
            .unwrap()
            .value;
        gaps.push((l1 - 1.0).abs());
    }
    ensure(gaps.iter().all(|g| *g <= 1e-3), || format!("|lambda1 - 1| = {gaps:?}"))?;
    ensure(gaps.windows(2).all(|w| w[1] <= w[0].max(1e-12)), || {
        format!("|lambda1 - 1| grows: {gaps:?}")
    })?;
    let object = r.eigenobject.ok_or("no eigen-object")?;
    ensure(object.kind == EigenobjectKind::L1Density, || {
        format!("{:?}", object.kind)
    })?;
    let density = object.measure.density().ok_or("no density")?;
    let mut worst: f64 = 0.0;
    for (x, psi) in density.grid.nodes().zip(&density.values) {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2.sqrt() >= 0.1 {
            let expected = rho / r2;
            worst = worst.max((psi - expected).abs() / expected);
        }
    }
    ensure(worst <= 0.01, || format!("psi vs rho/(a(x0) - a): {worst:.2e}"))?;
    Ok(format!(
        "|lambda1 - 1| = {}; psi rel error {worst:.2e} for |x| >= 0.1",
        sci(&gaps)
    ))
}

fn criterion_6() -> Outcome {
    let config = Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(
        config,
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let strategy = (common::case(), 0.01..100.0f64, 0.01..100.0f64);
    runner
        .run(&strategy, |(case, a1, a2)| {
            common::check_positive(&case, a1)?;
            common::check_linear(&case, a1)?;
            common::check_proportional(&case, a1, a2)
        })
        .map_err(|e| e.to_string())?;
    Ok("100 random configs: g > 0, g_alpha = alpha g_1 (1e-12), proportional after normalization (1e-10)".into())
}

struct Residuals {
    pointwise: f64,
    weak: f64,
}

fn residuals_of(p: &Problem, mu: &DiscreteMeasure) -> Result<Residuals, String> {
    let r = residual_report(p, mu, -p.sup_a()).map_err(|e| e.to_string())?;
    Ok(Residuals {
        pointwise: r.pointwise_sup,
        weak: r.weak_max(),
    })
}

fn segment(p: &Problem) -> (Vec<f64>, Vec<f64>) {
    match &p.max_set().components[0] {
        MaxComponent::Segment { from, to } => (from.clone(), to.clone()),
        other => panic!("expected a segment, got {other:?}"),
    }
}

/// Solutions built on one level: `(label, problem, measure)`.
fn constructed(level: usize) -> Result<Vec<(&'static str, Problem, DiscreteMeasure)>, String> {
    let err = |e: specmeasure::Error| e.to_string();
    let mut out = Vec::new();

    let ball = presets::ball(0.05).unwrap().build(level).map_err(err)?;
    let system = FredholmSystem::new(&ball).map_err(err)?;
    let alpha = 1.0 / 0.05 - recip_integral_on_grid(&ball);
    let mu = system
        .measure(&system.solve_atom(&ball.default_x0(), alpha).map_err(err)?)
        .map_err(err)?;
    out.push(("ball atom", ball.clone(), mu));

    let cyl = presets::cylinder(0.1).unwrap().build(level).map_err(err)?;
    let system = FredholmSystem::new(&cyl).map_err(err)?;
    let alpha = 1.0 / 0.1 - recip_integral_on_grid(&cyl);
    let atom = |t: f64| -> Result<DiscreteMeasure, String> {
        let x0 = cyl.select_x0(0, t).map_err(err)?;
        system
            .measure(&system.solve_atom(&x0, alpha).map_err(err)?)
            .map_err(err)
    };
    out.push(("cylinder atom", cyl.clone(), atom(0.5)?));
    let span = span_combination(&[atom(0.25)?, atom(0.75)?], &[0.5, 0.5]).map_err(err)?;
    out.push(("two-atom span", cyl.clone(), span));
    let (from, to) = segment(&cyl);
    let cantor = cantor_approximant(&from, &to, 8)
        .map_err(err)?
        .scaled(alpha)
        .map_err(err)?;
    let mu = system
        .measure(&system.solve_measure(&cantor).map_err(err)?)
        .map_err(err)?;
    out.push(("cantor level 8", cyl, mu));
    Ok(out)
}

fn criterion_7() -> Outcome {
    let levels: Vec<_> = (0..3).map(constructed).collect::<Result<_, _>>()?;
    let mut lines = Vec::new();
    for k in 0..levels[0].len() {
        let label = levels[0][k].0;
        let rs: Vec<Residuals> = levels
            .iter()
            .map(|l| residuals_of(&l[k].1, &l[k].2))
            .collect::<Result<_, _>>()?;
        let pw: Vec<f64> = rs.iter().map(|r| r.pointwise).collect();
        let weak: Vec<f64> = rs.iter().map(|r| r.weak).collect();
        ensure(pw.windows(2).all(|w| w[1] <= (1.1 * w[0]).max(1e-11)), || {
            format!("{label}: pointwise residuals {} do not decrease", sci(&pw))
        })?;
        ensure(pw.iter().all(|r| *r <= 1e-10), || {
            format!("{label}: pointwise residuals {}", sci(&pw))
        })?;
        ensure(weak.windows(2).all(|w| w[1] < w[0]), || {
            format!("{label}: weak residuals {} do not decrease", sci(&weak))
        })?;
        ensure(weak[2] <= 1e-3, || {
            format!("{label}: finest weak residual {:.2e}", weak[2])
        })?;

        let (_, p, mu) = &levels[2][k];
        let tests = specmeasure::verify::default_tests(3);
        let quad = WeakQuadrature::Reference(std::sync::Arc::new(p.reference_grid(1).unwrap()));
        let lambda = -p.sup_a() * 1.05;
        let bad_lambda = weak_residual(p, mu, lambda, &tests, &quad)
            .unwrap()
            .into_iter()
            .fold(0.0, f64::max);
        let density = mu.density().unwrap();
        let bumped = DiscreteMeasure::new(
            mu.atoms().to_vec(),
            Some(specmeasure::measure::Density {
                grid: density.grid.clone(),
                values: density.values.iter().map(|v| 1.1 * v).collect(),
            }),
            None,
        )
        .unwrap();
        let bumped = residuals_of(p, &bumped)?;
        let bad_density = bumped.pointwise.max(bumped.weak);
        ensure(bad_lambda > 1e-2 && bad_density > 1e-2, || {
            format!("{label}: negatives {bad_lambda:.2e} (lambda), {bad_density:.2e} (density)")
        })?;
        lines.push(format!("{label}: weak {:.1e} -> {:.1e}", weak[0], weak[2]));
    }
    Ok(lines.join("; "))
}

fn random_matrix(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = rng.gen_range(1..=8);
    let mut m = DMatrix::from_fn(n, n, |_, _| {
        if rng.gen_bool(0.6) {
            rng.gen_range(0.0..2.0)
        } else {
            0.0
        }
    });
    for i in 0..n {
        m[(i, i)] += rng.gen_range(0.05..1.0);
        m[(i, (i + 1) % n)] += rng.gen_range(0.05..1.0);
    }
    m
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let m = random_matrix(&mut rng);
        let oracle = m
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let pair = perron_dense(&m, 0.0, 1e-13, 100_000, PerronMethod::Power).map_err(|e| e.to_string())?;
        let err = (pair.value - oracle).abs() / oracle.max(1.0);
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("case {case}: {} vs {oracle}", pair.value))?;
        let slack = 1e-12 * oracle.max(1.0);
        for (step, (lo, hi)) in pair.cw_trace.iter().enumerate() {
            ensure(*lo <= oracle + slack && oracle <= *hi + slack, || {
                format!("case {case} step {step}: sandwich {lo} <= {oracle} <= {hi} fails")
            })?;
        }
    }
    Ok(format!("200 matrices, max error {worst:.1e}, sandwich at every step"))
}

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    for spec in [
        presets::ball(0.1).unwrap(),
        presets::ball(0.05).unwrap(),
        presets::cylinder(0.1).unwrap(),
    ] {
        let p = spec.build(0).unwrap();
        let (base, base_pair) = level_lambda_p(&p).map_err(|e| e.to_string())?;
        let base_regime = classify_regime(&p, &p.default_x0()).map_err(|e| e.to_string())?.regime;
        for c in [-0.7, 2.5] {
            let shifted_spec = spec.clone().with_coefficient(spec.coeff.shifted(c));
            let q = shifted_spec.build(0).map_err(|e| e.to_string())?;
            let (diag, pair) = level_lambda_p(&q).map_err(|e| e.to_string())?;
            let shift_err = (diag.lambda_p - (base.lambda_p - c)).abs();
            let vec_err = (&pair.vector - &base_pair.vector).amax();
            worst = worst.max(shift_err).max(vec_err);
            ensure(shift_err <= 1e-10, || format!("c = {c}: lambda_p off by {shift_err:e}"))?;
            ensure(vec_err <= 1e-10, || {
                format!("c = {c}: Perron vector off by {vec_err:e}")
            })?;
            let regime = classify_regime(&q, &q.default_x0()).map_err(|e| e.to_string())?.regime;
            ensure(regime == base_regime, || {
                format!("c = {c}: {} vs {}", regime.name(), base_regime.name())
            })?;
        }
    }
    Ok(format!("max deviation {worst:.1e}"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("1 ball threshold", criterion_1),
        ("2 cylinder threshold", criterion_2),
        ("3 atom weight", criterion_3),
        ("4 lambda1 rank-one oracle", criterion_4),
        ("5 boundary case", criterion_5),
        ("6 positivity and linearity", criterion_6),
        ("7 residual decay", criterion_7),
        ("8 Perron oracle", criterion_8),
        ("9 shift invariance", criterion_9),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                println!("FAIL criterion {name}: {detail}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
