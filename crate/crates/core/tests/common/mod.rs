//! Random valid configurations in the singular regime and the solution checks run on them.

use proptest::prelude::*;
use specmeasure::geometry::{Domain, GradeSpec, GridSpec};
use specmeasure::measure::{normalize, FredholmSystem};
use specmeasure::model::{CoefficientField, Kernel, Problem, ProblemSpec, Profile, ScaleField};
use specmeasure::spectral::{assemble_ktilde, perron};
use specmeasure::verify::recip_integral_on_grid;

#[derive(Debug, Clone)]
pub struct Case {
    pub dim: usize,
    pub center: Vec<f64>,
    pub height: f64,
    pub scale: f64,
    pub exponent: f64,
    pub resolution: usize,
    pub depth: usize,
    pub dispersal: bool,
    pub width: f64,
    /// Target `lambda1(K~)`, strictly below 1.
    pub lambda1: f64,
}

pub fn case() -> impl Strategy<Value = Case> {
    (
        1usize..=3,
        prop::collection::vec(0.15..0.85f64, 3),
        -2.0..2.0f64,
        0.3..3.0f64,
        0.3..0.9f64,
        4usize..=10,
        3usize..=6,
        any::<bool>(),
        0.1..1.0f64,
        0.05..0.9f64,
    )
        .prop_map(
            |(dim, c, height, scale, e, resolution, depth, dispersal, width, lambda1)| Case {
                dim,
                center: c[..dim].to_vec(),
                height,
                scale,
                exponent: e * dim as f64,
                resolution,
                depth,
                dispersal,
                width,
                lambda1,
            },
        )
}

fn spec(case: &Case, kernel: Kernel) -> ProblemSpec {
    let domain = match case.dim {
        1 => Domain::interval(0.0, 1.0).unwrap(),
        _ => Domain::ball(case.center.clone(), 0.5 + case.width).unwrap(),
    };
    ProblemSpec::new(
        domain,
        kernel,
        CoefficientField::radial_power(case.center.clone(), case.height, case.scale, case.exponent).unwrap(),
        GridSpec::new(case.resolution)
            .angular(case.resolution)
            .graded(GradeSpec::with_depth(case.depth)),
    )
}

fn base_kernel(case: &Case) -> Kernel {
    if case.dispersal {
        Kernel::dispersal(Profile::Gaussian, ScaleField::Constant(case.width), case.dim, 1.0).unwrap()
    } else {
        Kernel::constant(1.0).unwrap()
    }
}

/// Problem in the singular regime with `lambda1(K~) = case.lambda1`, using
/// that `K~` is linear in the kernel amplitude.
pub fn problem(case: &Case) -> Problem {
    let unit = spec(case, base_kernel(case)).build(0).unwrap();
    let kernel = if case.dispersal {
        let l1 = perron(&assemble_ktilde(&unit, &unit.default_x0()).unwrap(), 1e-12, 100_000)
            .unwrap()
            .value;
        Kernel::dispersal(
            Profile::Gaussian,
            ScaleField::Constant(case.width),
            case.dim,
            case.lambda1 / l1,
        )
        .unwrap()
    } else {
        Kernel::constant(case.lambda1 / recip_integral_on_grid(&unit)).unwrap()
    };
    spec(case, kernel).build(0).unwrap()
}

pub fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

/// `g > 0` and a positive density at every node.
pub fn check_positive(case: &Case, alpha: f64) -> Result<(), TestCaseError> {
    let p = problem(case);
    let system = FredholmSystem::new(&p).unwrap();
    prop_assert!((system.lambda1() - case.lambda1).abs() < 1e-6 * case.lambda1.max(1.0));
    let sol = system.solve_atom(&p.default_x0(), alpha).unwrap();
    prop_assert!(sol.g_values.iter().all(|g| *g > 0.0));
    let mu = system.measure(&sol).unwrap();
    prop_assert!(mu.density().unwrap().values.iter().all(|f| *f > 0.0));
    prop_assert!(!mu.signed());
    Ok(())
}

/// `g_alpha = alpha g_1` to 1e-12 relative.
pub fn check_linear(case: &Case, alpha: f64) -> Result<(), TestCaseError> {
    let p = problem(case);
    let system = FredholmSystem::new(&p).unwrap();
    let x0 = p.default_x0();
    let g1 = system.solve_atom(&x0, 1.0).unwrap().g_values;
    let ga = system.solve_atom(&x0, alpha).unwrap().g_values;
    let scale = max_abs(g1.iter().map(|g| alpha * g));
    let diff = max_abs(ga.iter().zip(&g1).map(|(a, b)| a - alpha * b));
    prop_assert!(diff <= 1e-12 * scale, "{diff:e} vs {scale:e}");
    Ok(())
}

/// Same-`x0` solutions agree to 1e-10 after normalization to unit mass.
pub fn check_proportional(case: &Case, a1: f64, a2: f64) -> Result<(), TestCaseError> {
    let p = problem(case);
    let system = FredholmSystem::new(&p).unwrap();
    let x0 = p.default_x0();
    let m1 = normalize(&system.measure(&system.solve_atom(&x0, a1).unwrap()).unwrap(), 1.0).unwrap();
    let m2 = normalize(&system.measure(&system.solve_atom(&x0, a2).unwrap()).unwrap(), 1.0).unwrap();
    let d1 = &m1.density().unwrap().values;
    let d2 = &m2.density().unwrap().values;
    let scale = max_abs(d1.iter().copied()).max(1.0);
    let diff = max_abs(d1.iter().zip(d2).map(|(x, y)| x - y));
    prop_assert!(diff <= 1e-10 * scale, "{diff:e}");
    prop_assert!((m1.atom_mass() - m2.atom_mass()).abs() <= 1e-10);
    Ok(())
}
