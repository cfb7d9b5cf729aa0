//! Strong and weak residuals of eigen-solutions, and grid refinement studies.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GradeSpec, Grid};
use crate::measure::{kernel_moment, same_grid, DiscreteMeasure, FredholmSystem};
use crate::model::{recip_profile, Problem, ProblemSpec};
use crate::spectral::{assemble_full, assemble_ktilde, perron_with, PerronMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `prod_k x_k^{e_k}`
    Monomial { exponents: Vec<u32> },
    /// `prod_k cos(x_k)`
    CosProduct,
}

impl TestFunction {
    pub fn id(&self) -> String {
        match self {
            TestFunction::CosProduct => "cos_product".into(),
            TestFunction::Monomial { exponents } => {
                let factors: Vec<String> = exponents
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| **e > 0)
                    .map(|(k, e)| {
                        if *e == 1 {
                            format!("x{}", k + 1)
                        } else {
                            format!("x{}^{e}", k + 1)
                        }
                    })
                    .collect();
                if factors.is_empty() {
                    "1".into()
                } else {
                    factors.join("*")
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::CosProduct => x.iter().map(|v| v.cos()).product(),
            TestFunction::Monomial { exponents } => x.iter().zip(exponents).map(|(v, e)| v.powi(*e as i32)).product(),
        }
    }
}

/// Monomials of degree at most 2 and the product of cosines.
pub fn default_tests(dim: usize) -> Vec<TestFunction> {
    let mut tests = vec![TestFunction::Monomial {
        exponents: vec![0; dim],
    }];
    for k in 0..dim {
        let mut e = vec![0; dim];
        e[k] = 1;
        tests.push(TestFunction::Monomial { exponents: e });
    }
    for k in 0..dim {
        for l in k..dim {
            let mut e = vec![0; dim];
            e[k] += 1;
            e[l] += 1;
            tests.push(TestFunction::Monomial { exponents: e });
        }
    }
    tests.push(TestFunction::CosProduct);
    tests
}

/// Nodes used for the `dx` integral of the weak form.
#[derive(Debug, Clone)]
pub enum WeakQuadrature {
    /// The problem grid.
    Native,
    /// An independent (usually finer) grid.
    Reference(Arc<Grid>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub pointwise_sup: f64,
    pub weak_residuals: Vec<(String, f64)>,
    pub grid_level: usize,
    pub lambda: f64,
}

impl ResidualReport {
    pub fn weak_max(&self) -> f64 {
        self.weak_residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

fn check_density_grid(problem: &Problem, mu: &DiscreteMeasure) -> Result<()> {
    match mu.density() {
        Some(d) if !same_grid(&d.grid, problem.grid()) => {
            Err(Error::config("measure density is not defined on the problem grid"))
        }
        _ => Ok(()),
    }
}

/// `max_i |int K(x_i, y) dmu(y) + (a(x_i) + lambda) f(x_i)|` over grid nodes,
/// relative to `max_i |int K(x_i, y) dmu(y)|`.
pub fn pointwise_residual(problem: &Problem, mu: &DiscreteMeasure, lambda: f64) -> Result<f64> {
    check_density_grid(problem, mu)?;
    let tol = problem.max_set_tolerance() + 1e-12 * lambda.abs().max(1.0);
    for atom in mu.atoms().iter().filter(|a| a.weight != 0.0) {
        let defect = problem.coeff().eval(&atom.point) + lambda;
        if defect.abs() > tol {
            return Err(Error::InvalidEigenpair(format!(
                "atom at {:?} has a + lambda = {defect:e}; atoms must sit where a = -lambda",
                atom.point
            )));
        }
    }
    let grid = problem.grid();
    let kernel = problem.kernel();
    let density = mu.density().map(|d| d.values.as_slice());
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, x) in grid.nodes().enumerate() {
        let moment = kernel_moment(kernel, mu, x);
        let f = density.map_or(0.0, |d| d[i]);
        worst = worst.max((moment + (problem.a_values()[i] + lambda) * f).abs());
        scale = scale.max(moment.abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// `int phi(x) int K(x, y) dmu(y) dx + int (a + lambda) phi dmu` per test function,
/// without normalization.
pub fn weak_residual_raw(
    problem: &Problem,
    mu: &DiscreteMeasure,
    lambda: f64,
    tests: &[TestFunction],
    quadrature: &WeakQuadrature,
) -> Result<Vec<f64>> {
    let kernel = problem.kernel();
    let coeff = problem.coeff();
    let grid = match quadrature {
        WeakQuadrature::Native => problem.grid().clone(),
        WeakQuadrature::Reference(g) => g.clone(),
    };
    if grid.dim() != problem.domain().dim() {
        return Err(Error::config("reference grid dimension does not match the domain"));
    }
    let moments: Vec<f64> = grid.nodes().map(|y| kernel_moment(kernel, mu, y)).collect();
    Ok(tests
        .iter()
        .map(|phi| {
            let spread: f64 = grid
                .nodes()
                .zip(grid.weights())
                .zip(&moments)
                .map(|((y, w), m)| w * phi.eval(y) * m)
                .sum();
            let atoms: f64 = mu
                .atoms()
                .iter()
                .map(|a| (coeff.eval(&a.point) + lambda) * phi.eval(&a.point) * a.weight)
                .sum();
            let density: f64 = mu.density().map_or(0.0, |d| {
                d.grid
                    .nodes()
                    .zip(d.grid.weights())
                    .zip(&d.values)
                    .map(|((x, w), f)| (coeff.eval(x) + lambda) * phi.eval(x) * f * w)
                    .sum()
            });
            spread + atoms + density
        })
        .collect())
}

/// Absolute weak residuals normalized by the total variation of `mu`.
pub fn weak_residual(
    problem: &Problem,
    mu: &DiscreteMeasure,
    lambda: f64,
    tests: &[TestFunction],
    quadrature: &WeakQuadrature,
) -> Result<Vec<f64>> {
    let mass = mu.total_variation();
    if !(mass > 0.0) {
        return Err(Error::Normalization("weak residual of the zero measure".into()));
    }
    Ok(weak_residual_raw(problem, mu, lambda, tests, quadrature)?
        .into_iter()
        .map(|r| r.abs() / mass)
        .collect())
}

/// Both residuals with the default test family; the weak form integrates on
/// the grid one level finer.
pub fn residual_report(problem: &Problem, mu: &DiscreteMeasure, lambda: f64) -> Result<ResidualReport> {
    let tests = default_tests(problem.domain().dim());
    let reference = WeakQuadrature::Reference(Arc::new(problem.reference_grid(1)?));
    let weak = weak_residual(problem, mu, lambda, &tests, &reference)?;
    Ok(ResidualReport {
        pointwise_sup: pointwise_residual(problem, mu, lambda)?,
        weak_residuals: tests.iter().map(TestFunction::id).zip(weak).collect(),
        grid_level: problem.level(),
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyQuantity {
    LambdaP,
    Lambda1,
    Residual,
    RecipIntegral,
}

impl StudyQuantity {
    pub fn name(&self) -> &'static str {
        match self {
            StudyQuantity::LambdaP => "lambda_p",
            StudyQuantity::Lambda1 => "lambda1",
            StudyQuantity::Residual => "residual",
            StudyQuantity::RecipIntegral => "recip_integral",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub level: usize,
    pub n: usize,
    pub value: f64,
    /// `(v_{l-1} - v_{l-2}) / (v_l - v_{l-1})`
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub quantity: StudyQuantity,
    pub rows: Vec<StudyRow>,
}

impl RefinementStudy {
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    /// `log2` of each defined ratio.
    pub fn empirical_orders(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.ratio.map(|q| q.abs().log2())).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::config(format!("writing study CSV: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "N", "value", "ratio"]).map_err(io)?;
        for r in &self.rows {
            let ratio = r.ratio.map(|q| format!("{q:e}")).unwrap_or_default();
            w.write_record([r.level.to_string(), r.n.to_string(), format!("{:e}", r.value), ratio])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }
}

/// Options shared by the study quantities that need an `x0` or an atom weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    /// Fraction along a segment component of the argmax set.
    pub x0_fraction: f64,
    /// Atom weight; for constant kernels defaults to `1/rho - I_h`, else 1.
    pub alpha: Option<f64>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            x0_fraction: 0.5,
            alpha: None,
        }
    }
}

/// `sum_j w_j / (sup a - a(x_j))`
pub fn recip_integral_on_grid(problem: &Problem) -> f64 {
    let sup = problem.sup_a();
    problem
        .grid()
        .weights()
        .iter()
        .zip(problem.a_values())
        .map(|(w, a)| w / (sup - a))
        .sum()
}

/// Default atom weight: `1/rho - I_h` for a constant kernel when positive, else 1.
pub fn default_alpha(problem: &Problem) -> f64 {
    match problem.kernel().constant_value() {
        Some(rho) => {
            let alpha = 1.0 / rho - recip_integral_on_grid(problem);
            if alpha > 0.0 {
                alpha
            } else {
                1.0
            }
        }
        None => 1.0,
    }
}

/// Runs one quantity on grid levels `0..levels`.
///
/// For `recip_integral` level `l` also deepens the grading cascade by `l`
/// and reports the integral outside the innermost exclusion neighborhood.
pub fn refinement_study(
    spec: &ProblemSpec,
    levels: usize,
    quantity: StudyQuantity,
    options: StudyOptions,
) -> Result<RefinementStudy> {
    if levels < 2 {
        return Err(Error::config("a refinement study needs at least 2 levels"));
    }
    let mut rows: Vec<StudyRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let (n, value) = study_value(spec, level, quantity, options)?;
        let ratio = match rows.len() {
            0 | 1 => None,
            k => {
                let (a, b) = (rows[k - 2].value, rows[k - 1].value);
                let (d_prev, d_last) = (b - a, value - b);
                if d_last != 0.0 && d_prev != 0.0 {
                    Some(d_prev / d_last)
                } else {
                    None
                }
            }
        };
        rows.push(StudyRow { level, n, value, ratio });
    }
    Ok(RefinementStudy { quantity, rows })
}

fn study_value(
    spec: &ProblemSpec,
    level: usize,
    quantity: StudyQuantity,
    options: StudyOptions,
) -> Result<(usize, f64)> {
    if quantity == StudyQuantity::RecipIntegral {
        let problem = spec.build(0)?;
        let mut grid = spec.grid.refined(level);
        let base = grid.grading.clone().unwrap_or_default();
        grid.grading = Some(GradeSpec {
            depth: base.depth + level,
            target: base.target.or_else(|| problem.max_set().grading_target()),
            ..base
        });
        let profile = recip_profile(problem.coeff(), problem.max_set(), problem.domain(), &grid)?;
        let value = *profile.partials.last().expect("depth >= 3");
        return Ok((grid.build(problem.domain())?.len(), value));
    }
    let problem = spec.build(level)?;
    let n = problem.grid().len();
    let tol = problem.tol();
    let value = match quantity {
        StudyQuantity::LambdaP => {
            -perron_with(
                &assemble_full(&problem),
                tol.tol_power,
                tol.max_iter,
                PerronMethod::Auto,
            )?
            .value
        }
        StudyQuantity::Lambda1 => {
            let x0 = problem.select_x0(0, options.x0_fraction)?;
            perron_with(
                &assemble_ktilde(&problem, &x0)?,
                tol.tol_power,
                tol.max_iter,
                PerronMethod::Auto,
            )?
            .value
        }
        StudyQuantity::Residual => {
            let x0 = problem.select_x0(0, options.x0_fraction)?;
            let alpha = options.alpha.unwrap_or_else(|| default_alpha(&problem));
            let system = FredholmSystem::new(&problem)?;
            let mu = system.measure(&system.solve_atom(&x0, alpha)?)?;
            residual_report(&problem, &mu, -problem.sup_a())?.weak_max()
        }
        StudyQuantity::RecipIntegral => unreachable!("handled above"),
    };
    Ok((n, value))
}
