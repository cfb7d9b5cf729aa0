use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};
use crate::measure::{kernel_moment, Atom, Density, DiscreteMeasure};
use crate::model::Problem;
use crate::spectral::{assemble_ktilde_at_level, perron_with, OperatorMatrix, PerronMethod};

/// Where the right-hand side `-int K(., y) dmu0(y)` comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum FredholmSource {
    Atom(Vec<f64>),
    Measure(DiscreteMeasure),
}

#[derive(Debug, Clone)]
pub struct FredholmSolution {
    pub g_values: Vec<f64>,
    /// Atom weight, or total mass of the source measure.
    pub alpha: f64,
    pub source: FredholmSource,
    /// `||(K~ - I) g + rhs||_inf`
    pub solver_residual: f64,
    pub lambda1: f64,
}

/// `K~ - I` at `a0 = sup a`, factored once.
pub struct FredholmSystem<'p> {
    problem: &'p Problem,
    ktilde: OperatorMatrix,
    lu: LU<f64, Dyn, Dyn>,
    lambda1: f64,
    tol_linear: f64,
}

impl<'p> FredholmSystem<'p> {
    /// Fails unless `lambda1(K~) < 1 - tol_classify`.
    pub fn new(problem: &'p Problem) -> Result<Self> {
        let tol = problem.tol();
        let x0 = problem.default_x0();
        let ktilde = assemble_ktilde_at_level(problem, &x0, problem.sup_a())?;
        let lambda1 = perron_with(&ktilde, tol.tol_power, tol.max_iter, PerronMethod::Auto)?.value;
        if lambda1 > 1.0 + tol.tol_classify {
            return Err(Error::Inconsistency { lambda1 });
        }
        if (lambda1 - 1.0).abs() <= tol.tol_classify {
            return Err(Error::NearSingularSystem { lambda1 });
        }
        let n = ktilde.len();
        let lu = (&ktilde.entries - DMatrix::<f64>::identity(n, n)).lu();
        Ok(FredholmSystem {
            problem,
            ktilde,
            lu,
            lambda1,
            tol_linear: tol.tol_linear,
        })
    }

    pub fn with_tol_linear(mut self, tol_linear: f64) -> Result<Self> {
        if !(tol_linear > 0.0) {
            return Err(Error::config("tol_linear must be positive"));
        }
        self.tol_linear = tol_linear;
        Ok(self)
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn ktilde(&self) -> &OperatorMatrix {
        &self.ktilde
    }

    /// Solves `(K~ - I) g = -rhs` with one step of iterative refinement.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let tol = self.tol_linear * rhs.amax().max(1.0);
        let target = -rhs;
        let mut g = self
            .lu
            .solve(&target)
            .ok_or_else(|| Error::LinearSolve("K~ - I is singular".into()))?;
        let mut residual = self.residual_vector(&g, rhs);
        if residual.amax() > tol {
            let correction = self
                .lu
                .solve(&(-&residual))
                .ok_or_else(|| Error::LinearSolve("K~ - I is singular".into()))?;
            g += correction;
            residual = self.residual_vector(&g, rhs);
        }
        let r = residual.amax();
        if !(r <= tol) {
            return Err(Error::LinearSolve(format!(
                "residual {r:e} above tolerance {tol:e} after refinement"
            )));
        }
        Ok((g, r))
    }

    fn residual_vector(&self, g: &DVector<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        &self.ktilde.entries * g - g + rhs
    }

    /// `g` for the source `alpha delta_{x0}`.
    pub fn solve_atom(&self, x0: &[f64], alpha: f64) -> Result<FredholmSolution> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!("alpha = {alpha} must be nonnegative")));
        }
        self.problem.check_in_max_set(x0)?;
        let grid = self.problem.grid();
        let kernel = self.problem.kernel();
        let rhs = DVector::from_iterator(grid.len(), grid.nodes().map(|x| alpha * kernel.eval(x, x0)));
        let (g, residual) = self.solve(&rhs)?;
        if alpha > 0.0 {
            check_positive(&g)?;
        }
        Ok(FredholmSolution {
            g_values: g.as_slice().to_vec(),
            alpha,
            source: FredholmSource::Atom(x0.to_vec()),
            solver_residual: residual,
            lambda1: self.lambda1,
        })
    }

    /// `g` for a source measure supported in the argmax set.
    pub fn solve_measure(&self, mu0: &DiscreteMeasure) -> Result<FredholmSolution> {
        if mu0.density().is_some() {
            return Err(Error::UnsupportedMeasure(
                "source measure must be singular (atoms only) and supported in the argmax set".into(),
            ));
        }
        if mu0.atoms().is_empty() {
            return Err(Error::UnsupportedMeasure("source measure is empty".into()));
        }
        for a in mu0.atoms() {
            self.problem
                .check_in_max_set(&a.point)
                .map_err(|e| Error::UnsupportedMeasure(format!("atom at {:?} outside the argmax set: {e}", a.point)))?;
        }
        let grid = self.problem.grid();
        let kernel = self.problem.kernel();
        let rhs = DVector::from_iterator(grid.len(), grid.nodes().map(|x| kernel_moment(kernel, mu0, x)));
        let (g, residual) = self.solve(&rhs)?;
        if !mu0.signed() && mu0.total_mass() > 0.0 {
            check_positive(&g)?;
        }
        Ok(FredholmSolution {
            g_values: g.as_slice().to_vec(),
            alpha: mu0.total_mass(),
            source: FredholmSource::Measure(mu0.clone()),
            solver_residual: residual,
            lambda1: self.lambda1,
        })
    }

    /// `mu0 + g / (sup a - a)`
    pub fn measure(&self, solution: &FredholmSolution) -> Result<DiscreteMeasure> {
        let a0 = self.problem.sup_a();
        let values = solution
            .g_values
            .iter()
            .zip(self.problem.a_values())
            .map(|(g, a)| g / (a0 - a))
            .collect();
        let density = Density {
            grid: self.problem.grid().clone(),
            values,
        };
        match &solution.source {
            FredholmSource::Atom(x0) => DiscreteMeasure::new(
                vec![Atom {
                    point: x0.clone(),
                    weight: solution.alpha,
                }],
                Some(density),
                None,
            ),
            FredholmSource::Measure(mu0) => {
                DiscreteMeasure::new(mu0.atoms().to_vec(), Some(density), mu0.singular_tag().cloned())
            }
        }
    }
}

fn check_positive(g: &DVector<f64>) -> Result<()> {
    match g.iter().position(|v| !(*v > 0.0)) {
        Some(index) => Err(Error::PositivityViolation { index, value: g[index] }),
        None => Ok(()),
    }
}

/// Solves `K~[g] - g = -alpha K(., x0)` on the problem grid.
pub fn solve_fredholm(problem: &Problem, x0: &[f64], alpha: f64, tol_linear: f64) -> Result<FredholmSolution> {
    FredholmSystem::new(problem)?
        .with_tol_linear(tol_linear)?
        .solve_atom(x0, alpha)
}

/// `alpha delta_{x0} + g / (a(x0) - a)`
pub fn build_atom_solution(problem: &Problem, x0: &[f64], alpha: f64) -> Result<DiscreteMeasure> {
    let system = FredholmSystem::new(problem)?;
    let solution = system.solve_atom(x0, alpha)?;
    system.measure(&solution)
}

/// `mu0 + g / (sup a - a)` for a singular `mu0` supported in the argmax set.
pub fn build_singular_solution(problem: &Problem, mu0: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let system = FredholmSystem::new(problem)?;
    let solution = system.solve_measure(mu0)?;
    system.measure(&solution)
}
