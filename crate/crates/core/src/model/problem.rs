use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Hypothesis, Result};
use crate::geometry::{Domain, GradeSpec, Grid, GridSpec};
use crate::model::coefficient::{detect_argmax_set, recip_profile, CoefficientField, MaxSet, RecipIntegrability};
use crate::model::kernel::{H2Witness, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub tol_power: f64,
    pub tol_linear: f64,
    pub tol_classify: f64,
    /// Relative to `sup a - inf a` on the grid.
    pub tol_maxset: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_power: 1e-10,
            tol_linear: 1e-10,
            tol_classify: 1e-3,
            tol_maxset: 1e-8,
            max_iter: 100_000,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.tol_power, self.tol_linear, self.tol_classify, self.tol_maxset];
        if all.iter().any(|t| !(t.is_finite() && *t > 0.0)) || self.max_iter == 0 {
            return Err(Error::config(
                "tolerances must be positive and finite, max_iter nonzero",
            ));
        }
        Ok(())
    }
}

/// Everything needed to build a [`Problem`] at any refinement level.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub kernel: Kernel,
    pub coeff: CoefficientField,
    pub grid: GridSpec,
    pub tol: Tolerances,
    /// Overrides the numerical integrability probe.
    pub declared_integrable: Option<bool>,
}

impl ProblemSpec {
    pub fn new(domain: Domain, kernel: Kernel, coeff: CoefficientField, grid: GridSpec) -> Self {
        ProblemSpec {
            domain,
            kernel,
            coeff,
            grid,
            tol: Tolerances::default(),
            declared_integrable: None,
        }
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_coefficient(mut self, coeff: CoefficientField) -> Self {
        self.coeff = coeff;
        self
    }

    /// Builds and validates the problem on grid level `level`.
    pub fn build(&self, level: usize) -> Result<Problem> {
        self.tol.validate()?;
        let spec = self.grid.refined(level);
        let ungraded = GridSpec {
            grading: None,
            ..spec.clone()
        };
        let max_set = detect_argmax_set(
            &self.coeff,
            &ungraded.build(&self.domain)?,
            &self.domain,
            self.tol.tol_maxset,
        );
        let spec = resolve_grading(spec, &max_set)?;
        let grid = spec.build(&self.domain)?;

        let a_values: Vec<f64> = grid.nodes().map(|x| self.coeff.eval(x)).collect();
        if let Some(i) = a_values.iter().position(|v| !v.is_finite()) {
            return Err(Error::hypothesis(
                Hypothesis::H3,
                format!("a(x_{i}) = {} is not finite", a_values[i]),
            ));
        }
        if !max_set.sup_a.is_finite() {
            return Err(Error::hypothesis(Hypothesis::H3, "sup a is not finite"));
        }
        let witness = self.kernel.validate_on(&grid)?;

        let recip = match self.declared_integrable {
            Some(integrable) => RecipIntegrability::Declared { integrable },
            None => {
                let probe = GridSpec {
                    grading: Some(spec.grading.clone().unwrap_or_default()),
                    ..spec.clone()
                };
                match recip_profile(&self.coeff, &max_set, &self.domain, &probe) {
                    Ok(profile) => profile.verdict,
                    Err(e) => {
                        log::info!("integrability probe unavailable: {e}");
                        RecipIntegrability::Undetermined
                    }
                }
            }
        };

        Ok(Problem {
            spec: self.clone(),
            level,
            grid: Arc::new(grid),
            a_values,
            max_set,
            recip,
            witness,
        })
    }
}

fn resolve_grading(mut spec: GridSpec, max_set: &MaxSet) -> Result<GridSpec> {
    if let Some(GradeSpec { target: None, .. }) = &spec.grading {
        let target = max_set
            .grading_target()
            .ok_or_else(|| Error::config("grading requested but the argmax set is not a single point or segment"))?;
        if let Some(g) = spec.grading.as_mut() {
            g.target = Some(target);
        }
    }
    Ok(spec)
}

/// A validated problem `u -> int K(x, y) u(y) dy + a(x) u(x)` on one grid.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    level: usize,
    grid: Arc<Grid>,
    a_values: Vec<f64>,
    max_set: MaxSet,
    recip: RecipIntegrability,
    witness: Option<H2Witness>,
}

impl Problem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn domain(&self) -> &Domain {
        &self.spec.domain
    }

    pub fn kernel(&self) -> &Kernel {
        &self.spec.kernel
    }

    pub fn coeff(&self) -> &CoefficientField {
        &self.spec.coeff
    }

    pub fn tol(&self) -> &Tolerances {
        &self.spec.tol
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `a` at every grid node.
    pub fn a_values(&self) -> &[f64] {
        &self.a_values
    }

    pub fn sup_a(&self) -> f64 {
        self.max_set.sup_a
    }

    pub fn max_set(&self) -> &MaxSet {
        &self.max_set
    }

    pub fn recip_integrability(&self) -> RecipIntegrability {
        self.recip
    }

    pub fn witness(&self) -> Option<H2Witness> {
        self.witness
    }

    /// Grid of the same family `extra` levels finer, without revalidating.
    pub fn reference_grid(&self, extra: usize) -> Result<Grid> {
        let mut spec = self.spec.grid.refined(self.level + extra);
        if let Some(g) = spec.grading.as_mut() {
            if g.target.is_none() {
                g.target = self.grid.graded_toward().first().cloned();
            }
        }
        spec.build(&self.spec.domain)
    }

    /// The same problem `levels` grid levels finer.
    pub fn refined(&self, levels: usize) -> Result<Problem> {
        self.spec.build(self.level + levels)
    }

    /// `x0` chosen on component `component` at fraction `t` (segments only).
    pub fn select_x0(&self, component: usize, t: f64) -> Result<Vec<f64>> {
        let c = self.max_set.components.get(component).ok_or_else(|| {
            Error::config(format!(
                "argmax set has {} components, no index {component}",
                self.max_set.components.len()
            ))
        })?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::config(format!("segment fraction {t} not in [0, 1]")));
        }
        Ok(c.point_at(t))
    }

    /// Default `x0`: midpoint of the first component.
    pub fn default_x0(&self) -> Vec<f64> {
        self.max_set.components[0].point_at(0.5)
    }

    /// Gap `sup a - a(x)`, checked against the argmax tolerance.
    pub fn check_in_max_set(&self, x: &[f64]) -> Result<()> {
        let gap = self.sup_a() - self.coeff().eval(x);
        if gap > self.max_set_tolerance() || !self.domain().contains_closure(x, 1e-12) {
            return Err(Error::NotInMaxSet { point: x.to_vec(), gap });
        }
        Ok(())
    }

    /// Absolute tolerance for membership in the argmax set.
    pub fn max_set_tolerance(&self) -> f64 {
        let (lo, hi) = self
            .a_values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = (hi.max(self.sup_a()) - lo).max(f64::MIN_POSITIVE);
        self.tol().tol_maxset * range
    }
}
