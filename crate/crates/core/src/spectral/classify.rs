use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{normalize, DiscreteMeasure};
use crate::model::{Problem, RecipIntegrability};
use crate::spectral::operator::{assemble_full, assemble_ktilde};
use crate::spectral::perron::{perron_with, PerronMethod, PerronPair};
use crate::verify::{residual_report, ResidualReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    ContinuousEigenfunction,
    L1Eigenfunction,
    SingularMeasure,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::ContinuousEigenfunction => "continuous_eigenfunction",
            Regime::L1Eigenfunction => "l1_eigenfunction",
            Regime::SingularMeasure => "singular_measure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenobjectKind {
    /// Perron vector of the full operator, max 1.
    PerronVector,
    /// `phi1 / (a(x0) - a)` with unit mass.
    L1Density,
    /// Atom plus density.
    Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenobject {
    pub kind: EigenobjectKind,
    pub measure: DiscreteMeasure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDiagnostic {
    pub level: usize,
    pub n: usize,
    pub mesh_size: f64,
    pub lambda_p: f64,
    pub perron_iterations: usize,
    pub perron_residual: f64,
    /// `-max_i sum_j M_ij`
    pub lower_bound: f64,
    /// `-max_i M_ii`
    pub upper_bound: f64,
    pub lambda1: Option<f64>,
    pub regime: Option<Regime>,
}

/// Successive-difference summary of a refinement sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    /// Aitken extrapolation from the last three values.
    pub extrapolated: Option<f64>,
    /// `log2` of the last successive-difference ratio.
    pub empirical_order: Option<f64>,
    pub monotone: bool,
}

pub fn convergence_summary(values: &[f64]) -> ConvergenceSummary {
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d >= 0.0) || diffs.iter().all(|d| *d <= 0.0);
    let (mut extrapolated, mut empirical_order) = (None, None);
    if let [.., d1, d2] = diffs[..] {
        let v2 = *values.last().expect("two differences");
        if d1 != 0.0 && d2 != 0.0 && d1 != d2 {
            extrapolated = Some(v2 - d2 * d2 / (d2 - d1));
            empirical_order = Some((d1 / d2).abs().log2());
        }
    }
    ConvergenceSummary {
        extrapolated,
        empirical_order,
        monotone,
    }
}

#[derive(Debug, Clone)]
pub struct LambdaPEstimate {
    /// Value on the finest level.
    pub lambda_p: f64,
    pub levels: Vec<LevelDiagnostic>,
    pub summary: ConvergenceSummary,
    /// Perron vector on the finest level.
    pub vector: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub lambda_p: f64,
    pub lambda1_ktilde: Option<f64>,
    pub regime: Regime,
    pub sup_a: f64,
    pub x0: Vec<f64>,
    pub level: usize,
    pub confirmed: bool,
    pub recip_integrability: RecipIntegrability,
    pub eigenobject: Option<Eigenobject>,
    pub diagnostics: Vec<LevelDiagnostic>,
    pub residuals: Option<ResidualReport>,
}

/// `-` Perron root of the full operator on one level, with its bound checks.
pub fn level_lambda_p(problem: &Problem) -> Result<(LevelDiagnostic, PerronPair)> {
    let m = assemble_full(problem);
    let tol = problem.tol();
    let pair = perron_with(&m, tol.tol_power, tol.max_iter, PerronMethod::Auto)?;
    let root = pair.value;
    let diag_max = m.entries.diagonal().max();
    let row_max = m.entries.row_iter().map(|r| r.sum()).fold(f64::NEG_INFINITY, f64::max);
    let slack = 10.0 * tol.tol_power * root.abs().max(1.0);
    if root < diag_max - slack || root > row_max + slack {
        return Err(Error::InvalidEigenpair(format!(
            "Perron root {root} outside [{diag_max}, {row_max}]"
        )));
    }
    let diag = LevelDiagnostic {
        level: problem.level(),
        n: problem.grid().len(),
        mesh_size: problem.grid().mesh_size(),
        lambda_p: -root,
        perron_iterations: pair.iterations,
        perron_residual: pair.residual,
        lower_bound: -row_max,
        upper_bound: -diag_max,
        lambda1: None,
        regime: None,
    };
    Ok((diag, pair))
}

/// `lambda_p` on `levels` successively refined grids.
pub fn estimate_lambda_p(problem: &Problem, levels: usize) -> Result<LambdaPEstimate> {
    if levels == 0 {
        return Err(Error::config("at least one level is required"));
    }
    let mut diagnostics = Vec::with_capacity(levels);
    let mut vector = DVector::zeros(0);
    for extra in 0..levels {
        let refined;
        let p = if extra == 0 {
            problem
        } else {
            refined = problem.refined(extra)?;
            &refined
        };
        let (diag, pair) = level_lambda_p(p)?;
        log::info!("level {}: N = {}, lambda_p = {}", diag.level, diag.n, diag.lambda_p);
        diagnostics.push(diag);
        vector = pair.vector;
    }
    let values: Vec<f64> = diagnostics.iter().map(|d| d.lambda_p).collect();
    Ok(LambdaPEstimate {
        lambda_p: *values.last().expect("nonempty"),
        summary: convergence_summary(&values),
        levels: diagnostics,
        vector,
    })
}

struct Decision {
    regime: Regime,
    lambda_p: f64,
    lambda1: Option<f64>,
    eigenobject: Option<Eigenobject>,
    diagnostic: LevelDiagnostic,
}

fn decide(problem: &Problem, x0: &[f64]) -> Result<Decision> {
    problem.check_in_max_set(x0)?;
    let tol = problem.tol();
    let sup = problem.sup_a();
    let (mut diagnostic, pair) = level_lambda_p(problem)?;
    let lambda_p = diagnostic.lambda_p;
    let ktilde =
        assemble_ktilde(problem, x0).and_then(|m| perron_with(&m, tol.tol_power, tol.max_iter, PerronMethod::Auto));

    let (regime, lambda1, eigenobject) = if lambda_p < -sup - tol.tol_classify {
        let lambda1 = match ktilde {
            Ok(p) => Some(p.value),
            Err(e) => {
                log::info!("lambda1 unavailable in the continuous regime: {e}");
                None
            }
        };
        let phi = DiscreteMeasure::from_density(problem.grid().clone(), pair.vector.as_slice().to_vec())?;
        let object = Eigenobject {
            kind: EigenobjectKind::PerronVector,
            measure: phi,
        };
        (Regime::ContinuousEigenfunction, lambda1, Some(object))
    } else {
        if lambda_p > -sup + tol.tol_classify {
            return Err(Error::InvalidEigenpair(format!(
                "lambda_p = {lambda_p} above -sup a + tol = {}; the grid does not resolve the argmax set",
                -sup + tol.tol_classify
            )));
        }
        if let RecipIntegrability::Undetermined = problem.recip_integrability() {
            log::warn!("integrability of 1/(sup a - a) undetermined; classification assumes it");
        }
        let phi1 = ktilde?;
        let lambda1 = phi1.value;
        if lambda1 > 1.0 + tol.tol_classify {
            return Err(Error::Inconsistency { lambda1 });
        }
        if (lambda1 - 1.0).abs() <= tol.tol_classify {
            let a0 = problem.coeff().eval(x0);
            let psi: Vec<f64> = phi1
                .vector
                .iter()
                .zip(problem.a_values())
                .map(|(p, a)| p / (a0 - a))
                .collect();
            let psi = normalize(&DiscreteMeasure::from_density(problem.grid().clone(), psi)?, 1.0)?;
            let object = Eigenobject {
                kind: EigenobjectKind::L1Density,
                measure: psi,
            };
            (Regime::L1Eigenfunction, Some(lambda1), Some(object))
        } else {
            (Regime::SingularMeasure, Some(lambda1), None)
        }
    };
    diagnostic.lambda1 = lambda1;
    diagnostic.regime = Some(regime);
    Ok(Decision {
        regime,
        lambda_p,
        lambda1,
        eigenobject,
        diagnostic,
    })
}

/// Decides the regime on the problem level and confirms it one level finer.
/// The report carries the finer level's values.
pub fn classify_regime(problem: &Problem, x0: &[f64]) -> Result<SpectralReport> {
    let coarse = decide(problem, x0)?;
    let finer = problem.refined(1)?;
    let fine = decide(&finer, x0)?;
    if coarse.regime != fine.regime {
        return Err(Error::Unconfirmed {
            level: problem.level(),
            next: finer.level(),
            coarse: coarse.regime.name().into(),
            fine: fine.regime.name().into(),
        });
    }
    let residuals = match &fine.eigenobject {
        Some(object) => {
            let lambda = match object.kind {
                EigenobjectKind::PerronVector => fine.lambda_p,
                _ => -finer.coeff().eval(x0),
            };
            Some(residual_report(&finer, &object.measure, lambda)?)
        }
        None => None,
    };
    Ok(SpectralReport {
        lambda_p: fine.lambda_p,
        lambda1_ktilde: fine.lambda1,
        regime: fine.regime,
        sup_a: finer.sup_a(),
        x0: x0.to_vec(),
        level: finer.level(),
        confirmed: true,
        recip_integrability: finer.recip_integrability(),
        eigenobject: fine.eigenobject,
        diagnostics: vec![coarse.diagnostic, fine.diagnostic],
        residuals,
    })
}
