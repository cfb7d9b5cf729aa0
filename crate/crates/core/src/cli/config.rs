use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, GradeSpec, GridSpec, Target};
use crate::model::{CoefficientField, Kernel, ProblemSpec, Profile, ScaleField, Tolerances};
use crate::verify::StudyQuantity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval {
        lo: f64,
        hi: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Cylinder {
        radius: f64,
        height: f64,
    },
    Product {
        first: Box<DomainConfig>,
        second: Box<DomainConfig>,
    },
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainConfig::Interval { lo, hi } => Domain::interval(*lo, *hi),
            DomainConfig::Box { lo, hi } => Domain::cuboid(lo.clone(), hi.clone()),
            DomainConfig::Ball { center, radius } => Domain::ball(center.clone(), *radius),
            DomainConfig::Cylinder { radius, height } => Domain::cylinder(*radius, *height),
            DomainConfig::Product { first, second } => Ok(Domain::product(first.build()?, second.build()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleConfig {
    Constant(f64),
    Affine { base: f64, gradient: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessConfig {
    pub c0: f64,
    pub eps0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant {
        rho: f64,
    },
    Dispersal {
        profile: Profile,
        scale: ScaleConfig,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        witness: Option<WitnessConfig>,
    },
}

fn one() -> f64 {
    1.0
}

impl KernelConfig {
    pub fn build(&self, dim: usize) -> Result<Kernel> {
        match self {
            KernelConfig::Constant { rho } => Kernel::constant(*rho),
            KernelConfig::Dispersal {
                profile,
                scale,
                amplitude,
                witness,
            } => {
                let scale = match scale {
                    ScaleConfig::Constant(g) => ScaleField::Constant(*g),
                    ScaleConfig::Affine { base, gradient } => ScaleField::Affine {
                        base: *base,
                        gradient: gradient.clone(),
                    },
                };
                let k = Kernel::dispersal(*profile, scale, dim, *amplitude)?;
                match witness {
                    Some(w) => k.with_witness(w.c0, w.eps0),
                    None => Ok(k),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Constant {
        value: f64,
    },
    /// `height - scale |x - center|^exponent`
    RadialPower {
        center: Vec<f64>,
        height: f64,
        scale: f64,
        exponent: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `height - scale (x1^2 + x2^2)^(exponent / 2)`
    AxialPower {
        height: f64,
        scale: f64,
        exponent: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl CoefficientConfig {
    pub fn build(&self) -> Result<CoefficientField> {
        match self {
            CoefficientConfig::Constant { value } => Ok(CoefficientField::constant(*value)),
            CoefficientConfig::RadialPower {
                center,
                height,
                scale,
                exponent,
                offset,
            } => Ok(CoefficientField::radial_power(center.clone(), *height, *scale, *exponent)?.shifted(*offset)),
            CoefficientConfig::AxialPower {
                height,
                scale,
                exponent,
                offset,
            } => Ok(CoefficientField::axial_power(*height, *scale, *exponent)?.shifted(*offset)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradingConfig {
    #[serde(default = "half")]
    pub ratio: f64,
    #[serde(default = "eight")]
    pub depth: usize,
    #[serde(default)]
    pub target: Option<Target>,
}

fn half() -> f64 {
    0.5
}

fn eight() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
    #[serde(default)]
    pub angular: Option<usize>,
    #[serde(default)]
    pub axial: Option<usize>,
    #[serde(default)]
    pub grading: Option<GradingConfig>,
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            resolution: self.resolution,
            angular: self.angular,
            axial: self.axial,
            grading: self.grading.as_ref().map(|g| GradeSpec {
                target: g.target.clone(),
                ratio: g.ratio,
                depth: g.depth,
            }),
        }
    }

    pub fn from_spec(spec: &GridSpec) -> Self {
        GridConfig {
            resolution: spec.resolution,
            angular: spec.angular,
            axial: spec.axial,
            grading: spec.grading.as_ref().map(|g| GradingConfig {
                ratio: g.ratio,
                depth: g.depth,
                target: g.target.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default = "d_power")]
    pub tol_power: f64,
    #[serde(default = "d_linear")]
    pub tol_linear: f64,
    #[serde(default = "d_classify")]
    pub tol_classify: f64,
    #[serde(default = "d_maxset")]
    pub tol_maxset: f64,
    #[serde(default = "d_iter")]
    pub max_iter: usize,
}

fn d_power() -> f64 {
    Tolerances::default().tol_power
}
fn d_linear() -> f64 {
    Tolerances::default().tol_linear
}
fn d_classify() -> f64 {
    Tolerances::default().tol_classify
}
fn d_maxset() -> f64 {
    Tolerances::default().tol_maxset
}
fn d_iter() -> usize {
    Tolerances::default().max_iter
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        ToleranceConfig {
            tol_power: t.tol_power,
            tol_linear: t.tol_linear,
            tol_classify: t.tol_classify,
            tol_maxset: t.tol_maxset,
            max_iter: t.max_iter,
        }
    }
}

impl From<ToleranceConfig> for Tolerances {
    fn from(c: ToleranceConfig) -> Self {
        Tolerances {
            tol_power: c.tol_power,
            tol_linear: c.tol_linear,
            tol_classify: c.tol_classify,
            tol_maxset: c.tol_maxset,
            max_iter: c.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    pub kernel: KernelConfig,
    pub coefficient: CoefficientConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub declared_integrable: Option<bool>,
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec> {
        let domain = self.domain.build()?;
        let kernel = self.kernel.build(domain.dim())?;
        let coeff = self.coefficient.build()?;
        let mut spec =
            ProblemSpec::new(domain, kernel, coeff, self.grid.spec()).with_tolerances(self.tolerances.into());
        spec.declared_integrable = self.declared_integrable;
        spec.tol.validate()?;
        if self.grid.resolution < 2 {
            return Err(Error::config("grid resolution must be at least 2"));
        }
        Ok(spec)
    }

    pub fn ball(rho: f64) -> Self {
        ProblemConfig {
            domain: DomainConfig::Ball {
                center: vec![0.0; 3],
                radius: 1.0,
            },
            kernel: KernelConfig::Constant { rho },
            coefficient: CoefficientConfig::RadialPower {
                center: vec![0.0; 3],
                height: 1.0,
                scale: 1.0,
                exponent: 2.0,
                offset: 0.0,
            },
            grid: GridConfig::from_spec(&crate::presets::ball_grid()),
            tolerances: ToleranceConfig::default(),
            declared_integrable: None,
        }
    }

    pub fn cylinder(rho: f64) -> Self {
        ProblemConfig {
            domain: DomainConfig::Cylinder {
                radius: 1.0,
                height: 1.0,
            },
            kernel: KernelConfig::Constant { rho },
            coefficient: CoefficientConfig::AxialPower {
                height: 1.0,
                scale: 1.0,
                exponent: 1.0,
                offset: 0.0,
            },
            grid: GridConfig::from_spec(&crate::presets::cylinder_grid()),
            tolerances: ToleranceConfig::default(),
            declared_integrable: None,
        }
    }
}

/// Command options; every field can also be set from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Base grid level.
    #[serde(default)]
    pub level: usize,
    /// Argmax component used for `x0`.
    #[serde(default)]
    pub component: usize,
    /// Fraction along a segment component.
    #[serde(default = "half")]
    pub x0: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub cantor_level: Option<u32>,
    /// Fractions along the component for equal-weight atoms.
    #[serde(default)]
    pub atoms: Option<Vec<f64>>,
    #[serde(default = "three")]
    pub levels: usize,
    #[serde(default = "default_quantity")]
    pub quantity: StudyQuantity,
}

fn three() -> usize {
    3
}

fn default_quantity() -> StudyQuantity {
    StudyQuantity::LambdaP
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            level: 0,
            component: 0,
            x0: 0.5,
            alpha: None,
            cantor_level: None,
            atoms: None,
            levels: 3,
            quantity: StudyQuantity::LambdaP,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// JSON report; stdout when absent.
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub measure: Option<PathBuf>,
    #[serde(default)]
    pub density_csv: Option<PathBuf>,
    /// Refinement CSV; stdout when absent.
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub options: RunOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))
    }
}
