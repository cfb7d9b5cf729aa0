use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Hypothesis, Result};
use crate::geometry::{dist, Grid};

pub type KernelFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Probability density `J` of a dispersal kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Standard normal density in R^n.
    Gaussian,
    /// `c_n (1 - |z|^2)_+`, continuous with support in the unit ball.
    Epanechnikov,
}

impl Profile {
    pub fn eval(&self, z: &[f64]) -> f64 {
        let n = z.len() as i32;
        let r2: f64 = z.iter().map(|v| v * v).sum();
        match self {
            Profile::Gaussian => (2.0 * PI).powf(-0.5 * n as f64) * (-0.5 * r2).exp(),
            Profile::Epanechnikov => {
                if r2 >= 1.0 {
                    0.0
                } else {
                    epanechnikov_constant(z.len()) * (1.0 - r2)
                }
            }
        }
    }

    fn positive_everywhere(&self) -> bool {
        matches!(self, Profile::Gaussian)
    }
}

fn epanechnikov_constant(dim: usize) -> f64 {
    let sphere = match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    };
    let n = dim as f64;
    n * (n + 2.0) / (2.0 * sphere)
}

/// Local dispersal length `g(y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleField {
    Constant(f64),
    /// `base + gradient . y`
    Affine {
        base: f64,
        gradient: Vec<f64>,
    },
}

impl ScaleField {
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            ScaleField::Constant(g) => *g,
            ScaleField::Affine { base, gradient } => base + gradient.iter().zip(y).map(|(a, b)| a * b).sum::<f64>(),
        }
    }
}

/// `amplitude * J((x - y) / g(y)) / g(y)^n`
#[derive(Debug, Clone, PartialEq)]
pub struct DispersalKernel {
    pub profile: Profile,
    pub scale: ScaleField,
    pub dim: usize,
    pub amplitude: f64,
}

impl DispersalKernel {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let g = self.scale.eval(y);
        let mut z = [0.0; 3];
        for (k, (a, b)) in x.iter().zip(y).enumerate() {
            z[k] = (a - b) / g;
        }
        self.amplitude * self.profile.eval(&z[..self.dim]) / g.powi(self.dim as i32)
    }
}

#[derive(Clone)]
pub struct CustomKernel {
    pub name: String,
    eval: KernelFn,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum KernelFamily {
    Constant { rho: f64 },
    Dispersal(DispersalKernel),
    Custom(CustomKernel),
}

/// Constants `(c0, eps0)` with `K(x, y) > c0` whenever `|x - y| < eps0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H2Witness {
    pub c0: f64,
    /// `f64::INFINITY` for kernels positive on every pair.
    pub eps0: f64,
}

/// Nonnegative continuous kernel `K(x, y)`.
#[derive(Debug, Clone)]
pub struct Kernel {
    family: KernelFamily,
    witness: Option<H2Witness>,
}

impl Kernel {
    pub fn constant(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::hypothesis(
                Hypothesis::H2,
                format!("constant kernel needs rho > 0, got {rho}"),
            ));
        }
        Ok(Kernel {
            family: KernelFamily::Constant { rho },
            witness: None,
        })
    }

    pub fn dispersal(profile: Profile, scale: ScaleField, dim: usize, amplitude: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::config(format!(
                "dispersal kernels support dimensions 1 to 3, not {dim}"
            )));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::hypothesis(
                Hypothesis::H2,
                format!("dispersal amplitude must be positive, got {amplitude}"),
            ));
        }
        match &scale {
            ScaleField::Constant(g) if !(g.is_finite() && *g > 0.0) => {
                return Err(Error::hypothesis(
                    Hypothesis::H2,
                    format!("scale g = {g} must be positive"),
                ));
            }
            ScaleField::Affine { base, gradient } if gradient.len() != dim || !base.is_finite() => {
                return Err(Error::config(
                    "affine scale needs a finite base and one slope per dimension",
                ));
            }
            _ => {}
        }
        let mass = profile_mass(profile, dim);
        if (mass - 1.0).abs() > 1e-2 {
            return Err(Error::hypothesis(
                Hypothesis::H2,
                format!("dispersal profile integrates to {mass}, not 1"),
            ));
        }
        Ok(Kernel {
            family: KernelFamily::Dispersal(DispersalKernel {
                profile,
                scale,
                dim,
                amplitude,
            }),
            witness: None,
        })
    }

    pub fn custom(name: impl Into<String>, eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Kernel {
            family: KernelFamily::Custom(CustomKernel {
                name: name.into(),
                eval: Arc::new(eval),
            }),
            witness: None,
        }
    }

    pub fn with_witness(mut self, c0: f64, eps0: f64) -> Result<Self> {
        if !(c0 > 0.0 && eps0 > 0.0) || c0.is_nan() || eps0.is_nan() {
            return Err(Error::hypothesis(
                Hypothesis::H2,
                format!("witness needs c0 > 0 and eps0 > 0, got ({c0}, {eps0})"),
            ));
        }
        self.witness = Some(H2Witness { c0, eps0 });
        Ok(self)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::Constant { rho } => *rho,
            KernelFamily::Dispersal(d) => d.eval(x, y),
            KernelFamily::Custom(c) => (c.eval)(x, y),
        }
    }

    /// `Some(rho)` for the constant family.
    pub fn constant_value(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Constant { rho } => Some(rho),
            _ => None,
        }
    }

    pub fn explicit_witness(&self) -> Option<H2Witness> {
        self.witness
    }

    /// Witness used for validation on `grid`: the explicit one, or one derived
    /// from the family.
    pub fn witness_on(&self, grid: &Grid) -> Option<H2Witness> {
        if self.witness.is_some() {
            return self.witness;
        }
        match &self.family {
            KernelFamily::Constant { rho } => Some(H2Witness {
                c0: 0.5 * rho,
                eps0: f64::INFINITY,
            }),
            KernelFamily::Dispersal(d) => {
                let (g_min, g_max) = grid
                    .nodes()
                    .map(|y| d.scale.eval(y))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)));
                if !(g_min > 0.0) {
                    return None;
                }
                let mut half = [0.0; 3];
                half[0] = 0.5;
                let floor = d.amplitude * d.profile.eval(&half[..d.dim]) / g_max.powi(d.dim as i32);
                if d.profile.positive_everywhere() {
                    None
                } else {
                    Some(H2Witness {
                        c0: 0.5 * floor,
                        eps0: 0.5 * g_min,
                    })
                }
            }
            KernelFamily::Custom(_) => None,
        }
    }

    /// Sampled (H2) check on all node pairs. Returns the witness that was
    /// verified, if any.
    pub fn validate_on(&self, grid: &Grid) -> Result<Option<H2Witness>> {
        if let KernelFamily::Dispersal(d) = &self.family {
            if d.dim != grid.dim() {
                return Err(Error::config(format!(
                    "kernel dimension {} differs from domain dimension {}",
                    d.dim,
                    grid.dim()
                )));
            }
            if let Some((i, g)) = grid
                .nodes()
                .map(|y| d.scale.eval(y))
                .enumerate()
                .find(|(_, g)| !(g.is_finite() && *g > 0.0))
            {
                return Err(Error::hypothesis(
                    Hypothesis::H2,
                    format!("dispersal scale g = {g} at node {i} is not positive"),
                ));
            }
        }
        let mut witness = self.witness_on(grid);
        let positive_family = matches!(&self.family, KernelFamily::Dispersal(d) if d.profile.positive_everywhere());
        let mut global_min = f64::INFINITY;
        for (i, x) in grid.nodes().enumerate() {
            let mut local_min = f64::INFINITY;
            for (j, y) in grid.nodes().enumerate() {
                let k = self.eval(x, y);
                if !(k.is_finite() && k >= 0.0) {
                    return Err(Error::hypothesis(
                        Hypothesis::H2,
                        format!("K(x_{i}, x_{j}) = {k} is not a finite nonnegative value"),
                    ));
                }
                global_min = global_min.min(k);
                if let Some(w) = witness {
                    if dist(x, y) < w.eps0 {
                        local_min = local_min.min(k);
                    }
                }
            }
            if let Some(w) = witness {
                if local_min <= w.c0 {
                    return Err(Error::hypothesis(
                        Hypothesis::H2,
                        format!(
                            "min K(x_{i}, y) over |x - y| < {} is {local_min}, not above c0 = {}",
                            w.eps0, w.c0
                        ),
                    ));
                }
            }
        }
        if witness.is_none() && positive_family && global_min > 0.0 {
            witness = Some(H2Witness {
                c0: 0.5 * global_min,
                eps0: f64::INFINITY,
            });
        }
        match witness {
            Some(w) if grid.mesh_size() >= w.eps0 => Err(Error::hypothesis(
                Hypothesis::H2,
                format!(
                    "mesh size {} is not below eps0 = {}; the discrete operator may be reducible",
                    grid.mesh_size(),
                    w.eps0
                ),
            )),
            Some(w) => Ok(Some(w)),
            None => {
                log::warn!("no H2 witness available; irreducibility of the discrete operator is not verified");
                Ok(None)
            }
        }
    }
}

/// Midpoint quadrature of the profile over a box covering its support.
fn profile_mass(profile: Profile, dim: usize) -> f64 {
    let half = match profile {
        Profile::Gaussian => 9.0,
        Profile::Epanechnikov => 1.0,
    };
    let cells: usize = match dim {
        1 => 4096,
        2 => 256,
        _ => 64,
    };
    let h = 2.0 * half / cells as f64;
    let total = cells.pow(dim as u32);
    let mut z = vec![0.0; dim];
    let mut sum = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        for v in z.iter_mut() {
            *v = -half + ((rem % cells) as f64 + 0.5) * h;
            rem /= cells;
        }
        sum += profile.eval(&z);
    }
    sum * h.powi(dim as i32)
}
