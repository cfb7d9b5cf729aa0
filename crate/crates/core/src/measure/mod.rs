//! Discrete measures and the measure-valued eigen-solutions built from an
//! atom (or a general measure on the argmax set) plus an L^1 density.

mod fredholm;

use std::io::Write;
use std::sync::Arc;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::model::Kernel;

pub use fredholm::{
    build_atom_solution, build_singular_solution, solve_fredholm, FredholmSolution, FredholmSource, FredholmSystem,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// Node values of an absolutely continuous part, integrated with the grid weights.
#[derive(Debug, Clone)]
pub struct Density {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl Density {
    pub fn mass(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(f, w)| f * w).sum()
    }
}

impl PartialEq for Density {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularFamily {
    Cantor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularTag {
    pub family: SingularFamily,
    pub level: u32,
    pub segment: [Vec<f64>; 2],
}

/// Atoms plus an optional grid density; `signed` is set when any weight is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
    density: Option<Density>,
    singular_tag: Option<SingularTag>,
    signed: bool,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Atom>, density: Option<Density>, singular_tag: Option<SingularTag>) -> Result<Self> {
        if let Some(d) = &density {
            if d.values.len() != d.grid.len() {
                return Err(Error::config(format!(
                    "density has {} values on a grid of {} nodes",
                    d.values.len(),
                    d.grid.len()
                )));
            }
        }
        let weights = atoms
            .iter()
            .map(|a| a.weight)
            .chain(density.iter().flat_map(|d| d.values.iter().cloned()));
        let mut signed = false;
        for w in weights {
            if !w.is_finite() {
                return Err(Error::config("measure weights must be finite"));
            }
            signed |= w < 0.0;
        }
        let dim = atoms
            .first()
            .map(|a| a.point.len())
            .or(density.as_ref().map(|d| d.grid.dim()));
        if let Some(dim) = dim {
            if atoms.iter().any(|a| a.point.len() != dim) || density.as_ref().is_some_and(|d| d.grid.dim() != dim) {
                return Err(Error::config("atoms and density live in different dimensions"));
            }
        }
        Ok(DiscreteMeasure {
            atoms,
            density,
            singular_tag,
            signed,
        })
    }

    pub fn dirac(point: Vec<f64>, weight: f64) -> Self {
        DiscreteMeasure::new(vec![Atom { point, weight }], None, None).expect("finite weight")
    }

    pub fn from_density(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        DiscreteMeasure::new(Vec::new(), Some(Density { grid, values }), None)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }

    pub fn singular_tag(&self) -> Option<&SingularTag> {
        self.singular_tag.as_ref()
    }

    pub fn signed(&self) -> bool {
        self.signed
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn density_mass(&self) -> f64 {
        self.density.as_ref().map_or(0.0, Density::mass)
    }

    pub fn total_mass(&self) -> f64 {
        self.atom_mass() + self.density_mass()
    }

    /// `|mu|(Omega)`
    pub fn total_variation(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight.abs()).sum();
        let density = self.density.as_ref().map_or(0.0, |d| {
            d.values.iter().zip(d.grid.weights()).map(|(f, w)| f.abs() * w).sum()
        });
        atoms + density
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                point: a.point.clone(),
                weight: c * a.weight,
            })
            .collect();
        let density = self.density.as_ref().map(|d| Density {
            grid: d.grid.clone(),
            values: d.values.iter().map(|v| c * v).collect(),
        });
        DiscreteMeasure::new(atoms, density, self.singular_tag.clone())
    }

    /// Density samples as CSV: coordinates, quadrature weight, value.
    pub fn write_density_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let Some(d) = &self.density else {
            w.flush().map_err(|e| Error::config(e.to_string()))?;
            return Ok(());
        };
        let dim = d.grid.dim();
        let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
        header.push("weight".into());
        header.push("value".into());
        let io = |e: csv::Error| Error::config(format!("writing density CSV: {e}"));
        w.write_record(&header).map_err(io)?;
        for (i, x) in d.grid.nodes().enumerate() {
            let mut row: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
            row.push(format!("{:e}", d.grid.weights()[i]));
            row.push(format!("{:e}", d.values[i]));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }
}

impl Serialize for DiscreteMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct DensityView<'a> {
            nodes: Vec<&'a [f64]>,
            values: &'a [f64],
            weights: &'a [f64],
        }
        let atoms: Vec<Vec<f64>> = self
            .atoms
            .iter()
            .map(|a| a.point.iter().cloned().chain(std::iter::once(a.weight)).collect())
            .collect();
        let density = self.density.as_ref().map(|d| DensityView {
            nodes: d.grid.nodes().collect(),
            values: &d.values,
            weights: d.grid.weights(),
        });
        let mut map = serializer.serialize_map(Some(5))?;
        map.serialize_entry("atoms", &atoms)?;
        map.serialize_entry("density", &density)?;
        map.serialize_entry("singular_tag", &self.singular_tag)?;
        map.serialize_entry("signed", &self.signed)?;
        map.serialize_entry("total_mass", &self.total_mass())?;
        map.end()
    }
}

/// `int K(x, y) dmu(y)`
pub fn kernel_moment(kernel: &Kernel, mu: &DiscreteMeasure, x: &[f64]) -> f64 {
    let atoms: f64 = mu.atoms.iter().map(|a| a.weight * kernel.eval(x, &a.point)).sum();
    let density = mu.density.as_ref().map_or(0.0, |d| {
        d.grid
            .nodes()
            .zip(d.grid.weights())
            .zip(&d.values)
            .map(|((y, w), f)| kernel.eval(x, y) * f * w)
            .sum()
    });
    atoms + density
}

const MAX_CANTOR_LEVEL: u32 = 24;

/// Level-`level` approximant of the Cantor measure on the segment `from -> to`:
/// `2^level` atoms of equal weight at the midpoints of the remaining intervals.
pub fn cantor_approximant(from: &[f64], to: &[f64], level: u32) -> Result<DiscreteMeasure> {
    if from.len() != to.len() || from.is_empty() {
        return Err(Error::config("segment endpoints must have the same positive dimension"));
    }
    if level > MAX_CANTOR_LEVEL {
        return Err(Error::config(format!(
            "Cantor level {level} exceeds {MAX_CANTOR_LEVEL}"
        )));
    }
    let count = 1usize << level;
    let width = 3f64.powi(-(level as i32));
    let weight = 1.0 / count as f64;
    let atoms = (0..count)
        .map(|code| {
            // binary digit k of `code` picks the left or right third at depth k + 1
            let left: f64 = (0..level)
                .filter(|k| code >> (level - 1 - k) & 1 == 1)
                .map(|k| 2.0 * 3f64.powi(-(k as i32) - 1))
                .sum();
            let t = left + 0.5 * width;
            Atom {
                point: from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect(),
                weight,
            }
        })
        .collect();
    DiscreteMeasure::new(
        atoms,
        None,
        Some(SingularTag {
            family: SingularFamily::Cantor,
            level,
            segment: [from.to_vec(), to.to_vec()],
        }),
    )
}

/// Scales `mu` to total mass `target_mass`.
pub fn normalize(mu: &DiscreteMeasure, target_mass: f64) -> Result<DiscreteMeasure> {
    if !(target_mass > 0.0 && target_mass.is_finite()) {
        return Err(Error::Normalization(format!(
            "target mass {target_mass} must be positive"
        )));
    }
    let mass = mu.total_mass();
    if !(mass.abs() > 1e-14 * mu.total_variation()) || mass == 0.0 {
        return Err(Error::Normalization(format!("total mass {mass:e} is zero")));
    }
    if mass == target_mass {
        return Ok(mu.clone());
    }
    mu.scaled(target_mass / mass)
}

/// `sum_k c_k mu_k`. Atoms at identical points are merged.
pub fn span_combination(solutions: &[DiscreteMeasure], coefficients: &[f64]) -> Result<DiscreteMeasure> {
    if solutions.is_empty() || solutions.len() != coefficients.len() {
        return Err(Error::config(format!(
            "{} solutions but {} coefficients",
            solutions.len(),
            coefficients.len()
        )));
    }
    let mut atoms: Vec<Atom> = Vec::new();
    let mut density: Option<Density> = None;
    for (mu, &c) in solutions.iter().zip(coefficients) {
        for a in &mu.atoms {
            match atoms.iter_mut().find(|b| b.point == a.point) {
                Some(b) => b.weight += c * a.weight,
                None => atoms.push(Atom {
                    point: a.point.clone(),
                    weight: c * a.weight,
                }),
            }
        }
        if let Some(d) = &mu.density {
            match &mut density {
                Some(acc) => {
                    if !same_grid(&acc.grid, &d.grid) {
                        return Err(Error::config("span of measures on different grids"));
                    }
                    acc.values.iter_mut().zip(&d.values).for_each(|(s, v)| *s += c * v);
                }
                None => {
                    density = Some(Density {
                        grid: d.grid.clone(),
                        values: d.values.iter().map(|v| c * v).collect(),
                    })
                }
            }
        }
    }
    let first = solutions[0].singular_tag.clone();
    let tag = if solutions.iter().all(|mu| mu.singular_tag == first) {
        first
    } else {
        None
    };
    DiscreteMeasure::new(atoms, density, tag)
}
