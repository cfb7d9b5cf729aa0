//! Bounded domains and their quadrature grids.
//!
//! Every grid is a tensor midpoint rule in coordinates adapted to the shape:
//! Cartesian for intervals and boxes, (r, cos θ, φ) for balls and (r, φ, z)
//! for cylinders. Radial weights take the Jacobian at the cell midpoint, so
//! nodes never sit on the center of a ball or on the axis of a cylinder.
//! Grading replaces the innermost radial cell by a geometric cascade of
//! annuli `[r0 q^(l+1), r0 q^l]` plus a core cell `[0, r0 q^depth]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Hypothesis, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Interval {
        lo: f64,
        hi: f64,
    },
    Cuboid {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Disk of `radius` centered on the x3 axis, times `(0, height)`.
    Cylinder {
        radius: f64,
        height: f64,
    },
    Product(Box<Domain>, Box<Domain>),
}

/// A bounded open subset of R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Shape,
    dim: usize,
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::hypothesis(
                Hypothesis::H1,
                format!("interval ({lo}, {hi}) is empty or unbounded"),
            ));
        }
        Ok(Domain {
            shape: Shape::Interval { lo, hi },
            dim: 1,
        })
    }

    pub fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::hypothesis(
                Hypothesis::H1,
                "box corners must be nonempty and of equal length",
            ));
        }
        if !finite(&lo) || !finite(&hi) || lo.iter().zip(&hi).any(|(l, h)| h <= l) {
            return Err(Error::hypothesis(
                Hypothesis::H1,
                "box requires finite corners with hi > lo componentwise",
            ));
        }
        let dim = lo.len();
        Ok(Domain {
            shape: Shape::Cuboid { lo, hi },
            dim,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !finite(&center) {
            return Err(Error::hypothesis(
                Hypothesis::H1,
                "ball center must be a finite nonempty point",
            ));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::hypothesis(
                Hypothesis::H1,
                format!("ball radius {radius} must be positive and finite"),
            ));
        }
        let dim = center.len();
        Ok(Domain {
            shape: Shape::Ball { center, radius },
            dim,
        })
    }

    pub fn cylinder(radius: f64, height: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::hypothesis(
                Hypothesis::H1,
                format!("cylinder needs positive radius and height, got {radius}, {height}"),
            ));
        }
        Ok(Domain {
            shape: Shape::Cylinder { radius, height },
            dim: 3,
        })
    }

    pub fn product(first: Domain, second: Domain) -> Self {
        let dim = first.dim + second.dim;
        Domain {
            shape: Shape::Product(Box::new(first), Box::new(second)),
            dim,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exact Lebesgue measure.
    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Interval { lo, hi } => hi - lo,
            Shape::Cuboid { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
            Shape::Ball { radius, .. } => unit_ball_volume(self.dim) * radius.powi(self.dim as i32),
            Shape::Cylinder { radius, height } => PI * radius * radius * height,
            Shape::Product(a, b) => a.volume() * b.volume(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Interval { lo, hi } => hi - lo,
            Shape::Cuboid { lo, hi } => lo.iter().zip(hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt(),
            Shape::Ball { radius, .. } => 2.0 * radius,
            Shape::Cylinder { radius, height } => (4.0 * radius * radius + height * height).sqrt(),
            Shape::Product(a, b) => a.diameter().hypot(b.diameter()),
        }
    }

    /// Membership in the open set.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_within(x, 0.0, false)
    }

    /// Membership in the closure, with absolute slack `tol`.
    pub fn contains_closure(&self, x: &[f64], tol: f64) -> bool {
        self.contains_within(x, tol, true)
    }

    fn contains_within(&self, x: &[f64], tol: f64, closed: bool) -> bool {
        if x.len() != self.dim {
            return false;
        }
        let inside = |v: f64, bound: f64| if closed { v <= bound + tol } else { v < bound };
        match &self.shape {
            Shape::Interval { lo, hi } => inside(lo - x[0], 0.0) && inside(x[0] - hi, 0.0),
            Shape::Cuboid { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| inside(l - v, 0.0) && inside(v - h, 0.0)),
            Shape::Ball { center, radius } => inside(dist(x, center), *radius),
            Shape::Cylinder { radius, height } => {
                inside(x[0].hypot(x[1]), *radius) && inside(-x[2], 0.0) && inside(x[2] - height, 0.0)
            }
            Shape::Product(a, b) => {
                let (xa, xb) = x.split_at(a.dim);
                a.contains_within(xa, tol, closed) && b.contains_within(xb, tol, closed)
            }
        }
    }
}

fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0,
        d => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// A set the grid is refined toward: a point or a straight segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Point { at: Vec<f64> },
    Segment { from: Vec<f64>, to: Vec<f64> },
}

impl Target {
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Target::Point { at } => dist(x, at),
            Target::Segment { from, to } => {
                let dir: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
                let len2: f64 = dir.iter().map(|d| d * d).sum();
                let t = if len2 > 0.0 {
                    let dot: f64 = x.iter().zip(from).zip(&dir).map(|((p, a), d)| (p - a) * d).sum();
                    (dot / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let proj: Vec<f64> = from.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                dist(x, &proj)
            }
        }
    }

    /// Point at fraction `t` in [0, 1] along a segment; a point target ignores `t`.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        match self {
            Target::Point { at } => at.clone(),
            Target::Segment { from, to } => from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradeSpec {
    /// Resolved from the argmax set of the coefficient when `None`.
    pub target: Option<Target>,
    pub ratio: f64,
    pub depth: usize,
}

impl Default for GradeSpec {
    fn default() -> Self {
        GradeSpec {
            target: None,
            ratio: 0.5,
            depth: 8,
        }
    }
}

impl GradeSpec {
    pub fn with_depth(depth: usize) -> Self {
        GradeSpec {
            depth,
            ..Default::default()
        }
    }
}

/// Grid resolution parameters.
///
/// `resolution` counts cells along Cartesian axes, or radial cells for balls
/// and cylinders. `angular` is the azimuthal count (polar cells are half of
/// it) and `axial` the count along the cylinder axis; both default to
/// `resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub resolution: usize,
    pub angular: Option<usize>,
    pub axial: Option<usize>,
    pub grading: Option<GradeSpec>,
}

impl GridSpec {
    pub fn new(resolution: usize) -> Self {
        GridSpec {
            resolution,
            angular: None,
            axial: None,
            grading: None,
        }
    }

    pub fn angular(mut self, angular: usize) -> Self {
        self.angular = Some(angular);
        self
    }

    pub fn axial(mut self, axial: usize) -> Self {
        self.axial = Some(axial);
        self
    }

    pub fn graded(mut self, grading: GradeSpec) -> Self {
        self.grading = Some(grading);
        self
    }

    /// Level `level` of the refinement ladder: every cell count doubles per
    /// level, the grading depth is kept.
    pub fn refined(&self, level: usize) -> Self {
        let scale = 1usize << level;
        GridSpec {
            resolution: self.resolution * scale,
            angular: Some(self.angular.unwrap_or(self.resolution) * scale),
            axial: Some(self.axial.unwrap_or(self.resolution) * scale),
            grading: self.grading.clone(),
        }
    }

    pub fn build(&self, domain: &Domain) -> Result<Grid> {
        if self.resolution < 2 {
            return Err(Error::config(format!(
                "resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        let angular = self.angular.unwrap_or(self.resolution);
        let axial = self.axial.unwrap_or(self.resolution);
        if angular == 0 || axial == 0 {
            return Err(Error::config("angular and axial cell counts must be positive"));
        }
        let grading = match &self.grading {
            None => None,
            Some(g) => {
                if !(g.ratio > 0.0 && g.ratio < 1.0) {
                    return Err(Error::config(format!("grading ratio {} not in (0, 1)", g.ratio)));
                }
                let target = g
                    .target
                    .clone()
                    .ok_or_else(|| Error::config("grading target was not resolved"))?;
                Some((target, g.ratio, g.depth))
            }
        };
        let mut builder = GridBuilder::new(domain.dim());
        match (domain.shape(), grading) {
            (Shape::Interval { lo, hi }, None) => builder.uniform_axis(*lo, *hi, self.resolution),
            (Shape::Interval { lo, hi }, Some((target, ratio, depth))) => {
                let c = match &target {
                    Target::Point { at } if at.len() == 1 && at[0] >= *lo && at[0] <= *hi => at[0],
                    _ => return Err(unsupported_grading(domain, &target)),
                };
                builder.graded_interval(*lo, *hi, c, self.resolution, ratio, depth);
                builder.graded_toward.push(target);
            }
            (Shape::Cuboid { lo, hi }, None) => builder.cuboid(lo, hi, self.resolution),
            (Shape::Ball { center, radius }, grading) => {
                let graded = match grading {
                    None => None,
                    Some((target, ratio, depth)) => {
                        match &target {
                            Target::Point { at } if dist(at, center) <= 1e-12 * radius => {}
                            _ => return Err(unsupported_grading(domain, &target)),
                        }
                        builder.graded_toward.push(target);
                        Some((ratio, depth))
                    }
                };
                let cells = radial_cells(*radius, self.resolution, graded);
                builder.ball(center, &cells, angular)?;
            }
            (Shape::Cylinder { radius, height }, grading) => {
                let graded = match grading {
                    None => None,
                    Some((target, ratio, depth)) => {
                        let on_axis = match &target {
                            Target::Segment { from, to } => {
                                from.len() == 3
                                    && to.len() == 3
                                    && from[..2].iter().chain(&to[..2]).all(|v| v.abs() <= 1e-12)
                            }
                            Target::Point { .. } => false,
                        };
                        if !on_axis {
                            return Err(unsupported_grading(domain, &target));
                        }
                        builder.graded_toward.push(target);
                        Some((ratio, depth))
                    }
                };
                let cells = radial_cells(*radius, self.resolution, graded);
                builder.cylinder(&cells, *height, angular, axial);
            }
            (Shape::Product(a, b), None) => {
                let first = GridSpec {
                    grading: None,
                    ..self.clone()
                }
                .build(a)?;
                let second = GridSpec {
                    grading: None,
                    ..self.clone()
                }
                .build(b)?;
                return Ok(Grid::product(&first, &second));
            }
            (_, Some((target, _, _))) => return Err(unsupported_grading(domain, &target)),
        }
        Ok(builder.finish())
    }
}

fn unsupported_grading(domain: &Domain, target: &Target) -> Error {
    Error::config(format!(
        "grading toward {target:?} is not supported for {:?}",
        domain.shape()
    ))
}

/// Builds a grid on `domain` with default angular/axial counts.
pub fn build_grid(domain: &Domain, resolution: usize, grading: Option<&GradeSpec>) -> Result<Grid> {
    GridSpec {
        resolution,
        angular: None,
        axial: None,
        grading: grading.cloned(),
    }
    .build(domain)
}

/// Marks nodes outside the geometric cascade.
pub const OUTER_LAYER: u32 = u32::MAX;

/// Quadrature nodes and positive weights on a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    mesh_size: f64,
    graded_toward: Vec<Target>,
    layers: Vec<u32>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest cell diameter.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn graded_toward(&self) -> &[Target] {
        &self.graded_toward
    }

    /// Cascade level of node `i`: `0..depth` for the annuli, `depth` for the
    /// core cell, [`OUTER_LAYER`] elsewhere.
    pub fn layer(&self, i: usize) -> u32 {
        self.layers[i]
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    fn product(first: &Grid, second: &Grid) -> Grid {
        let dim = first.dim + second.dim;
        let mut nodes = Vec::with_capacity(first.len() * second.len() * dim);
        let mut weights = Vec::with_capacity(first.len() * second.len());
        for (xa, wa) in first.nodes().zip(&first.weights) {
            for (xb, wb) in second.nodes().zip(&second.weights) {
                nodes.extend_from_slice(xa);
                nodes.extend_from_slice(xb);
                weights.push(wa * wb);
            }
        }
        let n = weights.len();
        Grid {
            dim,
            nodes,
            weights,
            mesh_size: first.mesh_size.hypot(second.mesh_size),
            graded_toward: Vec::new(),
            layers: vec![OUTER_LAYER; n],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct RadialCell {
    lo: f64,
    hi: f64,
    layer: u32,
}

impl RadialCell {
    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Radial partition of `(0, radius)` into `n` uniform cells, with the first
/// cell replaced by a geometric cascade when graded.
fn radial_cells(radius: f64, n: usize, grading: Option<(f64, usize)>) -> Vec<RadialCell> {
    let h = radius / n as f64;
    let mut cells = Vec::new();
    let first_uniform = match grading {
        None => 0,
        Some((ratio, depth)) => {
            cells.push(RadialCell {
                lo: 0.0,
                hi: h * ratio.powi(depth as i32),
                layer: depth as u32,
            });
            for l in (0..depth).rev() {
                cells.push(RadialCell {
                    lo: h * ratio.powi(l as i32 + 1),
                    hi: h * ratio.powi(l as i32),
                    layer: l as u32,
                });
            }
            1
        }
    };
    for k in first_uniform..n {
        cells.push(RadialCell {
            lo: k as f64 * h,
            hi: if k + 1 == n { radius } else { (k + 1) as f64 * h },
            layer: OUTER_LAYER,
        });
    }
    cells
}

struct GridBuilder {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    layers: Vec<u32>,
    mesh_size: f64,
    graded_toward: Vec<Target>,
}

impl GridBuilder {
    fn new(dim: usize) -> Self {
        GridBuilder {
            dim,
            nodes: Vec::new(),
            weights: Vec::new(),
            layers: Vec::new(),
            mesh_size: 0.0,
            graded_toward: Vec::new(),
        }
    }

    fn push(&mut self, x: &[f64], w: f64, layer: u32, diameter: f64) {
        debug_assert_eq!(x.len(), self.dim);
        self.nodes.extend_from_slice(x);
        self.weights.push(w);
        self.layers.push(layer);
        self.mesh_size = self.mesh_size.max(diameter);
    }

    fn uniform_axis(&mut self, lo: f64, hi: f64, n: usize) {
        let h = (hi - lo) / n as f64;
        for k in 0..n {
            self.push(&[lo + (k as f64 + 0.5) * h], h, OUTER_LAYER, h);
        }
    }

    fn graded_interval(&mut self, lo: f64, hi: f64, c: f64, n: usize, ratio: f64, depth: usize) {
        let h = (hi - lo) / n as f64;
        for (length, sign) in [(c - lo, -1.0), (hi - c, 1.0)] {
            if length <= 0.0 {
                continue;
            }
            let cells_on_side = ((length / h).round() as usize).max(1);
            for cell in radial_cells(length, cells_on_side, Some((ratio, depth))) {
                self.push(&[c + sign * cell.mid()], cell.width(), cell.layer, cell.width());
            }
        }
    }

    fn cuboid(&mut self, lo: &[f64], hi: &[f64], n: usize) {
        let dim = lo.len();
        let steps: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| (h - l) / n as f64).collect();
        let weight: f64 = steps.iter().product();
        let diameter = steps.iter().map(|s| s * s).sum::<f64>().sqrt();
        let total = n.pow(dim as u32);
        let mut x = vec![0.0; dim];
        for flat in 0..total {
            let mut rem = flat;
            for axis in 0..dim {
                let k = rem % n;
                rem /= n;
                x[axis] = lo[axis] + (k as f64 + 0.5) * steps[axis];
            }
            self.push(&x, weight, OUTER_LAYER, diameter);
        }
    }

    fn ball(&mut self, center: &[f64], cells: &[RadialCell], angular: usize) -> Result<()> {
        match center.len() {
            1 => {
                for cell in cells {
                    for sign in [-1.0, 1.0] {
                        self.push(&[center[0] + sign * cell.mid()], cell.width(), cell.layer, cell.width());
                    }
                }
            }
            2 => {
                let dphi = 2.0 * PI / angular as f64;
                for cell in cells {
                    let r = cell.mid();
                    let diameter = cell.width().hypot(cell.hi * dphi);
                    for k in 0..angular {
                        let phi = (k as f64 + 0.5) * dphi;
                        let x = [center[0] + r * phi.cos(), center[1] + r * phi.sin()];
                        self.push(&x, r * cell.width() * dphi, cell.layer, diameter);
                    }
                }
            }
            3 => {
                let polar = angular.div_ceil(2).max(1);
                let du = 2.0 / polar as f64;
                let dphi = 2.0 * PI / angular as f64;
                for cell in cells {
                    let r = cell.mid();
                    for ku in 0..polar {
                        let u_lo = -1.0 + ku as f64 * du;
                        let u_hi = u_lo + du;
                        let u = u_lo + 0.5 * du;
                        let sin_theta = (1.0 - u * u).sqrt();
                        let sin_max = if u_lo < 0.0 && u_hi > 0.0 {
                            1.0
                        } else {
                            (1.0 - u_lo * u_lo).sqrt().max((1.0 - u_hi * u_hi).sqrt())
                        };
                        let polar_arc = cell.hi * (u_lo.clamp(-1.0, 1.0).acos() - u_hi.clamp(-1.0, 1.0).acos());
                        let azimuth_arc = cell.hi * sin_max * dphi;
                        let diameter = (cell.width().powi(2) + polar_arc.powi(2) + azimuth_arc.powi(2)).sqrt();
                        for kp in 0..angular {
                            let phi = (kp as f64 + 0.5) * dphi;
                            let x = [
                                center[0] + r * sin_theta * phi.cos(),
                                center[1] + r * sin_theta * phi.sin(),
                                center[2] + r * u,
                            ];
                            self.push(&x, r * r * cell.width() * du * dphi, cell.layer, diameter);
                        }
                    }
                }
            }
            d => {
                return Err(Error::config(format!(
                    "ball grids are available in dimensions 1 to 3, not {d}"
                )))
            }
        }
        Ok(())
    }

    fn cylinder(&mut self, cells: &[RadialCell], height: f64, angular: usize, axial: usize) {
        let dphi = 2.0 * PI / angular as f64;
        let dz = height / axial as f64;
        for cell in cells {
            let r = cell.mid();
            let diameter = (cell.width().powi(2) + (cell.hi * dphi).powi(2) + dz * dz).sqrt();
            for kz in 0..axial {
                let z = (kz as f64 + 0.5) * dz;
                for kp in 0..angular {
                    let phi = (kp as f64 + 0.5) * dphi;
                    let x = [r * phi.cos(), r * phi.sin(), z];
                    self.push(&x, r * cell.width() * dphi * dz, cell.layer, diameter);
                }
            }
        }
    }

    fn finish(self) -> Grid {
        Grid {
            dim: self.dim,
            nodes: self.nodes,
            weights: self.weights,
            mesh_size: self.mesh_size,
            graded_toward: self.graded_toward,
            layers: self.layers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin_target(dim: usize) -> GradeSpec {
        GradeSpec {
            target: Some(Target::Point { at: vec![0.0; dim] }),
            ratio: 0.5,
            depth: 8,
        }
    }

    fn axis_target(height: f64) -> GradeSpec {
        GradeSpec {
            target: Some(Target::Segment {
                from: vec![0.0, 0.0, 0.0],
                to: vec![0.0, 0.0, height],
            }),
            ratio: 0.5,
            depth: 8,
        }
    }

    #[test]
    fn uniform_interval_midpoints() {
        let grid = build_grid(&Domain::interval(0.0, 1.0).unwrap(), 4, None).unwrap();
        assert_eq!(grid.len(), 4);
        for (i, w) in grid.weights().iter().enumerate() {
            assert_eq!(*w, 0.25);
            assert!((grid.node(i)[0] - (0.125 + 0.25 * i as f64)).abs() < 1e-15);
        }
        assert!((grid.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_volumes() {
        assert_eq!(Domain::interval(0.0, 1.0).unwrap().volume(), 1.0);
        let ball = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        assert!((ball.volume() - 4.0 * PI / 3.0).abs() < 1e-14);
        let cyl = Domain::cylinder(1.0, 1.0).unwrap();
        assert!((cyl.volume() - PI).abs() < 1e-14);
        let disk = Domain::ball(vec![0.0; 2], 2.0).unwrap();
        assert!((disk.volume() - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn weights_approach_volume() {
        let ball = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let cyl = Domain::cylinder(1.0, 1.0).unwrap();
        for (domain, exact) in [(ball, 4.0 * PI / 3.0), (cyl, PI)] {
            let mut last = f64::INFINITY;
            for n in [4, 8, 16, 32] {
                let grid = build_grid(&domain, n, None).unwrap();
                let err = (grid.weights().iter().sum::<f64>() - exact).abs() / exact;
                assert!(err <= 10.0 * grid.mesh_size().powi(2), "n={n} err={err}");
                assert!(err <= last.max(1e-12), "n={n} err={err} last={last}");
                last = err;
            }
        }
    }

    #[test]
    fn nodes_inside_and_weights_positive() {
        let domains = [
            Domain::interval(-1.0, 2.0).unwrap(),
            Domain::cuboid(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap(),
            Domain::ball(vec![0.5], 1.0).unwrap(),
            Domain::ball(vec![0.0, 0.0], 1.0).unwrap(),
            Domain::ball(vec![0.0, 0.0, 0.0], 1.0).unwrap(),
            Domain::cylinder(1.0, 2.0).unwrap(),
            Domain::product(
                Domain::interval(0.0, 1.0).unwrap(),
                Domain::ball(vec![0.0, 0.0], 1.0).unwrap(),
            ),
        ];
        for domain in &domains {
            let grid = build_grid(domain, 5, None).unwrap();
            assert_eq!(grid.dim(), domain.dim());
            assert!(grid.weights().iter().all(|&w| w > 0.0));
            assert!(grid.nodes().all(|x| domain.contains(x)), "{:?}", domain.shape());
        }
    }

    #[test]
    fn graded_ball_never_touches_center() {
        let ball = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let grid = build_grid(&ball, 4, Some(&origin_target(3))).unwrap();
        let min_r = grid.nodes().map(|x| dist(x, &[0.0; 3])).fold(f64::INFINITY, f64::min);
        assert!(min_r > 0.0);
        assert!((min_r - 0.5 * 0.25 * 0.5f64.powi(8)).abs() < 1e-15);
        assert_eq!(grid.graded_toward().len(), 1);
    }

    #[test]
    fn graded_density_increases_toward_target() {
        let interval = Domain::interval(-1.0, 1.0).unwrap();
        let grading = GradeSpec {
            target: Some(Target::Point { at: vec![0.0] }),
            ..GradeSpec::with_depth(6)
        };
        let grid = build_grid(&interval, 8, Some(&grading)).unwrap();
        let mut right: Vec<(f64, f64)> = grid
            .nodes()
            .zip(grid.weights())
            .filter(|(x, _)| x[0] > 0.0)
            .map(|(x, w)| (x[0], *w))
            .collect();
        right.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for pair in right.windows(2) {
            assert!(pair[0].1 <= pair[1].1 + 1e-15);
        }
        assert!((grid.weights().iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_cylinder_captures_axis_singularity() {
        let cyl = Domain::cylinder(1.0, 1.0).unwrap();
        let mut last = 0.0;
        for depth in [2, 4, 8, 12] {
            let grading = GradeSpec {
                depth,
                ..axis_target(1.0)
            };
            let grid = build_grid(&cyl, 4, Some(&grading)).unwrap();
            let integral: f64 = grid
                .nodes()
                .zip(grid.weights())
                .enumerate()
                .filter(|(i, _)| grid.layer(*i) != depth as u32)
                .map(|(_, (x, w))| w / x[0].hypot(x[1]))
                .sum();
            assert!(integral > last && integral < 2.0 * PI);
            last = integral;
        }
        assert!((last - 2.0 * PI).abs() / (2.0 * PI) < 1e-4);
    }

    #[test]
    fn midpoint_error_halves_with_mesh() {
        let norm2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let cases = [
            (Domain::interval(0.0, 1.0).unwrap(), 1.0 / 3.0),
            (Domain::cuboid(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(), 2.0 / 3.0),
            (Domain::ball(vec![0.0; 3], 1.0).unwrap(), 4.0 * PI / 5.0),
        ];
        for (domain, exact) in cases {
            let coarse = build_grid(&domain, 4, None).unwrap();
            let fine = build_grid(&domain, 8, None).unwrap();
            assert!(fine.mesh_size() < 0.75 * coarse.mesh_size());
            let e0 = (coarse.integrate(norm2) - exact).abs();
            let e1 = (fine.integrate(norm2) - exact).abs();
            assert!(e1 * 2.0 <= e0, "{:?}: {e0} -> {e1}", domain.shape());
        }
    }

    #[test]
    fn rejects_bad_configurations() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::ball(vec![0.0], 0.0).is_err());
        assert!(Domain::cylinder(1.0, -1.0).is_err());
        let square = Domain::cuboid(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(build_grid(&square, 1, None), Err(Error::Config(_))));
        assert!(matches!(
            build_grid(&square, 4, Some(&origin_target(2))),
            Err(Error::Config(_))
        ));
        let ball = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        let off_center = GradeSpec {
            target: Some(Target::Point {
                at: vec![0.5, 0.0, 0.0],
            }),
            ..GradeSpec::default()
        };
        assert!(matches!(build_grid(&ball, 4, Some(&off_center)), Err(Error::Config(_))));
        assert!(matches!(
            build_grid(&Domain::ball(vec![0.0; 4], 1.0).unwrap(), 4, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn segment_distance() {
        let seg = Target::Segment {
            from: vec![0.0, 0.0, 0.0],
            to: vec![0.0, 0.0, 1.0],
        };
        assert!((seg.distance(&[3.0, 4.0, 0.5]) - 5.0).abs() < 1e-15);
        assert!((seg.distance(&[0.0, 0.0, 2.0]) - 1.0).abs() < 1e-15);
        assert_eq!(seg.point_at(0.25), vec![0.0, 0.0, 0.25]);
    }
}
