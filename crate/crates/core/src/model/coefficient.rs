use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Hypothesis, Result};
use crate::geometry::{dist, Domain, GradeSpec, Grid, GridSpec, Shape, Target};

pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct CustomField {
    pub name: String,
    eval: FieldFn,
}

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomField").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum CoefficientFamily {
    Constant {
        value: f64,
    },
    /// `height - scale * |x - center|^exponent`
    RadialPower {
        center: Vec<f64>,
        height: f64,
        scale: f64,
        exponent: f64,
    },
    /// `height - scale * (x1^2 + x2^2)^(exponent / 2)`, maximal on the x3 axis.
    AxialPower {
        height: f64,
        scale: f64,
        exponent: f64,
    },
    Custom(CustomField),
}

/// The coefficient `a` of the operator, plus a constant offset.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    family: CoefficientFamily,
    offset: f64,
}

impl CoefficientField {
    pub fn constant(value: f64) -> Self {
        CoefficientField {
            family: CoefficientFamily::Constant { value },
            offset: 0.0,
        }
    }

    pub fn radial_power(center: Vec<f64>, height: f64, scale: f64, exponent: f64) -> Result<Self> {
        if !(scale > 0.0 && exponent > 0.0) || !height.is_finite() || !scale.is_finite() {
            return Err(Error::hypothesis(
                Hypothesis::H3,
                "radial power coefficient needs finite height, scale > 0 and exponent > 0",
            ));
        }
        Ok(CoefficientField {
            family: CoefficientFamily::RadialPower {
                center,
                height,
                scale,
                exponent,
            },
            offset: 0.0,
        })
    }

    pub fn axial_power(height: f64, scale: f64, exponent: f64) -> Result<Self> {
        if !(scale > 0.0 && exponent > 0.0) || !height.is_finite() || !scale.is_finite() {
            return Err(Error::hypothesis(
                Hypothesis::H3,
                "axial power coefficient needs finite height, scale > 0 and exponent > 0",
            ));
        }
        Ok(CoefficientField {
            family: CoefficientFamily::AxialPower {
                height,
                scale,
                exponent,
            },
            offset: 0.0,
        })
    }

    pub fn custom(name: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        CoefficientField {
            family: CoefficientFamily::Custom(CustomField {
                name: name.into(),
                eval: Arc::new(eval),
            }),
            offset: 0.0,
        }
    }

    /// `a + c`
    pub fn shifted(&self, c: f64) -> Self {
        CoefficientField {
            family: self.family.clone(),
            offset: self.offset + c,
        }
    }

    pub fn family(&self) -> &CoefficientFamily {
        &self.family
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let base = match &self.family {
            CoefficientFamily::Constant { value } => *value,
            CoefficientFamily::RadialPower {
                center,
                height,
                scale,
                exponent,
            } => {
                let r = dist(x, center);
                height - scale * power(r, *exponent)
            }
            CoefficientFamily::AxialPower {
                height,
                scale,
                exponent,
            } => height - scale * power(x[0].hypot(x[1]), *exponent),
            CoefficientFamily::Custom(c) => (c.eval)(x),
        };
        base + self.offset
    }

    /// Exact argmax set for the built-in families, when it lies in the closure
    /// of `domain`.
    fn analytic_max_set(&self, domain: &Domain) -> Option<MaxSet> {
        match &self.family {
            CoefficientFamily::RadialPower { center, height, .. } => {
                if center.len() == domain.dim() && domain.contains_closure(center, 0.0) {
                    Some(MaxSet {
                        sup_a: height + self.offset,
                        components: vec![MaxComponent::Point { at: center.clone() }],
                    })
                } else {
                    None
                }
            }
            CoefficientFamily::AxialPower { height, .. } => {
                let (from, to) = match domain.shape() {
                    Shape::Cylinder { height: h, .. } => (vec![0.0, 0.0, 0.0], vec![0.0, 0.0, *h]),
                    Shape::Cuboid { lo, hi }
                        if lo.len() == 3 && lo[0] <= 0.0 && hi[0] >= 0.0 && lo[1] <= 0.0 && hi[1] >= 0.0 =>
                    {
                        (vec![0.0, 0.0, lo[2]], vec![0.0, 0.0, hi[2]])
                    }
                    _ => return None,
                };
                Some(MaxSet {
                    sup_a: height + self.offset,
                    components: vec![MaxComponent::Segment { from, to }],
                })
            }
            _ => None,
        }
    }
}

fn power(r: f64, exponent: f64) -> f64 {
    if exponent == 2.0 {
        r * r
    } else if exponent == 1.0 {
        r
    } else {
        r.powf(exponent)
    }
}

/// A connected piece of the argmax set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaxComponent {
    Point {
        at: Vec<f64>,
    },
    Segment {
        from: Vec<f64>,
        to: Vec<f64>,
    },
    /// Grid nodes that match no canonical primitive.
    Cluster {
        nodes: Vec<usize>,
        representative: Vec<f64>,
    },
}

impl MaxComponent {
    pub fn as_target(&self) -> Option<Target> {
        match self {
            MaxComponent::Point { at } => Some(Target::Point { at: at.clone() }),
            MaxComponent::Segment { from, to } => Some(Target::Segment {
                from: from.clone(),
                to: to.clone(),
            }),
            MaxComponent::Cluster { .. } => None,
        }
    }

    /// Point at fraction `t` along a segment; points and clusters ignore `t`.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        match self {
            MaxComponent::Cluster { representative, .. } => representative.clone(),
            other => other.as_target().expect("canonical component").point_at(t),
        }
    }

    fn distance(&self, x: &[f64]) -> f64 {
        match self.as_target() {
            Some(t) => t.distance(x),
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxSet {
    pub sup_a: f64,
    pub components: Vec<MaxComponent>,
}

impl MaxSet {
    /// Distance from `x` to the nearest component.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| c.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// The single canonical component as a grading target.
    pub fn grading_target(&self) -> Option<Target> {
        match self.components.as_slice() {
            [only] => only.as_target(),
            _ => None,
        }
    }
}

/// Argmax set of `coeff` seen on `grid`.
///
/// Built-in families with a known maximizer in the closure of `domain`
/// return it exactly. Otherwise every discrete local maximum is refined by
/// pattern search, refined peaks within `tol_maxset * range` of the best
/// are clustered and each cluster is matched against a point or an
/// axis-aligned segment.
pub fn detect_argmax_set(coeff: &CoefficientField, grid: &Grid, domain: &Domain, tol_maxset: f64) -> MaxSet {
    if let Some(exact) = coeff.analytic_max_set(domain) {
        return exact;
    }
    let values: Vec<f64> = grid.nodes().map(|x| coeff.eval(x)).collect();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    if range <= 1e-14 * hi.abs().max(1.0) {
        return MaxSet {
            sup_a: hi,
            components: vec![MaxComponent::Cluster {
                nodes: (0..grid.len()).collect(),
                representative: grid.node(0).to_vec(),
            }],
        };
    }
    let mesh = grid.mesh_size();
    let nearest: Vec<f64> = (0..grid.len())
        .map(|i| {
            (0..grid.len())
                .filter(|&j| j != i)
                .map(|j| dist(grid.node(i), grid.node(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut candidates: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let xi = grid.node(i);
            let reach = 2.0 * nearest[i];
            (0..grid.len()).all(|j| values[j] <= values[i] || dist(xi, grid.node(j)) > reach)
        })
        .collect();
    candidates.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    candidates.truncate(MAX_CANDIDATES);

    let refined: Vec<(usize, Vec<f64>, f64)> = candidates
        .iter()
        .map(|&i| {
            let at = pattern_search(coeff, domain, grid.node(i), nearest[i].min(mesh), None);
            let peak = coeff.eval(&at);
            (i, at, peak)
        })
        .collect();
    let sup_a = refined.iter().map(|r| r.2).fold(hi, f64::max);
    let level = sup_a - tol_maxset * range;
    let kept: Vec<&(usize, Vec<f64>, f64)> = refined.iter().filter(|r| r.2 >= level).collect();
    let points: Vec<&[f64]> = kept.iter().map(|r| r.1.as_slice()).collect();
    let resolution = tol_maxset.sqrt() * domain.diameter();

    let mut components: Vec<MaxComponent> = cluster_points(coeff, &points, level)
        .into_iter()
        .map(|members| {
            let group: Vec<&(usize, Vec<f64>, f64)> = members.iter().map(|&k| kept[k]).collect();
            canonicalize(coeff, grid, domain, &group, &values, level, resolution)
        })
        .collect();
    components.sort_by(|a, b| {
        let (p, q) = (a.point_at(0.0), b.point_at(0.0));
        p.iter()
            .zip(&q)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    MaxSet { sup_a, components }
}

/// Whether `a >= level` along the straight path from `p` to `q`.
fn level_path(coeff: &CoefficientField, p: &[f64], q: &[f64], level: f64) -> bool {
    (1..PATH_SAMPLES).all(|k| {
        let t = k as f64 / PATH_SAMPLES as f64;
        let x: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + t * (b - a)).collect();
        coeff.eval(&x) >= level
    })
}

const PATH_SAMPLES: usize = 16;
const MAX_CANDIDATES: usize = 512;

fn cluster_points(coeff: &CoefficientField, points: &[&[f64]], level: f64) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..points.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb && level_path(coeff, points[a], points[b], level) {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for k in 0..points.len() {
        let root = find(&mut parent, k);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, members)) => members.push(k),
            None => groups.push((root, vec![k])),
        }
    }
    groups.into_iter().map(|(_, members)| members).collect()
}

fn canonicalize(
    coeff: &CoefficientField,
    grid: &Grid,
    domain: &Domain,
    group: &[&(usize, Vec<f64>, f64)],
    values: &[f64],
    level: f64,
    resolution: f64,
) -> MaxComponent {
    let dim = grid.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for (_, at, _) in group {
        for (k, v) in at.iter().enumerate() {
            lo[k] = lo[k].min(*v);
            hi[k] = hi[k].max(*v);
        }
    }
    let extents: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
    let (axis, widest) = extents
        .iter()
        .cloned()
        .enumerate()
        .fold((0, 0.0), |best, (k, e)| if e > best.1 { (k, e) } else { best });
    let mesh = grid.mesh_size();
    let best = group
        .iter()
        .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
        .expect("nonempty cluster");

    if widest <= resolution {
        return MaxComponent::Point { at: best.1.clone() };
    }
    let thin = extents.iter().enumerate().all(|(k, e)| k == axis || *e <= resolution);
    if dim >= 2 && thin {
        let center = pattern_search(coeff, domain, &best.1, mesh, Some(axis));
        let from = extend_along(coeff, domain, &center, axis, -1.0, level, mesh);
        let to = extend_along(coeff, domain, &center, axis, 1.0, level, mesh);
        return MaxComponent::Segment { from, to };
    }
    let mut nodes: Vec<usize> = (0..grid.len())
        .filter(|&i| values[i] >= level && level_path(coeff, grid.node(i), &best.1, level))
        .collect();
    if nodes.is_empty() {
        nodes = group.iter().map(|r| r.0).collect();
    }
    nodes.sort_unstable();
    nodes.dedup();
    MaxComponent::Cluster {
        nodes,
        representative: best.1.clone(),
    }
}

/// Compass search for a local maximum of `a` in the closure of `domain`,
/// optionally keeping coordinate `frozen` fixed.
fn pattern_search(
    coeff: &CoefficientField,
    domain: &Domain,
    start: &[f64],
    step0: f64,
    frozen: Option<usize>,
) -> Vec<f64> {
    let mut x = start.to_vec();
    let mut fx = coeff.eval(&x);
    let mut step = step0;
    let floor = 1e-13 * domain.diameter();
    let mut evaluations = 0;
    while step > floor && evaluations < 20_000 {
        let mut improved = false;
        for k in (0..x.len()).filter(|k| Some(*k) != frozen) {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] += sign * step;
                evaluations += 1;
                if !domain.contains_closure(&y, 0.0) {
                    continue;
                }
                let fy = coeff.eval(&y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    x
}

/// Walks from `center` along `axis` while `a >= level`, then bisects the exit.
fn extend_along(
    coeff: &CoefficientField,
    domain: &Domain,
    center: &[f64],
    axis: usize,
    sign: f64,
    level: f64,
    mesh: f64,
) -> Vec<f64> {
    let ok = |t: f64| {
        let mut y = center.to_vec();
        y[axis] += sign * t;
        domain.contains_closure(&y, 0.0) && coeff.eval(&y) >= level
    };
    let step = 0.25 * mesh;
    let mut good = 0.0;
    let limit = 2.0 * domain.diameter();
    while good < limit && ok(good + step) {
        good += step;
    }
    let mut bad = good + step;
    for _ in 0..60 {
        let mid = 0.5 * (good + bad);
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    let mut y = center.to_vec();
    y[axis] += sign * good;
    y
}

/// Status of `1 / (sup a - a)` in L^1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RecipIntegrability {
    Integrable { value: f64 },
    NonIntegrable,
    Declared { integrable: bool },
    Undetermined,
}

impl RecipIntegrability {
    /// `None` when neither computed nor declared.
    pub fn is_integrable(&self) -> Option<bool> {
        match self {
            RecipIntegrability::Integrable { .. } => Some(true),
            RecipIntegrability::NonIntegrable => Some(false),
            RecipIntegrability::Declared { integrable } => Some(*integrable),
            RecipIntegrability::Undetermined => None,
        }
    }
}

/// Partial integrals `I_k` of `1 / (sup a - a)` over `Omega \ N_k`, where
/// `N_k` is the neighborhood of radius `r0 q^k` of the argmax set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecipProfile {
    pub radii: Vec<f64>,
    pub partials: Vec<f64>,
    pub verdict: RecipIntegrability,
}

const DECAY_RATIO: f64 = 0.9;
const STAGNATION_RATIO: f64 = 0.99;

/// Integrability verdict from a graded probe grid of the given depth.
pub fn check_recip_integrability(
    coeff: &CoefficientField,
    domain: &Domain,
    depth: usize,
) -> Result<RecipIntegrability> {
    let resolution = 16;
    let probe = GridSpec::new(resolution).graded(GradeSpec::with_depth(depth));
    let ungraded = GridSpec::new(resolution).build(domain)?;
    let max_set = detect_argmax_set(coeff, &ungraded, domain, 1e-8);
    Ok(recip_profile(coeff, &max_set, domain, &probe)?.verdict)
}

/// Full profile on the grid described by `spec`; the grading target defaults
/// to the argmax set.
pub fn recip_profile(
    coeff: &CoefficientField,
    max_set: &MaxSet,
    domain: &Domain,
    spec: &GridSpec,
) -> Result<RecipProfile> {
    let grading = spec.grading.clone().unwrap_or_default();
    if grading.depth < 3 {
        return Err(Error::config(format!(
            "integrability probe needs grading depth >= 3, got {}",
            grading.depth
        )));
    }
    if max_set
        .components
        .iter()
        .any(|c| matches!(c, MaxComponent::Cluster { .. }))
    {
        return Ok(RecipProfile {
            radii: Vec::new(),
            partials: Vec::new(),
            verdict: RecipIntegrability::NonIntegrable,
        });
    }
    let target = match &grading.target {
        Some(t) => t.clone(),
        None => max_set
            .grading_target()
            .ok_or_else(|| Error::config("argmax set has several components; give a grading target"))?,
    };
    let grid = GridSpec {
        grading: Some(GradeSpec {
            target: Some(target),
            ..grading.clone()
        }),
        ..spec.clone()
    }
    .build(domain)?;
    Ok(profile_on(
        coeff,
        max_set,
        &grid,
        spec.resolution,
        domain,
        grading.ratio,
        grading.depth,
    ))
}

fn profile_on(
    coeff: &CoefficientField,
    max_set: &MaxSet,
    grid: &Grid,
    resolution: usize,
    domain: &Domain,
    ratio: f64,
    depth: usize,
) -> RecipProfile {
    let r0 = match domain.shape() {
        Shape::Ball { radius, .. } | Shape::Cylinder { radius, .. } => radius / resolution as f64,
        _ => domain.diameter() / resolution as f64,
    };
    let radii: Vec<f64> = (0..=depth).map(|k| r0 * ratio.powi(k as i32)).collect();
    let mut partials = vec![0.0; depth + 1];
    for (x, w) in grid.nodes().zip(grid.weights()) {
        let gap = max_set.sup_a - coeff.eval(x);
        let d = max_set.distance(x);
        let term = if gap > 0.0 { w / gap } else { f64::INFINITY };
        for (k, r) in radii.iter().enumerate() {
            if d >= *r {
                partials[k] += term;
            }
        }
    }
    let verdict = classify_increments(&partials);
    RecipProfile {
        radii,
        partials,
        verdict,
    }
}

fn classify_increments(partials: &[f64]) -> RecipIntegrability {
    let last = *partials.last().expect("depth >= 3");
    if !last.is_finite() {
        return RecipIntegrability::NonIntegrable;
    }
    let increments: Vec<f64> = partials.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &increments[increments.len().saturating_sub(3)..];
    let scale = last.abs().max(f64::MIN_POSITIVE);
    let ratios: Vec<f64> = tail
        .windows(2)
        .map(|w| {
            if w[0] <= 1e-15 * scale && w[1] <= 1e-15 * scale {
                0.0
            } else {
                w[1] / w[0]
            }
        })
        .collect();
    if ratios.iter().all(|r| *r < DECAY_RATIO) {
        RecipIntegrability::Integrable { value: last }
    } else if ratios.iter().all(|r| *r >= STAGNATION_RATIO) && tail.last().is_some_and(|d| *d > 1e-12 * scale) {
        RecipIntegrability::NonIntegrable
    } else {
        RecipIntegrability::Undetermined
    }
}
