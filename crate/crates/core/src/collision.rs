//! Scenes and the boolean collision oracle.
//!
//! Obstacles are closed sets: boxes include their boundary and polynomial
//! constraints use the relations as written.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Configuration};

/// Default probe spacing for path checking.
pub const DEFAULT_RESOLUTION: f64 = 0.005;
/// Default grid spacing for clearance estimates against polynomial obstacles.
pub const DEFAULT_CLEARANCE_RESOLUTION: f64 = 0.005;
/// Stand-in for unbounded clearance; the diameter of `[0,1]^n` under ∞-norm.
pub const MAX_CLEARANCE: f64 = 1.0;
/// Tolerance applied to `= 0` polynomial relations.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=0")]
    LessEq,
    #[serde(rename = "<0")]
    Less,
    #[serde(rename = "=0")]
    Equal,
    #[serde(rename = ">=0")]
    GreaterEq,
    #[serde(rename = ">0")]
    Greater,
}

impl Relation {
    fn holds(self, value: f64) -> bool {
        match self {
            Relation::LessEq => value <= 0.0,
            Relation::Less => value < 0.0,
            Relation::Equal => value.abs() <= EQUALITY_TOLERANCE,
            Relation::GreaterEq => value >= 0.0,
            Relation::Greater => value > 0.0,
        }
    }
}

/// One monomial `coefficient · ∏ x_i^{exponents[i]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term(pub f64, pub Vec<u32>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialConstraint {
    pub terms: Vec<Term>,
    pub relation: Relation,
}

impl PolynomialConstraint {
    pub fn evaluate(&self, q: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|Term(c, e)| {
                c * e
                    .iter()
                    .zip(q)
                    .map(|(&p, &x)| x.powi(p as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn holds(&self, q: &[f64]) -> bool {
        self.relation.holds(self.evaluate(q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Obstacle {
    Box {
        lower: Configuration,
        upper: Configuration,
    },
    /// Conjunction of polynomial constraints.
    Polynomial {
        constraints: Vec<PolynomialConstraint>,
    },
    Union {
        members: Vec<Obstacle>,
    },
}

impl Obstacle {
    pub fn from_box(b: Aabb) -> Self {
        Obstacle::Box {
            lower: b.lower,
            upper: b.upper,
        }
    }

    fn as_box(&self) -> Option<Aabb> {
        match self {
            Obstacle::Box { lower, upper } => Some(Aabb {
                lower: lower.clone(),
                upper: upper.clone(),
            }),
            _ => None,
        }
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        match self {
            Obstacle::Box { lower, upper } => q
                .iter()
                .enumerate()
                .all(|(i, &c)| lower[i] <= c && c <= upper[i]),
            Obstacle::Polynomial { constraints } => constraints.iter().all(|c| c.holds(q)),
            Obstacle::Union { members } => members.iter().any(|m| m.contains(q)),
        }
    }

    pub fn is_box_only(&self) -> bool {
        match self {
            Obstacle::Box { .. } => true,
            Obstacle::Polynomial { .. } => false,
            Obstacle::Union { members } => members.iter().all(Obstacle::is_box_only),
        }
    }

    /// Boxes making up a box-only obstacle, in declaration order.
    pub fn boxes(&self, out: &mut Vec<Aabb>) {
        match self {
            Obstacle::Union { members } => members.iter().for_each(|m| m.boxes(out)),
            other => out.extend(other.as_box()),
        }
    }

    pub(crate) fn validate(&self, dimension: usize, path: &str) -> Result<()> {
        let mismatch = |field: String, found: usize| {
            Error::SceneFormat(format!(
                "{field}: expected {dimension} entries, found {found}"
            ))
        };
        match self {
            Obstacle::Box { lower, upper } => {
                if lower.dimension() != dimension {
                    return Err(mismatch(format!("{path}.lower"), lower.dimension()));
                }
                if upper.dimension() != dimension {
                    return Err(mismatch(format!("{path}.upper"), upper.dimension()));
                }
                for i in 0..dimension {
                    if lower[i] > upper[i] {
                        return Err(Error::SceneFormat(format!(
                            "{path}: lower exceeds upper on axis {i}"
                        )));
                    }
                }
            }
            Obstacle::Polynomial { constraints } => {
                if constraints.is_empty() {
                    return Err(Error::SceneFormat(format!(
                        "{path}.constraints: at least one constraint required"
                    )));
                }
                for (c, constraint) in constraints.iter().enumerate() {
                    if constraint.terms.is_empty() {
                        return Err(Error::SceneFormat(format!(
                            "{path}.constraints[{c}].terms: at least one term required"
                        )));
                    }
                    for (t, Term(coefficient, exponents)) in constraint.terms.iter().enumerate() {
                        let field = format!("{path}.constraints[{c}].terms[{t}]");
                        if !coefficient.is_finite() {
                            return Err(Error::SceneFormat(format!(
                                "{field}: coefficient must be finite"
                            )));
                        }
                        if exponents.len() != dimension {
                            return Err(mismatch(format!("{field}.exponents"), exponents.len()));
                        }
                    }
                }
            }
            Obstacle::Union { members } => {
                for (m, member) in members.iter().enumerate() {
                    member.validate(dimension, &format!("{path}.members[{m}]"))?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub dimension: usize,
    pub obstacles: Vec<Obstacle>,
}

/// Outcome of probing one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentCheck {
    pub collider: Option<Configuration>,
    pub probes: usize,
}

impl Scene {
    pub fn new(name: impl Into<String>, dimension: usize, obstacles: Vec<Obstacle>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::SceneFormat("dimension: must be at least 1".into()));
        }
        for (k, o) in obstacles.iter().enumerate() {
            o.validate(dimension, &format!("obstacles[{k}]"))?;
        }
        Ok(Self {
            name: name.into(),
            dimension,
            obstacles,
        })
    }

    pub fn empty(dimension: usize) -> Self {
        Self {
            name: "empty".into(),
            dimension,
            obstacles: Vec::new(),
        }
    }

    pub fn is_box_only(&self) -> bool {
        self.obstacles.iter().all(Obstacle::is_box_only)
    }

    fn check_dimension(&self, q: &Configuration) -> Result<()> {
        if q.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: q.dimension(),
            });
        }
        Ok(())
    }

    pub fn is_colliding(&self, q: &Configuration) -> Result<bool> {
        self.check_dimension(q)?;
        Ok(self.collides(q.coords()))
    }

    /// Unchecked collision query for hot loops.
    pub fn collides(&self, q: &[f64]) -> bool {
        self.obstacles.iter().any(|o| o.contains(q))
    }

    /// Probes `a + t (b - a)` at `t = k δ / len`, endpoints first and then
    /// interior probes in increasing `t`. Returns the first colliding probe.
    pub fn check_segment(
        &self,
        a: &Configuration,
        b: &Configuration,
        resolution: f64,
    ) -> Result<SegmentCheck> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        self.check_dimension(a)?;
        self.check_dimension(b)?;
        let mut probes = 1;
        if self.collides(a.coords()) {
            return Ok(SegmentCheck {
                collider: Some(a.clone()),
                probes,
            });
        }
        let len = a.euclidean_distance(b);
        if len == 0.0 {
            return Ok(SegmentCheck {
                collider: None,
                probes,
            });
        }
        probes += 1;
        if self.collides(b.coords()) {
            return Ok(SegmentCheck {
                collider: Some(b.clone()),
                probes,
            });
        }
        let steps = (len / resolution).ceil() as usize;
        for k in 1..steps {
            let t = (k as f64 * resolution) / len;
            if t >= 1.0 {
                break;
            }
            let p = a.lerp(b, t);
            probes += 1;
            if self.collides(p.coords()) {
                return Ok(SegmentCheck {
                    collider: Some(p),
                    probes,
                });
            }
        }
        Ok(SegmentCheck {
            collider: None,
            probes,
        })
    }

    /// Lower bound on the ∞-norm distance from a free `q` to the obstacles.
    ///
    /// Exact for boxes. Polynomial obstacles get an expanding-shell grid
    /// estimate at `clearance_resolution` that is pulled in by one grid step.
    pub fn clearance_at(&self, q: &Configuration, clearance_resolution: f64) -> Result<f64> {
        self.check_dimension(q)?;
        if self.collides(q.coords()) {
            return Err(Error::InCollision(q.coords().to_vec()));
        }
        let mut best = MAX_CLEARANCE;
        for o in &self.obstacles {
            best = best.min(obstacle_clearance(o, q.coords(), clearance_resolution));
        }
        Ok(best)
    }
}

fn obstacle_clearance(o: &Obstacle, q: &[f64], step: f64) -> f64 {
    match o {
        Obstacle::Box { lower, upper } => q
            .iter()
            .enumerate()
            .map(|(i, &c)| (lower[i] - c).max(c - upper[i]).max(0.0))
            .fold(0.0, f64::max),
        Obstacle::Union { members } => members
            .iter()
            .map(|m| obstacle_clearance(m, q, step))
            .fold(MAX_CLEARANCE, f64::min),
        Obstacle::Polynomial { .. } => shell_clearance(o, q, step),
    }
}

/// Grows ∞-norm shells of grid points around `q` until one collides.
fn shell_clearance(o: &Obstacle, q: &[f64], step: f64) -> f64 {
    let n = q.len();
    // Grid index range that stays inside the unit cube on each axis.
    let lo: Vec<i64> = q.iter().map(|&c| -((c / step).floor() as i64)).collect();
    let hi: Vec<i64> = q.iter().map(|&c| ((1.0 - c) / step).floor() as i64).collect();
    let reach = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| (-l).max(*h))
        .max()
        .unwrap_or(0);
    let mut point = vec![0.0; n];
    for m in 1..=reach {
        if shell_hits(o, q, step, m, &lo, &hi, &mut point) {
            let free_radius = (m - 1) as f64 * step;
            return (free_radius - step).max(0.0);
        }
    }
    MAX_CLEARANCE
}

fn shell_hits(
    o: &Obstacle,
    q: &[f64],
    step: f64,
    m: i64,
    lo: &[i64],
    hi: &[i64],
    point: &mut [f64],
) -> bool {
    let n = q.len();
    // Each shell point is enumerated once, keyed by the first axis at |k| = m.
    for pinned in 0..n {
        for side in [-m, m] {
            if side < lo[pinned] || side > hi[pinned] {
                continue;
            }
            let ranges: Vec<(i64, i64)> = (0..n)
                .map(|i| {
                    if i == pinned {
                        (side, side)
                    } else if i < pinned {
                        (lo[i].max(-m + 1), hi[i].min(m - 1))
                    } else {
                        (lo[i].max(-m), hi[i].min(m))
                    }
                })
                .collect();
            if ranges.iter().any(|(a, b)| a > b) {
                continue;
            }
            let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            loop {
                for i in 0..n {
                    point[i] = (q[i] + idx[i] as f64 * step).clamp(0.0, 1.0);
                }
                if o.contains(point) {
                    return true;
                }
                let mut axis = 0;
                loop {
                    if axis == n {
                        break;
                    }
                    if idx[axis] < ranges[axis].1 {
                        idx[axis] += 1;
                        break;
                    }
                    idx[axis] = ranges[axis].0;
                    axis += 1;
                }
                if axis == n {
                    break;
                }
            }
        }
    }
    false
}

#[cfg(test)]
pub(crate) fn disk_scene() -> Scene {
    // (x - 0.5)^2 + (y - 0.5)^2 - 0.04 <= 0
    let terms = vec![
        Term(1.0, vec![2, 0]),
        Term(-1.0, vec![1, 0]),
        Term(1.0, vec![0, 2]),
        Term(-1.0, vec![0, 1]),
        Term(0.5 - 0.04, vec![0, 0]),
    ];
    Scene::new(
        "disk",
        2,
        vec![Obstacle::Polynomial {
            constraints: vec![PolynomialConstraint {
                terms,
                relation: Relation::LessEq,
            }],
        }],
    )
    .unwrap()
}
