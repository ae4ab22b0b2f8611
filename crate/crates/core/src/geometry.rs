//! Metric primitives over the unit cube `[0,1]^n`.
//!
//! Two metrics are in play: the Chebyshev (∞-norm) distance used for
//! ε-balls, split sectors and clearances, and the Euclidean distance used
//! only for path length and A* costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for face-coordinate equality in [`shared_face`].
pub const ADJACENCY_TOLERANCE: f64 = 1e-12;

/// A point of the configuration space `[0,1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Configuration(Vec<f64>);

impl Configuration {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument(
                "configuration needs at least one coordinate".into(),
            ));
        }
        for (axis, &value) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfUnitCube { axis, value });
            }
        }
        Ok(Self(coords))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// Builds a configuration without range checks. Callers guarantee the
    /// coordinates already lie in the unit cube.
    pub(crate) fn from_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| (0.0..=1.0).contains(c)));
        Self(coords)
    }

    /// Point `self + t (other - self)`, clamped per axis to the segment's
    /// bounding box so rounding never carries it outside a box holding both
    /// endpoints.
    pub fn lerp(&self, other: &Configuration, t: f64) -> Configuration {
        let coords = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a + t * (b - a)).clamp(a.min(b), a.max(b)))
            .collect();
        Self(coords)
    }

    pub fn euclidean_distance(&self, other: &Configuration) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<Vec<f64>> for Configuration {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(q: Configuration) -> Self {
        q.0
    }
}

impl std::ops::Index<usize> for Configuration {
    type Output = f64;

    fn index(&self, axis: usize) -> &f64 {
        &self.0[axis]
    }
}

fn check_same_dimension(a: &Configuration, b: &Configuration) -> Result<()> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            expected: a.dimension(),
            actual: b.dimension(),
        });
    }
    Ok(())
}

/// `max_i |q[i] - q2[i]|`.
pub fn chebyshev_distance(q: &Configuration, q2: &Configuration) -> Result<f64> {
    check_same_dimension(q, q2)?;
    Ok(chebyshev_unchecked(q.coords(), q2.coords()))
}

pub(crate) fn chebyshev_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `|q[i] - q2[i]|`.
pub fn per_axis_distance(q: &Configuration, q2: &Configuration, axis: usize) -> Result<f64> {
    check_same_dimension(q, q2)?;
    if axis >= q.dimension() {
        return Err(Error::AxisOutOfRange {
            axis,
            dimension: q.dimension(),
        });
    }
    Ok((q[axis] - q2[axis]).abs())
}

/// Axis-aligned box `[lower, upper]`, closed on every side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lower: Configuration,
    pub upper: Configuration,
}

impl Aabb {
    pub fn new(lower: Configuration, upper: Configuration) -> Result<Self> {
        check_same_dimension(&lower, &upper)?;
        for axis in 0..lower.dimension() {
            if lower[axis] > upper[axis] {
                return Err(Error::InvalidArgument(format!(
                    "box lower {} exceeds upper {} on axis {axis}",
                    lower[axis], upper[axis]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_bounds(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(Configuration::new(lower)?, Configuration::new(upper)?)
    }

    /// The whole configuration space `[0,1]^n`.
    pub fn unit(dimension: usize) -> Self {
        Self {
            lower: Configuration(vec![0.0; dimension]),
            upper: Configuration(vec![1.0; dimension]),
        }
    }

    pub fn dimension(&self) -> usize {
        self.lower.dimension()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    /// Lebesgue measure `∏ (upper[i] - lower[i])`.
    pub fn measure(&self) -> f64 {
        (0..self.dimension()).map(|i| self.width(i)).product()
    }

    pub fn contains(&self, q: &Configuration) -> bool {
        self.contains_coords(q.coords())
    }

    pub(crate) fn contains_coords(&self, q: &[f64]) -> bool {
        q.len() == self.dimension()
            && q
                .iter()
                .enumerate()
                .all(|(i, &c)| self.lower[i] <= c && c <= self.upper[i])
    }

    pub fn center(&self) -> Configuration {
        Configuration(
            (0..self.dimension())
                .map(|i| 0.5 * (self.lower[i] + self.upper[i]))
                .collect(),
        )
    }

    /// Euclidean length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        self.lower.euclidean_distance(&self.upper)
    }

    /// Closed intersection, `None` if the boxes are disjoint.
    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        if self.dimension() != other.dimension() {
            return None;
        }
        let mut lower = Vec::with_capacity(self.dimension());
        let mut upper = Vec::with_capacity(self.dimension());
        for i in 0..self.dimension() {
            let lo = self.lower[i].max(other.lower[i]);
            let hi = self.upper[i].min(other.upper[i]);
            if lo > hi {
                return None;
            }
            lower.push(lo);
            upper.push(hi);
        }
        Some(Aabb {
            lower: Configuration(lower),
            upper: Configuration(upper),
        })
    }

    /// True if the open interiors overlap, i.e. every axis overlaps with
    /// positive width.
    pub fn interiors_intersect(&self, other: &Aabb) -> bool {
        self.dimension() == other.dimension()
            && (0..self.dimension())
                .all(|i| self.upper[i].min(other.upper[i]) > self.lower[i].max(other.lower[i]))
    }

    /// Chebyshev distance from `q` to the closed box; zero inside.
    pub fn chebyshev_distance_to(&self, q: &[f64]) -> f64 {
        q.iter()
            .enumerate()
            .map(|(i, &c)| (self.lower[i] - c).max(c - self.upper[i]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// True if the closed segment `a..b` meets the closed box.
    pub fn intersects_segment(&self, a: &[f64], b: &[f64]) -> bool {
        // Slab clipping on the parameter interval.
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        for i in 0..self.dimension() {
            let d = b[i] - a[i];
            if d == 0.0 {
                if a[i] < self.lower[i] || a[i] > self.upper[i] {
                    return false;
                }
                continue;
            }
            let mut ta = (self.lower[i] - a[i]) / d;
            let mut tb = (self.upper[i] - a[i]) / d;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

/// The open ε-ball `{q' : ||q - q'||∞ < ε}` clipped to the unit cube.
pub fn eps_ball(q: &Configuration, eps: f64) -> Result<Aabb> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ball radius must be positive, got {eps}"
        )));
    }
    let lower = q.coords().iter().map(|c| (c - eps).max(0.0)).collect();
    let upper = q.coords().iter().map(|c| (c + eps).min(1.0)).collect();
    Ok(Aabb {
        lower: Configuration(lower),
        upper: Configuration(upper),
    })
}

/// Strict membership in the unclipped open ε-ball around `center`.
pub fn in_eps_ball(center: &[f64], eps: f64, q: &[f64]) -> bool {
    chebyshev_unchecked(center, q) < eps
}

pub fn box_measure(b: &Aabb) -> f64 {
    b.measure()
}

/// Common boundary of two boxes with nonzero `(n-1)`-measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Axis perpendicular to the face.
    pub axis: usize,
    /// The face itself; degenerate (zero width) on `axis`.
    pub region: Aabb,
}

pub fn shared_face(a: &Aabb, b: &Aabb) -> Option<Face> {
    let n = a.dimension();
    if n != b.dimension() {
        return None;
    }
    let mut touching = None;
    for i in 0..n {
        let above = (a.upper[i] - b.lower[i]).abs() <= ADJACENCY_TOLERANCE;
        let below = (b.upper[i] - a.lower[i]).abs() <= ADJACENCY_TOLERANCE;
        if above || below {
            if touching.is_some() {
                return None;
            }
            let coordinate = if above { a.upper[i] } else { a.lower[i] };
            touching = Some((i, coordinate));
        }
    }
    let (axis, coordinate) = touching?;
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for j in 0..n {
        if j == axis {
            lower.push(coordinate);
            upper.push(coordinate);
            continue;
        }
        let lo = a.lower[j].max(b.lower[j]);
        let hi = a.upper[j].min(b.upper[j]);
        if !(hi > lo) {
            return None;
        }
        lower.push(lo);
        upper.push(hi);
    }
    Some(Face {
        axis,
        region: Aabb {
            lower: Configuration(lower),
            upper: Configuration(upper),
        },
    })
}

/// Piecewise-linear path through a sequence of waypoints.
///
/// A single waypoint is allowed and denotes the degenerate query where start
/// and goal coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Configuration>", into = "Vec<Configuration>")]
pub struct Polyline(Vec<Configuration>);

impl Polyline {
    pub fn new(waypoints: Vec<Configuration>) -> Result<Self> {
        let first = waypoints
            .first()
            .ok_or_else(|| Error::InvalidArgument("polyline needs a waypoint".into()))?;
        let n = first.dimension();
        for (k, w) in waypoints.iter().enumerate() {
            if w.dimension() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: w.dimension(),
                });
            }
            if k > 0 && chebyshev_unchecked(waypoints[k - 1].coords(), w.coords()) == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "waypoints {} and {k} coincide",
                    k - 1
                )));
            }
        }
        Ok(Self(waypoints))
    }

    /// Builds a polyline, dropping consecutive duplicate waypoints.
    pub fn dedup(mut waypoints: Vec<Configuration>) -> Result<Self> {
        waypoints.dedup_by(|b, a| chebyshev_unchecked(a.coords(), b.coords()) == 0.0);
        Self::new(waypoints)
    }

    pub fn waypoints(&self) -> &[Configuration] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0[0].dimension()
    }

    pub fn start(&self) -> &Configuration {
        &self.0[0]
    }

    pub fn end(&self) -> &Configuration {
        self.0.last().expect("polyline is never empty")
    }

    pub fn segments(&self) -> impl Iterator<Item = (&Configuration, &Configuration)> {
        self.0.windows(2).map(|w| (&w[0], &w[1]))
    }

    /// Euclidean arc length.
    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.euclidean_distance(b)).sum()
    }

    /// Points along the path with Euclidean spacing at most `resolution`,
    /// including every waypoint.
    pub fn discretize(&self, resolution: f64) -> Vec<Configuration> {
        let mut points = vec![self.start().clone()];
        for (a, b) in self.segments() {
            let steps = (a.euclidean_distance(b) / resolution).ceil().max(1.0) as usize;
            for k in 1..steps {
                points.push(a.lerp(b, k as f64 / steps as f64));
            }
            points.push(b.clone());
        }
        points
    }
}

impl TryFrom<Vec<Configuration>> for Polyline {
    type Error = Error;

    fn try_from(waypoints: Vec<Configuration>) -> Result<Self> {
        Self::new(waypoints)
    }
}

impl From<Polyline> for Vec<Configuration> {
    fn from(p: Polyline) -> Self {
        p.0
    }
}

#[cfg(test)]
pub(crate) fn q(coords: &[f64]) -> Configuration {
    Configuration::new(coords.to_vec()).unwrap()
}

#[cfg(test)]
pub(crate) fn aabb(lower: &[f64], upper: &[f64]) -> Aabb {
    Aabb::from_bounds(lower.to_vec(), upper.to_vec()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chebyshev_examples() {
        assert_eq!(chebyshev_distance(&q(&[0.2, 0.5]), &q(&[0.2, 0.5])).unwrap(), 0.0);
        let d = chebyshev_distance(&q(&[0.2, 0.5]), &q(&[0.6, 0.4])).unwrap();
        assert!((d - 0.4).abs() < 1e-15);
        assert_eq!(
            chebyshev_distance(&q(&[0.0, 0.0, 0.0]), &q(&[1.0, 1.0, 1.0])).unwrap(),
            1.0
        );
        assert!(matches!(
            chebyshev_distance(&q(&[0.1]), &q(&[0.1, 0.2])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn per_axis_examples() {
        let (a, b) = (q(&[0.2, 0.5]), q(&[0.6, 0.4]));
        assert!((per_axis_distance(&a, &b, 0).unwrap() - 0.4).abs() < 1e-15);
        assert!((per_axis_distance(&a, &b, 1).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(per_axis_distance(&a, &a, 1).unwrap(), 0.0);
        assert!(matches!(
            per_axis_distance(&a, &b, 2),
            Err(Error::AxisOutOfRange { axis: 2, dimension: 2 })
        ));
    }

    #[test]
    fn eps_ball_examples() {
        let b = eps_ball(&q(&[0.5, 0.5]), 0.1).unwrap();
        assert!((b.lower[0] - 0.4).abs() < 1e-15 && (b.upper[1] - 0.6).abs() < 1e-15);
        let b = eps_ball(&q(&[0.05, 0.5]), 0.1).unwrap();
        assert_eq!(b.lower[0], 0.0);
        assert!((b.upper[0] - 0.15).abs() < 1e-15);
        assert_eq!(eps_ball(&q(&[0.5]), 2.0).unwrap(), Aabb::unit(1));
        assert!(eps_ball(&q(&[0.5]), 0.0).is_err());
        assert!(eps_ball(&q(&[0.5]), -1.0).is_err());
        // Strict membership against the open ball.
        assert!(!in_eps_ball(&[0.5], 0.125, &[0.625]));
        assert!(in_eps_ball(&[0.5], 0.125, &[0.62]));
    }

    #[test]
    fn measure_examples() {
        assert_eq!(box_measure(&Aabb::unit(3)), 1.0);
        assert_eq!(box_measure(&aabb(&[0.0, 0.0], &[0.5, 0.5])), 0.25);
        assert_eq!(box_measure(&aabb(&[0.3, 0.0], &[0.3, 1.0])), 0.0);
    }

    #[test]
    fn shared_face_examples() {
        let a = aabb(&[0.0, 0.0], &[0.5, 1.0]);
        let f = shared_face(&a, &aabb(&[0.5, 0.0], &[1.0, 1.0])).unwrap();
        assert_eq!(f.axis, 0);
        assert_eq!(f.region, aabb(&[0.5, 0.0], &[0.5, 1.0]));

        assert!(shared_face(
            &aabb(&[0.0, 0.0], &[0.5, 0.5]),
            &aabb(&[0.5, 0.5], &[1.0, 1.0])
        )
        .is_none());

        let f = shared_face(&a, &aabb(&[0.5, 0.4], &[1.0, 0.8])).unwrap();
        assert_eq!(f.axis, 0);
        assert_eq!(f.region, aabb(&[0.5, 0.4], &[0.5, 0.8]));

        // Separated boxes.
        assert!(shared_face(&a, &aabb(&[0.6, 0.0], &[1.0, 1.0])).is_none());
    }

    #[test]
    fn polyline_rejects_repeated_waypoints() {
        assert!(Polyline::new(vec![q(&[0.1]), q(&[0.1])]).is_err());
        let p = Polyline::dedup(vec![q(&[0.1]), q(&[0.1]), q(&[0.4])]).unwrap();
        assert_eq!(p.waypoints().len(), 2);
        assert!((p.length() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn segment_box_intersection() {
        let b = aabb(&[0.4, 0.4], &[0.6, 0.6]);
        assert!(b.intersects_segment(&[0.0, 0.5], &[1.0, 0.5]));
        assert!(!b.intersects_segment(&[0.0, 0.7], &[1.0, 0.7]));
        // Touching a corner counts: boxes are closed.
        assert!(b.intersects_segment(&[0.6, 0.6], &[0.9, 0.9]));
        assert!(!b.intersects_segment(&[0.0, 0.0], &[0.3, 0.3]));
    }

    fn config(n: usize) -> impl Strategy<Value = Configuration> {
        prop::collection::vec(0.0..=1.0f64, n).prop_map(|c| Configuration::new(c).unwrap())
    }

    fn boxed(n: usize) -> impl Strategy<Value = Aabb> {
        (config(n), config(n)).prop_map(|(a, b)| {
            let lo = a.coords().iter().zip(b.coords()).map(|(x, y)| x.min(*y)).collect();
            let hi = a.coords().iter().zip(b.coords()).map(|(x, y)| x.max(*y)).collect();
            Aabb::from_bounds(lo, hi).unwrap()
        })
    }

    proptest! {
        #[test]
        fn chebyshev_is_a_metric((a, b, c) in (1usize..5).prop_flat_map(|n| (config(n), config(n), config(n)))) {
            let ab = chebyshev_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, chebyshev_distance(&b, &a).unwrap());
            prop_assert_eq!(chebyshev_distance(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(ab == 0.0, a == b);
            let ac = chebyshev_distance(&a, &c).unwrap();
            let cb = chebyshev_distance(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-15);
            for i in 0..a.dimension() {
                prop_assert!(per_axis_distance(&a, &b, i).unwrap() <= ab);
            }
        }

        #[test]
        fn clipped_ball_measure_bounded((c, eps) in ((1usize..4).prop_flat_map(config), 1e-3..0.6f64)) {
            let n = c.dimension() as i32;
            let m = box_measure(&eps_ball(&c, eps).unwrap());
            let full = (2.0 * eps).powi(n);
            prop_assert!(m <= full * (1.0 + 1e-12));
            let inside = c.coords().iter().all(|&x| x - eps >= 0.0 && x + eps <= 1.0);
            prop_assert_eq!(inside, (m - full).abs() <= 1e-12 * full);
        }

        #[test]
        fn shared_face_symmetric((a, b) in (1usize..4).prop_flat_map(|n| (boxed(n), boxed(n)))) {
            // Snap b against a on axis 0 so faces actually occur.
            let mut lo = b.lower.coords().to_vec();
            let mut hi = b.upper.coords().to_vec();
            let w = hi[0] - lo[0];
            lo[0] = a.upper[0];
            hi[0] = (a.upper[0] + w).min(1.0);
            let b = Aabb::from_bounds(lo, hi).unwrap();
            let ab = shared_face(&a, &b);
            let ba = shared_face(&b, &a);
            prop_assert_eq!(ab, ba);
        }
    }
}
