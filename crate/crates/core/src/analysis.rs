//! Executable versions of the completeness constructions, plus trace audits
//! and the success-rate experiment.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::collision::{Scene, DEFAULT_CLEARANCE_RESOLUTION};
use crate::decomposition::{cleared_region, max_splits_bound, CellStatus};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Configuration, Polyline};
use crate::io::BenchRow;
use crate::planner::{plan_untraced, PlanCounts, PlannerConfig};
use crate::rng::SampleRng;
use crate::trace::{PlanTrace, Replay, TraceEvent};

/// Minimum clearance over the probes of `path` at spacing `resolution`.
pub fn tunnel_clearance(scene: &Scene, path: &Polyline, resolution: f64) -> Result<f64> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!("resolution must be positive, got {resolution}")));
    }
    let mut best = f64::INFINITY;
    for p in path.discretize(resolution) {
        best = best.min(scene.clearance_at(&p, DEFAULT_CLEARANCE_RESOLUTION)?);
    }
    Ok(best)
}

/// Radius of the neighbourhood a single free sample eventually clears
/// around the path: a fifth of the tunnel clearance.
pub fn clearing_radius(scene: &Scene, path: &Polyline, resolution: f64) -> Result<f64> {
    Ok(tunnel_clearance(scene, path, resolution)? / 5.0)
}

/// Exact ∞-norm distance from `p` to the segment `a b`.
pub fn chebyshev_to_segment(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let n = p.len();
    let r: Vec<f64> = (0..n).map(|i| p[i] - a[i]).collect();
    let d: Vec<f64> = (0..n).map(|i| b[i] - a[i]).collect();
    let f = |t: f64| (0..n).map(|i| (r[i] - t * d[i]).abs()).fold(0.0, f64::max);
    // f is convex and piecewise linear; its minimum sits at t = 0, t = 1, a
    // zero of one term, or a crossing of two terms.
    let mut best = f(0.0).min(f(1.0));
    let mut try_t = |t: f64| {
        if t > 0.0 && t < 1.0 {
            best = best.min(f(t));
        }
    };
    for i in 0..n {
        if d[i] != 0.0 {
            try_t(r[i] / d[i]);
        }
        for j in i + 1..n {
            if d[i] != d[j] {
                try_t((r[i] - r[j]) / (d[i] - d[j]));
            }
            if d[i] != -d[j] {
                try_t((r[i] + r[j]) / (d[i] + d[j]));
            }
        }
    }
    best
}

pub fn chebyshev_to_polyline(p: &[f64], path: &Polyline) -> f64 {
    let w = path.waypoints();
    if w.len() == 1 {
        return crate::geometry::chebyshev_unchecked(p, w[0].coords());
    }
    path.segments()
        .map(|(a, b)| chebyshev_to_segment(p, a.coords(), b.coords()))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManhattanPath {
    pub path: Polyline,
    /// Centres of the chained ε-balls, in path order.
    pub centers: Vec<Configuration>,
}

impl ManhattanPath {
    /// Number of corners, i.e. interior waypoints.
    pub fn corners(&self) -> usize {
        self.path.waypoints().len().saturating_sub(2)
    }
}

/// First `t` in `(0, 1]` where `a + t (b - a)` reaches ∞-distance `eps`
/// from `c`, given that `a` is strictly inside.
fn exit_parameter(c: &[f64], a: &[f64], b: &[f64], eps: f64) -> f64 {
    let mut t_exit: f64 = 1.0;
    for i in 0..c.len() {
        let d = b[i] - a[i];
        if d != 0.0 {
            let target = if d > 0.0 { eps } else { -eps };
            let t = (target - (a[i] - c[i])) / d;
            if t >= 0.0 {
                t_exit = t_exit.min(t);
            }
        }
    }
    t_exit
}

fn point_on(a: &Configuration, b: &Configuration, t: f64) -> Configuration {
    if t >= 1.0 {
        b.clone()
    } else {
        a.lerp(b, t)
    }
}

/// Converts `path` into an axis-parallel path through a chain of ε-balls.
///
/// Each ball after the first is centred where the path leaves the previous
/// ball for the last time (last inside probe at spacing `resolution`, then
/// the exact crossing on the following segment). The last ball is centred
/// at the goal. Consecutive centres are joined by a staircase that moves
/// along axis 0 first, then axis 1, and so on.
pub fn manhattanize(scene: &Scene, path: &Polyline, eps: f64, resolution: f64) -> Result<ManhattanPath> {
    if !(resolution > 0.0) || !(resolution < eps) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < resolution < eps, got resolution {resolution}, eps {eps}"
        )));
    }
    let clearance = tunnel_clearance(scene, path, resolution)?;
    if eps >= clearance {
        return Err(Error::InvalidArgument(format!(
            "eps {eps} is not below the tunnel clearance {clearance}"
        )));
    }
    let probes = path.discretize(resolution);
    let goal = probes.last().expect("polylines are non-empty").clone();
    let inside = |c: &Configuration, q: &Configuration| crate::geometry::in_eps_ball(c.coords(), eps, q.coords());

    let mut centers = vec![probes[0].clone()];
    // The current centre lies on the segment probes[next - 1] -> probes[next].
    let mut next = 1;
    loop {
        let c = centers.last().unwrap().clone();
        match (next..probes.len()).rev().find(|&j| inside(&c, &probes[j])) {
            Some(j) if j == probes.len() - 1 => {
                if c != goal {
                    centers.push(goal.clone());
                }
                break;
            }
            Some(j) => {
                let t = exit_parameter(c.coords(), probes[j].coords(), probes[j + 1].coords(), eps);
                centers.push(point_on(&probes[j], &probes[j + 1], t));
                next = j + 1;
            }
            None if next < probes.len() => {
                let t = exit_parameter(c.coords(), c.coords(), probes[next].coords(), eps);
                centers.push(point_on(&c, &probes[next], t));
            }
            None => break,
        }
    }

    let mut points = vec![centers[0].clone()];
    for w in centers.windows(2) {
        let mut cur = w[0].coords().to_vec();
        for i in 0..cur.len() {
            if cur[i] != w[1][i] {
                cur[i] = w[1][i];
                points.push(Configuration::from_unchecked(cur.clone()));
            }
        }
    }
    let merged = merge_collinear(points);
    let out = Polyline::new(merged)?;
    for (a, b) in out.segments() {
        if let Some(q) = scene.check_segment(a, b, resolution)?.collider {
            return Err(Error::Construction(format!(
                "axis-parallel path collides at {:?}",
                q.coords()
            )));
        }
    }
    Ok(ManhattanPath { path: out, centers })
}

/// Drops interior waypoints where the path continues along the same axis
/// in the same direction.
fn merge_collinear(points: Vec<Configuration>) -> Vec<Configuration> {
    let mut out: Vec<Configuration> = Vec::with_capacity(points.len());
    let direction = |a: &Configuration, b: &Configuration| {
        (0..a.dimension())
            .find(|&i| a[i] != b[i])
            .map(|i| (i, b[i] > a[i]))
    };
    for p in points {
        if out.last() == Some(&p) {
            continue;
        }
        if out.len() >= 2 {
            let n = out.len();
            if direction(&out[n - 2], &out[n - 1]) == direction(&out[n - 1], &p) {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covering {
    pub eps: f64,
    pub centers: Vec<Configuration>,
}

impl Covering {
    pub fn count(&self) -> usize {
        self.centers.len()
    }

    /// `true` iff every probe of `path` at `per_unit` probes per unit length
    /// lies strictly within `eps` of some centre.
    pub fn covers(&self, path: &Polyline, per_unit: f64) -> bool {
        path.discretize(1.0 / per_unit).iter().all(|p| {
            self.centers
                .iter()
                .any(|c| crate::geometry::in_eps_ball(c.coords(), self.eps, p.coords()))
        })
    }
}

/// Balls at both endpoints, at every corner, and every `eps` along each
/// segment longer than `eps`.
pub fn finite_covering(path: &ManhattanPath, eps: f64) -> Result<Covering> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let w = path.path.waypoints();
    let mut centers = vec![w[0].clone()];
    for (a, b) in path.path.segments() {
        let len = a.euclidean_distance(b);
        let mut k = 1.0;
        while k * eps < len {
            centers.push(a.lerp(b, k * eps / len));
            k += 1.0;
        }
        centers.push(b.clone());
    }
    Ok(Covering { eps, centers })
}

/// `eps^(n - narrow_axes)`: lower bound on the chance that a uniform sample in a
/// cell crossed by the path lands in the ε-tunnel, where `narrow_axes` counts the
/// axes along which the cell is narrower than `eps`.
pub fn sampling_lower_bound(n: usize, eps: f64, narrow_axes: usize) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    if n == 0 || narrow_axes > n {
        return Err(Error::InvalidArgument(format!("need 0 <= narrow_axes <= n, n >= 1; got n {n}, narrow_axes {narrow_axes}")));
    }
    Ok(eps.powi((n - narrow_axes) as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingCheck {
    pub rate: f64,
    pub bound: f64,
    pub narrow_axes: usize,
    /// Three standard errors of the empirical rate.
    pub tolerance: f64,
    pub passed: bool,
}

/// Monte Carlo estimate of the tunnel hit rate in `cell`, tested against
/// [`sampling_lower_bound`] with a 3σ allowance.
pub fn verify_sampling_bound(cell: &Aabb, path: &Polyline, eps: f64, trials: u64, seed: u64) -> Result<SamplingCheck> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let crosses = if path.waypoints().len() == 1 {
        cell.contains(path.start())
    } else {
        path.segments().any(|(a, b)| cell.intersects_segment(a.coords(), b.coords()))
    };
    if !crosses {
        return Err(Error::InvalidArgument("the path does not meet the cell".into()));
    }
    let n = cell.dimension();
    let narrow_axes = (0..n).filter(|&i| cell.width(i) < eps).count();
    let bound = sampling_lower_bound(n, eps, narrow_axes)?;
    let mut rng = SampleRng::new(seed);
    let hits = (0..trials)
        .filter(|_| chebyshev_to_polyline(rng.uniform_in(cell).coords(), path) < eps)
        .count();
    let rate = hits as f64 / trials as f64;
    let tolerance = 3.0 * (rate * (1.0 - rate) / trials as f64).sqrt();
    Ok(SamplingCheck {
        rate,
        bound,
        narrow_axes,
        tolerance,
        passed: rate >= bound - tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Index of the offending record in the trace.
    pub record: usize,
    pub k: u64,
    pub k_a: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    /// Splits against each free sample within one inner loop stay within
    /// [`max_splits_bound`] of its cell and clearance.
    pub split_bound: CheckOutcome,
    /// Channel searches per inner loop stay within the summed split bounds
    /// plus the number of possibly free cells.
    pub inner_loop: CheckOutcome,
    /// Cleared regions are never cut by a split or overlapped by a possibly
    /// occupied cell created afterwards.
    pub cleared_regions: CheckOutcome,
    /// At each sampling step some possibly occupied cell meets the
    /// reference path. `None` without a reference path.
    pub sampling_coverage: Option<CheckOutcome>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.split_bound.passed()
            && self.inner_loop.passed()
            && self.cleared_regions.passed()
            && self.sampling_coverage.as_ref().is_none_or(CheckOutcome::passed)
    }
}

struct InnerLoop {
    /// seq -> (cell box at loop start, sample, bound, splits so far)
    tracked: BTreeMap<u64, (Aabb, Configuration, u32, u32)>,
    /// `None` when some free sample has no positive clearance estimate.
    limit: Option<u64>,
}

/// Replays `trace` against `scene` and audits the split bound, the inner
/// loop length, cleared regions and, given a reference path, sampling
/// coverage.
pub fn audit_trace(trace: &PlanTrace, scene: &Scene, reference_path: Option<&Polyline>) -> Result<AuditReport> {
    let header = trace.header()?;
    let mut replay = Replay::new(header, scene)?;
    let record_regions = !header.config.store_checkpath_samples;
    let mut report = AuditReport {
        sampling_coverage: reference_path.map(|_| CheckOutcome::default()),
        ..AuditReport::default()
    };
    let mut inner: Option<InnerLoop> = None;
    let mut regions: Vec<(u64, Aabb)> = Vec::new();
    let mut region_seqs: BTreeSet<u64> = BTreeSet::new();

    let violation = |i: usize, rec: &crate::trace::TraceRecord, message: String| Violation {
        record: i,
        k: rec.k,
        k_a: rec.k_a,
        message,
    };

    for (i, rec) in trace.records.iter().enumerate().skip(1) {
        // Inner-loop bookkeeping closes before the record is applied.
        if matches!(rec.event, TraceEvent::Sampling | TraceEvent::Result(_)) {
            if let Some(l) = inner.take() {
                if let Some(limit) = l.limit {
                    report.inner_loop.checked += 1;
                    if rec.k_a > limit {
                        report.inner_loop.violations.push(violation(
                            i,
                            rec,
                            format!("{} channel searches exceed the bound {limit}", rec.k_a),
                        ));
                    }
                }
                report.split_bound.checked += l.tracked.len();
            }
        }
        let split = replay.apply(rec)?;
        let tree = replay.tree();
        match &rec.event {
            TraceEvent::Outer => {
                let mut tracked = BTreeMap::new();
                let mut limit = Some(0u64);
                for &id in tree.possibly_free() {
                    let cell = tree.cell_unchecked(id);
                    limit = limit.map(|l| l + 1);
                    for s in &cell.free {
                        let clearance = scene.clearance_at(&s.q, DEFAULT_CLEARANCE_RESOLUTION)?;
                        if clearance <= 0.0 {
                            // Only grid estimates reach zero; such samples carry no bound.
                            limit = None;
                            continue;
                        }
                        let bound = max_splits_bound(&cell.bbox, &s.q, clearance)?;
                        limit = limit.map(|l| l + bound as u64);
                        tracked.insert(s.seq, (cell.bbox.clone(), s.q.clone(), bound, 0));
                    }
                    if record_regions && cell.free.len() == 1 && region_seqs.insert(cell.free[0].seq) {
                        let s = &cell.free[0];
                        let region = cleared_region(&cell.bbox, &s.q, scene, DEFAULT_CLEARANCE_RESOLUTION)?;
                        regions.push((s.seq, region));
                    }
                }
                inner = Some(InnerLoop { tracked, limit });
            }
            TraceEvent::Split(_) => {
                let r = split.expect("split records replay to splits");
                if let Some(l) = &mut inner {
                    if r.trigger_colliding {
                        if let Some((bbox, q, bound, count)) = l.tracked.get_mut(&r.opposing.seq) {
                            *count += 1;
                            if *count > *bound {
                                report.split_bound.violations.push(violation(
                                    i,
                                    rec,
                                    format!(
                                        "free sample {:?} in box {:?}..{:?} split {count} times, bound {bound}; \
                                         collider {:?} at distance {:e}, clearance {:e}",
                                        q.coords(),
                                        bbox.lower.coords(),
                                        bbox.upper.coords(),
                                        r.trigger.q.coords(),
                                        crate::geometry::chebyshev_unchecked(q.coords(), r.trigger.q.coords()),
                                        scene.clearance_at(q, DEFAULT_CLEARANCE_RESOLUTION)?,
                                    ),
                                ));
                            }
                        }
                    }
                }
                let parent = &tree.cell_unchecked(r.cell).bbox;
                for (seq, region) in &regions {
                    report.cleared_regions.checked += 1;
                    if parent.interiors_intersect(region)
                        && region.lower[r.axis] < r.coordinate
                        && r.coordinate < region.upper[r.axis]
                    {
                        report.cleared_regions.violations.push(violation(
                            i,
                            rec,
                            format!(
                                "split of {} at axis {} = {} cuts the region cleared around sample {seq}",
                                r.cell, r.axis, r.coordinate
                            ),
                        ));
                    }
                    for (child, status) in [(r.lower, r.lower_status), (r.upper, r.upper_status)] {
                        if status == CellStatus::PossiblyOccupied
                            && tree.cell_unchecked(child).bbox.interiors_intersect(region)
                        {
                            report.cleared_regions.violations.push(violation(
                                i,
                                rec,
                                format!("possibly occupied cell {child} overlaps the region cleared around sample {seq}"),
                            ));
                        }
                    }
                }
            }
            TraceEvent::Sampling => {
                if let (Some(path), Some(out)) = (reference_path, report.sampling_coverage.as_mut()) {
                    out.checked += 1;
                    let hit = tree.possibly_occupied().iter().any(|&id| {
                        let b = &tree.cell_unchecked(id).bbox;
                        path.segments().any(|(a, c)| b.intersects_segment(a.coords(), c.coords()))
                    });
                    if !hit {
                        out.violations.push(violation(
                            i,
                            rec,
                            "no possibly occupied cell meets the reference path".into(),
                        ));
                    }
                }
            }
            _ => {}
        }
    }
    Ok(report)
}

/// A planning query for the success experiment.
#[derive(Debug, Clone)]
pub struct Query {
    pub scene: Scene,
    pub start: Configuration,
    pub goal: Configuration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub k_solve: Option<u64>,
    pub counts: PlanCounts,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessCurve {
    pub scene: String,
    pub budgets: Vec<u64>,
    pub rates: Vec<f64>,
    pub trials: u64,
    pub base_seed: u64,
    pub runs: Vec<RunRecord>,
}

impl SuccessCurve {
    pub fn is_non_decreasing(&self) -> bool {
        self.rates.windows(2).all(|w| w[0] <= w[1])
    }

    /// One bench row per run and budget, runs outermost.
    pub fn bench_rows(&self) -> Vec<BenchRow> {
        let mut rows = Vec::with_capacity(self.runs.len() * self.budgets.len());
        for r in &self.runs {
            for &budget in &self.budgets {
                let solved = r.k_solve.is_some_and(|k| k <= budget);
                rows.push(BenchRow {
                    scene: self.scene.clone(),
                    seed: r.seed,
                    budget,
                    solved,
                    k_solve: r.k_solve.filter(|_| solved),
                    splits: r.counts.splits,
                    samples: r.counts.samples,
                    probes: r.counts.probes,
                    wall_ms: r.wall_ms,
                });
            }
        }
        rows
    }
}

/// Runs `trials` seeds per query with the largest budget and reads off the
/// solved fraction at every budget. Seeds run in parallel.
pub fn run_success_experiment(
    queries: &[Query],
    budgets: &[u64],
    trials: u64,
    base_seed: u64,
    resolution: f64,
) -> Result<Vec<SuccessCurve>> {
    let max_budget = *budgets
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidArgument("at least one budget is required".into()))?;
    queries
        .iter()
        .map(|query| {
            let runs = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let seed = base_seed + i;
                    let config = PlannerConfig {
                        resolution,
                        max_iterations: max_budget,
                        seed,
                        store_checkpath_samples: false,
                    };
                    let t = Instant::now();
                    let r = plan_untraced(&query.scene, &query.start, &query.goal, &config)?;
                    Ok(RunRecord {
                        seed,
                        k_solve: r.is_solved().then_some(r.iterations),
                        counts: r.counts,
                        wall_ms: t.elapsed().as_secs_f64() * 1e3,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let rates = budgets
                .iter()
                .map(|&b| runs.iter().filter(|r| r.k_solve.is_some_and(|k| k <= b)).count() as f64 / trials as f64)
                .collect();
            Ok(SuccessCurve {
                scene: query.scene.name.clone(),
                budgets: budgets.to_vec(),
                rates,
                trials,
                base_seed,
                runs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::Obstacle;
    use crate::geometry::{aabb, q};
    use crate::planner::plan;

    fn line(points: &[&[f64]]) -> Polyline {
        Polyline::new(points.iter().map(|p| q(p)).collect()).unwrap()
    }

    fn axis_parallel(p: &Polyline) -> bool {
        p.segments()
            .all(|(a, b)| (0..a.dimension()).filter(|&i| a[i] != b[i]).count() == 1)
    }

    #[test]
    fn tunnel_clearance_examples() {
        let straight = line(&[&[0.1, 0.5], &[0.9, 0.5]]);
        assert_eq!(tunnel_clearance(&Scene::empty(2), &straight, 0.01).unwrap(), 1.0);
        let top = Scene::new("top", 2, vec![Obstacle::from_box(aabb(&[0.4, 0.8], &[0.6, 1.0]))]).unwrap();
        assert!((tunnel_clearance(&top, &straight, 0.01).unwrap() - 0.3).abs() < 1e-12);
        let block = Scene::new("b", 2, vec![Obstacle::from_box(aabb(&[0.4, 0.4], &[0.6, 0.6]))]).unwrap();
        assert!(tunnel_clearance(&block, &straight, 0.01).is_err());
    }

    #[test]
    fn segment_distance_matches_dense_minimum() {
        let mut rng = SampleRng::new(11);
        for _ in 0..500 {
            let p: Vec<f64> = (0..3).map(|_| rng.unit_open()).collect();
            let a: Vec<f64> = (0..3).map(|_| rng.unit_open()).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.unit_open()).collect();
            let exact = chebyshev_to_segment(&p, &a, &b);
            let dense = (0..=20_000)
                .map(|k| {
                    let t = k as f64 / 20_000.0;
                    (0..3).map(|i| (p[i] - a[i] - t * (b[i] - a[i])).abs()).fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(exact <= dense + 1e-12 && dense - exact < 1e-4, "exact {exact} dense {dense}");
        }
    }

    #[test]
    fn manhattanize_axis_parallel_input_is_unchanged() {
        let p = line(&[&[0.1, 0.2], &[0.8, 0.2], &[0.8, 0.9]]);
        let m = manhattanize(&Scene::empty(2), &p, 0.2, 0.01).unwrap();
        assert_eq!(m.path, p);
        assert_eq!(m.corners(), 1);
    }

    #[test]
    fn manhattanize_diagonal() {
        let p = line(&[&[0.1, 0.1], &[0.9, 0.9]]);
        let m = manhattanize(&Scene::empty(2), &p, 0.2, 0.01).unwrap();
        assert!(axis_parallel(&m.path));
        assert_eq!(m.path.start(), p.start());
        assert_eq!(m.path.end(), p.end());
        let bound = (p.length() / 0.2).ceil() as usize + 1;
        assert!(m.centers.len() <= bound, "{} > {bound}", m.centers.len());
        for w in m.centers.windows(2) {
            assert!(crate::geometry::chebyshev_unchecked(w[0].coords(), w[1].coords()) <= 0.2 + 1e-12);
        }
    }

    #[test]
    fn manhattanize_rejects_large_eps() {
        let top = Scene::new("top", 2, vec![Obstacle::from_box(aabb(&[0.4, 0.8], &[0.6, 1.0]))]).unwrap();
        let p = line(&[&[0.1, 0.5], &[0.9, 0.5]]);
        assert!(manhattanize(&top, &p, 0.31, 0.01).is_err());
        assert!(manhattanize(&top, &p, 0.29, 0.01).is_ok());
        assert!(manhattanize(&top, &p, 0.01, 0.01).is_err());
    }

    #[test]
    fn manhattanize_avoids_obstacle_corner() {
        let scene = Scene::new("corner", 2, vec![Obstacle::from_box(aabb(&[0.5, 0.0], &[1.0, 0.45]))]).unwrap();
        let p = line(&[&[0.1, 0.1], &[0.45, 0.6], &[0.9, 0.6]]);
        let eps = 0.9 * tunnel_clearance(&scene, &p, 0.005).unwrap();
        let m = manhattanize(&scene, &p, eps, 0.005).unwrap();
        assert!(axis_parallel(&m.path));
        for (a, b) in m.path.segments() {
            assert!(scene.check_segment(a, b, 0.001).unwrap().collider.is_none());
        }
    }

    #[test]
    fn covering_examples() {
        let seg = ManhattanPath {
            path: line(&[&[0.0, 0.5], &[1.0, 0.5]]),
            centers: vec![],
        };
        let c = finite_covering(&seg, 0.25).unwrap();
        let xs: Vec<f64> = c.centers.iter().map(|q| q[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(c.covers(&seg.path, 2000.0));

        let short = ManhattanPath {
            path: line(&[&[0.2, 0.5], &[0.3, 0.5]]),
            centers: vec![],
        };
        assert_eq!(finite_covering(&short, 0.25).unwrap().count(), 2);

        let ell = ManhattanPath {
            path: line(&[&[0.1, 0.1], &[0.4, 0.1], &[0.4, 0.4]]),
            centers: vec![],
        };
        let c = finite_covering(&ell, 0.5).unwrap();
        assert_eq!(c.count(), 3);
        assert!(c.covers(&ell.path, 2000.0));
    }

    #[test]
    fn sampling_bound_examples() {
        assert!((sampling_lower_bound(2, 0.1, 0).unwrap() - 0.01).abs() < 1e-15);
        assert!((sampling_lower_bound(3, 0.1, 1).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(sampling_lower_bound(2, 1.0, 0).unwrap(), 1.0);
        assert!(sampling_lower_bound(2, 0.0, 0).is_err());
        assert!(sampling_lower_bound(2, 1.5, 0).is_err());
        assert!(sampling_lower_bound(2, 0.1, 3).is_err());
    }

    #[test]
    fn verify_sampling_examples() {
        let p = line(&[&[0.1, 0.5], &[0.9, 0.5]]);
        let ball = crate::geometry::eps_ball(&q(&[0.5, 0.5]), 0.1).unwrap();
        let r = verify_sampling_bound(&ball, &p, 0.1, 10_000, 1).unwrap();
        assert_eq!(r.rate, 1.0);
        assert!(r.passed);

        // Tunnel of the straight path in the unit square: [0, 1] x (0.4, 0.6)
        // clipped in x to (0, 1), so 0.2 of the area.
        let r = verify_sampling_bound(&Aabb::unit(2), &p, 0.1, 100_000, 2).unwrap();
        assert!(r.passed);
        assert!((r.rate - 0.2).abs() < 3.0 * (0.2f64 * 0.8 / 1e5).sqrt() + 1e-3, "{r:?}");

        let thin = aabb(&[0.3, 0.0], &[0.35, 1.0]);
        let r = verify_sampling_bound(&thin, &p, 0.1, 100_000, 3).unwrap();
        assert_eq!(r.narrow_axes, 1);
        assert!((r.bound - 0.1).abs() < 1e-15);
        assert!(r.passed);

        assert!(verify_sampling_bound(&aabb(&[0.0, 0.0], &[0.2, 0.2]), &p, 0.1, 10, 1).is_err());
    }

    fn wall_gap() -> (Scene, Polyline) {
        (
            Scene::new("wall-gap", 2, vec![Obstacle::from_box(aabb(&[0.45, 0.0], &[0.55, 0.9]))]).unwrap(),
            line(&[&[0.1, 0.5], &[0.1, 0.95], &[0.9, 0.95], &[0.9, 0.5]]),
        )
    }

    #[test]
    fn trivial_trace_passes_vacuously() {
        let scene = Scene::empty(2);
        let r = plan(&scene, &q(&[0.1, 0.5]), &q(&[0.9, 0.5]), &PlannerConfig::default()).unwrap();
        let reference = line(&[&[0.1, 0.5], &[0.9, 0.5]]);
        let report = audit_trace(r.trace.as_ref().unwrap(), &scene, Some(&reference)).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.split_bound.violations.len(), 0);
    }

    #[test]
    fn wall_gap_traces_pass() {
        let (scene, reference) = wall_gap();
        for seed in 0..20 {
            let cfg = PlannerConfig {
                seed,
                ..PlannerConfig::default()
            };
            let r = plan(&scene, &q(&[0.1, 0.5]), &q(&[0.9, 0.5]), &cfg).unwrap();
            let report = audit_trace(r.trace.as_ref().unwrap(), &scene, Some(&reference)).unwrap();
            assert!(report.passed(), "seed {seed}: {report:?}");
            assert!(report.split_bound.checked > 0);
        }
    }

    #[test]
    fn colliders_on_the_free_ball_face_add_one_split_per_side() {
        // Closed obstacles may touch the open free ball, so a side with
        // D equal to the clearance can still be split once.
        use crate::decomposition::SplitTree;
        let scene = Scene::new(
            "slab",
            1,
            vec![
                Obstacle::from_box(aabb(&[0.0], &[0.25])),
                Obstacle::from_box(aabb(&[0.75], &[1.0])),
            ],
        )
        .unwrap();
        let q_f = q(&[0.5]);
        let clearance = scene.clearance_at(&q_f, DEFAULT_CLEARANCE_RESOLUTION).unwrap();
        assert_eq!(clearance, 0.25);
        let bound = max_splits_bound(&Aabb::unit(1), &q_f, clearance).unwrap();
        assert_eq!(bound, 2);
        let mut tree = SplitTree::new(vec![q_f]).unwrap();
        let mut splits = 0;
        for c in [1.0, 0.75, 0.0, 0.25] {
            let p = q(&[c]);
            assert!(scene.collides(p.coords()));
            // Attributed to the cell holding the free sample, as a probe on
            // that cell's face would be.
            let id = tree.locate(&q(&[0.5]));
            tree.add_sample(id, p, true).unwrap();
            splits += tree.split_mixed_cells().unwrap().len();
        }
        assert_eq!(splits, 4);
        assert_eq!(tree.cell(tree.locate(&q(&[0.5]))).unwrap().bbox, aabb(&[0.375], &[0.625]));
    }

    #[test]
    fn unreachable_reference_is_reported() {
        let (scene, _) = wall_gap();
        let cfg = PlannerConfig {
            seed: 3,
            ..PlannerConfig::default()
        };
        let r = plan(&scene, &q(&[0.1, 0.5]), &q(&[0.9, 0.5]), &cfg).unwrap();
        let trace = r.trace.unwrap();
        assert!(trace.records.iter().any(|r| matches!(r.event, TraceEvent::Sampling)));
        // A path hugging the start meets no possibly occupied cell.
        let near_start = line(&[&[0.1, 0.5], &[0.11, 0.5]]);
        let report = audit_trace(&trace, &scene, Some(&near_start)).unwrap();
        assert!(!report.passed());
        assert!(!report.sampling_coverage.unwrap().violations.is_empty());
    }

    #[test]
    fn tampered_trace_fails_replay() {
        let (scene, _) = wall_gap();
        let r = plan(&scene, &q(&[0.1, 0.5]), &q(&[0.9, 0.5]), &PlannerConfig::default()).unwrap();
        let mut trace = r.trace.unwrap();
        let first = trace
            .records
            .iter()
            .position(|r| matches!(r.event, TraceEvent::Split(_)))
            .expect("the wall forces a split");
        let dup = trace.records[first].clone();
        trace.records.insert(first + 1, dup);
        assert!(audit_trace(&trace, &scene, None).is_err());
    }
}
