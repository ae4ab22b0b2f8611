//! The PCD main loop.
//!
//! Each outer iteration runs the inner loop (search a channel of possibly
//! free cells, check its local path, split on the first collision) until no
//! channel is left, then draws one sample in every possibly occupied cell and
//! splits any cell that turned mixed.

use serde::{Deserialize, Serialize};

use crate::collision::{Scene, DEFAULT_RESOLUTION};
use crate::decomposition::{CellId, CellStatus, SplitStep, SplitTree};
use crate::error::{Error, Result};
use crate::geometry::{shared_face, Configuration, Polyline};
use crate::graph::{find_cell_path, CellPath, ConnectivityGraph};
use crate::rng::{SampleRng, RNG_NAME};
use crate::trace::{
    scene_fingerprint, tree_hash, PathEvent, PlanTrace, ResultEvent, SampleEvent, SplitEvent,
    StallEvent, StoreEvent, TraceEvent, TraceHeader, Verdict, TRACE_VERSION,
};

pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Probe spacing for local path checks.
    pub resolution: f64,
    pub max_iterations: u64,
    pub seed: u64,
    /// Keep every free probe of a checked path as a free sample of its cell.
    #[serde(default)]
    pub store_checkpath_samples: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            resolution: DEFAULT_RESOLUTION,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            store_checkpath_samples: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "resolution must be positive, got {}",
                self.resolution
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanStatus {
    Solved(Polyline),
    Exhausted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanCounts {
    pub splits: u64,
    /// Samples stored in the tree, endpoints included.
    pub samples: u64,
    pub probes: u64,
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub status: PlanStatus,
    /// Outer iterations run; for a solved query, the iteration that solved it.
    pub iterations: u64,
    /// Channel searches in the last outer iteration.
    pub inner_iterations: u64,
    pub counts: PlanCounts,
    pub tree: SplitTree,
    /// Present unless the run was untraced.
    pub trace: Option<PlanTrace>,
}

impl PlanResult {
    pub fn is_solved(&self) -> bool {
        matches!(self.status, PlanStatus::Solved(_))
    }

    pub fn path(&self) -> Option<&Polyline> {
        match &self.status {
            PlanStatus::Solved(p) => Some(p),
            PlanStatus::Exhausted => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathCheck {
    Free(Polyline),
    Collision { cell: CellId, q: Configuration },
}

/// Polyline through the centres of the faces shared by consecutive cells,
/// paired with the cell that contains each segment.
fn local_segments(
    tree: &SplitTree,
    path: &CellPath,
    q_start: &Configuration,
    q_goal: &Configuration,
) -> Result<(Vec<Configuration>, Vec<CellId>)> {
    let mut points = vec![q_start.clone()];
    let mut owners = Vec::with_capacity(path.cells.len());
    for w in path.cells.windows(2) {
        let (a, b) = (tree.cell_unchecked(w[0]), tree.cell_unchecked(w[1]));
        let face = shared_face(&a.bbox, &b.bbox).ok_or(Error::NotAdjacent(w[0], w[1]))?;
        points.push(face.region.center());
        owners.push(w[0]);
    }
    points.push(q_goal.clone());
    owners.push(*path.cells.last().ok_or_else(|| Error::InvalidArgument("empty cell path".into()))?);
    Ok((points, owners))
}

pub fn derive_local_path(
    tree: &SplitTree,
    path: &CellPath,
    q_start: &Configuration,
    q_goal: &Configuration,
) -> Result<Polyline> {
    for &id in &path.cells {
        if tree.cell(id).is_none_or(|c| !c.is_leaf()) {
            return Err(Error::NotALeaf(id));
        }
    }
    Polyline::dedup(local_segments(tree, path, q_start, q_goal)?.0)
}

/// Mutable planner state for one query.
#[derive(Debug)]
pub struct Planner<'a> {
    scene: &'a Scene,
    config: PlannerConfig,
    q_start: Configuration,
    q_goal: Configuration,
    tree: SplitTree,
    graph: ConnectivityGraph,
    rng: SampleRng,
    trace: Option<PlanTrace>,
    k: u64,
    k_a: u64,
    probes: u64,
}

impl<'a> Planner<'a> {
    pub fn new(
        scene: &'a Scene,
        q_start: Configuration,
        q_goal: Configuration,
        config: PlannerConfig,
        traced: bool,
    ) -> Result<Self> {
        config.validate()?;
        for q in [&q_start, &q_goal] {
            if scene.is_colliding(q)? {
                return Err(Error::InCollision(q.coords().to_vec()));
            }
        }
        let trace = traced.then(|| {
            let mut t = PlanTrace::default();
            t.push(
                0,
                0,
                TraceEvent::Header(TraceHeader {
                    version: TRACE_VERSION,
                    scene: scene.name.clone(),
                    dimension: scene.dimension,
                    fingerprint: scene_fingerprint(scene),
                    start: q_start.coords().to_vec(),
                    goal: q_goal.coords().to_vec(),
                    config: config.clone(),
                    rng: RNG_NAME.into(),
                }),
            );
            t
        });
        Ok(Planner {
            scene,
            rng: SampleRng::new(config.seed),
            config,
            tree: SplitTree::new(vec![q_start.clone(), q_goal.clone()])?,
            graph: ConnectivityGraph::new(),
            q_start,
            q_goal,
            trace,
            k: 0,
            k_a: 0,
            probes: 0,
        })
    }

    pub fn tree(&self) -> &SplitTree {
        &self.tree
    }

    pub fn graph(&self) -> &ConnectivityGraph {
        &self.graph
    }

    fn record(&mut self, event: impl FnOnce() -> TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(self.k, self.k_a, event());
        }
    }

    /// Splits every mixed cell and updates the graph.
    fn split_mixed(&mut self) -> Result<usize> {
        let mut n = 0;
        while let Some(step) = self.tree.split_next_mixed()? {
            match step {
                SplitStep::Split(r) => {
                    self.graph.apply_split(&self.tree, r.cell, r.lower, r.upper);
                    self.record(|| TraceEvent::Split(SplitEvent::from(&r)));
                    n += 1;
                }
                SplitStep::Stalled { cell, axis, coordinate } => self.record(|| {
                    TraceEvent::Stall(StallEvent {
                        cell,
                        axis,
                        coord: coordinate,
                    })
                }),
            }
        }
        Ok(n)
    }

    /// Probes the channel's local path. The first colliding probe is stored
    /// in the channel cell containing the probed segment.
    pub fn check_path(&mut self, path: &CellPath) -> Result<PathCheck> {
        let (points, owners) = local_segments(&self.tree, path, &self.q_start, &self.q_goal)?;
        let mut stored = Vec::new();
        let mut hit = None;
        'segments: for (j, pair) in points.windows(2).enumerate() {
            let (a, b) = (&pair[0], &pair[1]);
            if j > 0 && a == b {
                continue;
            }
            if self.config.store_checkpath_samples {
                // Walk the probes one by one so free ones can be kept.
                let check = self.scene.check_segment(a, b, self.config.resolution)?;
                self.probes += check.probes as u64;
                for p in probe_points(a, b, self.config.resolution, check.probes) {
                    if self.scene.collides(p.coords()) {
                        break;
                    }
                    stored.push((owners[j], p));
                }
                if let Some(q) = check.collider {
                    hit = Some((owners[j], q));
                    break 'segments;
                }
            } else {
                let check = self.scene.check_segment(a, b, self.config.resolution)?;
                self.probes += check.probes as u64;
                if let Some(q) = check.collider {
                    hit = Some((owners[j], q));
                    break;
                }
            }
        }
        for (cell, q) in stored {
            self.record(|| {
                TraceEvent::Store(StoreEvent {
                    cell,
                    q: q.coords().to_vec(),
                })
            });
            self.tree.add_sample(cell, q, false)?;
        }
        let cells = path.cells.clone();
        match hit {
            None => {
                self.record(|| {
                    TraceEvent::Path(PathEvent {
                        cells,
                        verdict: Verdict::Free,
                        collider: None,
                        owner: None,
                    })
                });
                Ok(PathCheck::Free(Polyline::dedup(points)?))
            }
            Some((cell, q)) => {
                self.record(|| {
                    TraceEvent::Path(PathEvent {
                        cells,
                        verdict: Verdict::Collision,
                        collider: Some(q.coords().to_vec()),
                        owner: Some(cell),
                    })
                });
                self.tree.add_sample(cell, q.clone(), true)?;
                Ok(PathCheck::Collision { cell, q })
            }
        }
    }

    /// One uniform draw in every possibly occupied leaf, ascending id order.
    /// Returns the number of free draws.
    pub fn sample_occupied(&mut self) -> Result<usize> {
        let cells: Vec<CellId> = self.tree.possibly_occupied().iter().copied().collect();
        let mut free = 0;
        for id in cells {
            let q = self.rng.uniform_in(&self.tree.cell_unchecked(id).bbox);
            let colliding = self.scene.collides(q.coords());
            if !colliding {
                free += 1;
            }
            self.record(|| {
                TraceEvent::Sample(SampleEvent {
                    cell: id,
                    q: q.coords().to_vec(),
                    colliding,
                })
            });
            self.tree.add_sample(id, q, colliding)?;
        }
        Ok(free)
    }

    fn finish(mut self, status: PlanStatus) -> PlanResult {
        let counts = PlanCounts {
            splits: self.tree.split_count() as u64,
            samples: self.tree.leaves().map(|c| (c.free.len() + c.colliding.len()) as u64).sum(),
            probes: self.probes,
        };
        let path = match &status {
            PlanStatus::Solved(p) => Some(p.waypoints().iter().map(|q| q.coords().to_vec()).collect()),
            PlanStatus::Exhausted => None,
        };
        let tree = &self.tree;
        if let Some(t) = &mut self.trace {
            t.push(
                self.k,
                self.k_a,
                TraceEvent::Result(ResultEvent {
                    status: if path.is_some() { "solved" } else { "exhausted" }.into(),
                    iterations: self.k,
                    splits: counts.splits,
                    samples: counts.samples,
                    probes: counts.probes,
                    tree_hash: tree_hash(tree),
                    path,
                }),
            );
        }
        PlanResult {
            status,
            iterations: self.k,
            inner_iterations: self.k_a,
            counts,
            tree: self.tree,
            trace: self.trace,
        }
    }

    pub fn run(mut self) -> Result<PlanResult> {
        while self.k < self.config.max_iterations {
            self.k += 1;
            self.k_a = 0;
            self.record(|| TraceEvent::Outer);
            loop {
                self.k_a += 1;
                let Some(path) = find_cell_path(&self.tree, &self.graph, &self.q_start, &self.q_goal) else {
                    self.record(|| TraceEvent::NoPath);
                    break;
                };
                match self.check_path(&path)? {
                    PathCheck::Free(p) => return Ok(self.finish(PlanStatus::Solved(p))),
                    PathCheck::Collision { .. } => {
                        self.split_mixed()?;
                    }
                }
            }
            self.record(|| TraceEvent::Sampling);
            if self.sample_occupied()? > 0 {
                self.split_mixed()?;
            }
        }
        Ok(self.finish(PlanStatus::Exhausted))
    }
}

/// Probe sequence of [`Scene::check_segment`], truncated to `count` probes.
fn probe_points(a: &Configuration, b: &Configuration, resolution: f64, count: usize) -> Vec<Configuration> {
    let mut out = vec![a.clone()];
    let len = a.euclidean_distance(b);
    if len > 0.0 {
        out.push(b.clone());
        let steps = (len / resolution).ceil() as usize;
        for k in 1..steps {
            let t = (k as f64 * resolution) / len;
            if t >= 1.0 {
                break;
            }
            out.push(a.lerp(b, t));
        }
    }
    out.truncate(count);
    out
}

/// Runs a query and records its trace.
pub fn plan(scene: &Scene, q_start: &Configuration, q_goal: &Configuration, config: &PlannerConfig) -> Result<PlanResult> {
    Planner::new(scene, q_start.clone(), q_goal.clone(), config.clone(), true)?.run()
}

/// Runs a query without recording a trace.
pub fn plan_untraced(
    scene: &Scene,
    q_start: &Configuration,
    q_goal: &Configuration,
    config: &PlannerConfig,
) -> Result<PlanResult> {
    Planner::new(scene, q_start.clone(), q_goal.clone(), config.clone(), false)?.run()
}

/// `true` iff every leaf of `tree` has a status consistent with its samples.
pub fn statuses_consistent(tree: &SplitTree) -> bool {
    tree.leaves().all(|c| {
        let expect = match (c.free.is_empty(), c.colliding.is_empty()) {
            (false, true) => Some(CellStatus::PossiblyFree),
            (true, false) => Some(CellStatus::PossiblyOccupied),
            (false, false) => Some(CellStatus::Mixed),
            (true, true) => None,
        };
        expect == Some(c.status)
    })
}
