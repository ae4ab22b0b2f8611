//! Rectangloid cells and the binary split tree.
//!
//! Every node of the tree is a [`Cell`]; leaves are the current
//! decomposition. A mixed leaf is split in the middle between its newest
//! sample and the nearest stored sample of the opposite type, perpendicular
//! to the axis of largest per-axis distance.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::collision::{Obstacle, Scene};
use crate::error::{Error, Result};
use crate::geometry::{chebyshev_unchecked, Aabb, Configuration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub u32);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    PossiblyFree,
    PossiblyOccupied,
    Mixed,
}

pub fn classify(free_count: usize, colliding_count: usize) -> Result<CellStatus> {
    match (free_count, colliding_count) {
        (0, 0) => Err(Error::InvalidArgument(
            "a cell needs at least one sample to be classified".into(),
        )),
        (_, 0) => Ok(CellStatus::PossiblyFree),
        (0, _) => Ok(CellStatus::PossiblyOccupied),
        _ => Ok(CellStatus::Mixed),
    }
}

/// A stored sample. `seq` is a tree-wide insertion counter; the newest
/// sample of a cell is the one with the largest `seq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub q: Configuration,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlane {
    pub axis: usize,
    pub coordinate: f64,
    pub lower: CellId,
    pub upper: CellId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: CellId,
    pub parent: Option<CellId>,
    pub bbox: Aabb,
    pub free: Vec<Sample>,
    pub colliding: Vec<Sample>,
    pub status: CellStatus,
    /// Set once the cell has been split; its samples then live in the children.
    pub split: Option<SplitPlane>,
}

impl Cell {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn newest_sample(&self) -> Option<(&Sample, bool)> {
        let f = self.free.iter().max_by_key(|s| s.seq).map(|s| (s, false));
        let c = self.colliding.iter().max_by_key(|s| s.seq).map(|s| (s, true));
        match (f, c) {
            (Some(a), Some(b)) => Some(if a.0.seq > b.0.seq { a } else { b }),
            (a, b) => a.or(b),
        }
    }
}

/// `true` iff `q2` lies in the one-sided split sector `S^{axis,sign}(q)`.
pub fn in_split_sector(
    cell: &Cell,
    q: &Configuration,
    q2: &Configuration,
    axis: usize,
    positive: bool,
) -> bool {
    if !cell.bbox.contains(q2) {
        return false;
    }
    let di = (q[axis] - q2[axis]).abs();
    let dominant = (0..q.dimension())
        .filter(|&j| j != axis)
        .all(|j| di >= (q[j] - q2[j]).abs());
    let side = if positive {
        q2[axis] >= q[axis]
    } else {
        q2[axis] <= q[axis]
    };
    dominant && side
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitChoice {
    pub axis: usize,
    pub coordinate: f64,
    /// Nearest stored sample of opposing type.
    pub opposing: Sample,
}

/// Split between `new_sample` and its nearest opposing sample under the
/// ∞-norm, perpendicular to the axis of largest per-axis distance. Ties on
/// the nearest sample go to the oldest, ties on the axis to the lowest index.
pub fn choose_split(cell: &Cell, new_sample: &Configuration, new_is_colliding: bool) -> Result<SplitChoice> {
    let pool = if new_is_colliding {
        &cell.free
    } else {
        &cell.colliding
    };
    let mut nearest: Option<(&Sample, f64)> = None;
    for s in pool {
        let d = chebyshev_unchecked(s.q.coords(), new_sample.coords());
        match nearest {
            Some((best, bd)) if d > bd || (d == bd && s.seq > best.seq) => {}
            _ => nearest = Some((s, d)),
        }
    }
    let (old, distance) = nearest.ok_or(Error::NoOpposingSample { cell: cell.id })?;
    if distance == 0.0 {
        return Err(Error::CoincidentSamples {
            cell: cell.id,
            q: new_sample.coords().to_vec(),
        });
    }
    let mut axis = 0;
    let mut widest = -1.0;
    for i in 0..new_sample.dimension() {
        let d = (old.q[i] - new_sample[i]).abs();
        if d > widest {
            widest = d;
            axis = i;
        }
    }
    let (lo, hi) = if old.q[axis] < new_sample[axis] {
        (old.q[axis], new_sample[axis])
    } else {
        (new_sample[axis], old.q[axis])
    };
    // For float-adjacent samples the midpoint can round onto the upper one;
    // the lower one still separates them under the lower-child rule.
    let mid = 0.5 * (lo + hi);
    Ok(SplitChoice {
        axis,
        coordinate: if mid < hi { mid } else { lo },
        opposing: old.clone(),
    })
}

/// One split applied by [`SplitTree::split_mixed_cells`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRecord {
    pub cell: CellId,
    pub axis: usize,
    pub coordinate: f64,
    pub trigger: Sample,
    pub trigger_colliding: bool,
    pub opposing: Sample,
    pub lower: CellId,
    pub upper: CellId,
    pub lower_status: CellStatus,
    pub upper_status: CellStatus,
}

/// Outcome of one step of [`SplitTree::split_next_mixed`].
#[derive(Debug, Clone, PartialEq)]
pub enum SplitStep {
    Split(SplitRecord),
    Stalled { cell: CellId, axis: usize, coordinate: f64 },
}

#[derive(Debug, Clone)]
pub struct SplitTree {
    dimension: usize,
    cells: Vec<Cell>,
    next_seq: u64,
    free_leaves: BTreeSet<CellId>,
    occupied_leaves: BTreeSet<CellId>,
    mixed_leaves: BTreeSet<CellId>,
    stalled_leaves: BTreeSet<CellId>,
}

impl SplitTree {
    /// Tree with a single root cell `[0,1]^n` holding the given free samples.
    pub fn new(free_samples: Vec<Configuration>) -> Result<Self> {
        let dimension = free_samples
            .first()
            .ok_or_else(|| Error::InvalidArgument("root cell needs a free sample".into()))?
            .dimension();
        let mut tree = SplitTree {
            dimension,
            cells: vec![Cell {
                id: CellId(0),
                parent: None,
                bbox: Aabb::unit(dimension),
                free: Vec::new(),
                colliding: Vec::new(),
                status: CellStatus::PossiblyFree,
                split: None,
            }],
            next_seq: 0,
            free_leaves: BTreeSet::from([CellId(0)]),
            occupied_leaves: BTreeSet::new(),
            mixed_leaves: BTreeSet::new(),
            stalled_leaves: BTreeSet::new(),
        };
        for q in free_samples {
            tree.add_sample(CellId(0), q, false)?;
        }
        Ok(tree)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn root(&self) -> &Cell {
        &self.cells[0]
    }

    pub fn cell(&self, id: CellId) -> Option<&Cell> {
        self.cells.get(id.0 as usize)
    }

    pub(crate) fn cell_unchecked(&self, id: CellId) -> &Cell {
        &self.cells[id.0 as usize]
    }

    fn leaf(&self, id: CellId) -> Result<&Cell> {
        match self.cell(id) {
            Some(c) if c.is_leaf() => Ok(c),
            _ => Err(Error::NotALeaf(id)),
        }
    }

    /// All nodes ever created, internal ones included.
    pub fn node_count(&self) -> usize {
        self.cells.len()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.free_leaves.len()
            + self.occupied_leaves.len()
            + self.mixed_leaves.len()
            + self.stalled_leaves.len()
    }

    pub fn split_count(&self) -> usize {
        (self.cells.len() - 1) / 2
    }

    pub fn possibly_free(&self) -> &BTreeSet<CellId> {
        &self.free_leaves
    }

    pub fn possibly_occupied(&self) -> &BTreeSet<CellId> {
        &self.occupied_leaves
    }

    pub fn mixed(&self) -> &BTreeSet<CellId> {
        &self.mixed_leaves
    }

    /// Mixed leaves whose samples no float coordinate strictly inside the
    /// cell can separate. They are never split, sampled or searched.
    pub fn stalled(&self) -> &BTreeSet<CellId> {
        &self.stalled_leaves
    }

    fn index_set(&mut self, status: CellStatus) -> &mut BTreeSet<CellId> {
        match status {
            CellStatus::PossiblyFree => &mut self.free_leaves,
            CellStatus::PossiblyOccupied => &mut self.occupied_leaves,
            CellStatus::Mixed => &mut self.mixed_leaves,
        }
    }

    fn set_status(&mut self, id: CellId, status: CellStatus) {
        let old = self.cells[id.0 as usize].status;
        if old != status {
            self.index_set(old).remove(&id);
        }
        self.index_set(status).insert(id);
        self.cells[id.0 as usize].status = status;
    }

    /// Stores a sample in a leaf and reclassifies it. Returns the sample's
    /// sequence number.
    pub fn add_sample(&mut self, cell: CellId, q: Configuration, colliding: bool) -> Result<u64> {
        let leaf = self.leaf(cell)?;
        if !leaf.bbox.contains(&q) {
            return Err(Error::InvalidArgument(format!(
                "sample {:?} lies outside cell {cell}",
                q.coords()
            )));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let c = &mut self.cells[cell.0 as usize];
        let sample = Sample { q, seq };
        if colliding {
            c.colliding.push(sample);
        } else {
            c.free.push(sample);
        }
        let status = classify(c.free.len(), c.colliding.len())?;
        self.set_status(cell, status);
        Ok(seq)
    }

    /// Leaf containing `q`; points on a split plane descend to the lower child.
    pub fn locate(&self, q: &Configuration) -> CellId {
        self.locate_coords(q.coords())
    }

    pub(crate) fn locate_coords(&self, q: &[f64]) -> CellId {
        let mut id = CellId(0);
        while let Some(plane) = &self.cells[id.0 as usize].split {
            id = if q[plane.axis] <= plane.coordinate {
                plane.lower
            } else {
                plane.upper
            };
        }
        id
    }

    /// Splits leaf `cell` at `coordinate` on `axis`. Samples on the plane go
    /// to the lower child.
    pub fn apply_split(&mut self, cell: CellId, axis: usize, coordinate: f64) -> Result<(CellId, CellId)> {
        let parent = self.leaf(cell)?;
        if axis >= self.dimension {
            return Err(Error::AxisOutOfRange {
                axis,
                dimension: self.dimension,
            });
        }
        if !(parent.bbox.lower[axis] < coordinate && coordinate < parent.bbox.upper[axis]) {
            return Err(Error::SplitOutsideCell {
                cell,
                axis,
                coordinate,
            });
        }
        let below = |s: &Sample| s.q[axis] <= coordinate;
        let (free_lo, free_hi): (Vec<_>, Vec<_>) = parent.free.iter().cloned().partition(below);
        let (col_lo, col_hi): (Vec<_>, Vec<_>) = parent.colliding.iter().cloned().partition(below);
        if free_lo.is_empty() && col_lo.is_empty() || free_hi.is_empty() && col_hi.is_empty() {
            return Err(Error::EmptyCell(cell));
        }
        let lower_status = classify(free_lo.len(), col_lo.len())?;
        let upper_status = classify(free_hi.len(), col_hi.len())?;

        let mut lo_box = parent.bbox.clone();
        let mut hi_box = parent.bbox.clone();
        let mut up = lo_box.upper.clone().into_coords();
        up[axis] = coordinate;
        lo_box.upper = Configuration::from_unchecked(up);
        let mut low = hi_box.lower.clone().into_coords();
        low[axis] = coordinate;
        hi_box.lower = Configuration::from_unchecked(low);

        let lower = CellId(self.cells.len() as u32);
        let upper = CellId(lower.0 + 1);
        let old_status = parent.status;
        self.cells.push(Cell {
            id: lower,
            parent: Some(cell),
            bbox: lo_box,
            free: free_lo,
            colliding: col_lo,
            status: lower_status,
            split: None,
        });
        self.cells.push(Cell {
            id: upper,
            parent: Some(cell),
            bbox: hi_box,
            free: free_hi,
            colliding: col_hi,
            status: upper_status,
            split: None,
        });
        self.index_set(old_status).remove(&cell);
        self.index_set(lower_status).insert(lower);
        self.index_set(upper_status).insert(upper);
        let p = &mut self.cells[cell.0 as usize];
        p.free.clear();
        p.colliding.clear();
        p.split = Some(SplitPlane {
            axis,
            coordinate,
            lower,
            upper,
        });
        Ok((lower, upper))
    }

    /// Splits mixed leaves, smallest id first, until none remain.
    pub fn split_mixed_cells(&mut self) -> Result<Vec<SplitRecord>> {
        let mut records = Vec::new();
        while let Some(step) = self.split_next_mixed()? {
            if let SplitStep::Split(r) = step {
                records.push(r);
            }
        }
        Ok(records)
    }

    /// Splits the mixed leaf with the smallest id, if any. A leaf whose split
    /// coordinate is not strictly inside it is stalled instead.
    pub fn split_next_mixed(&mut self) -> Result<Option<SplitStep>> {
        let Some(&id) = self.mixed_leaves.iter().next() else {
            return Ok(None);
        };
        let cell = &self.cells[id.0 as usize];
        let (trigger, trigger_colliding) = cell
            .newest_sample()
            .map(|(s, c)| (s.clone(), c))
            .ok_or(Error::EmptyCell(id))?;
        let choice = choose_split(cell, &trigger.q, trigger_colliding)?;
        let b = &cell.bbox;
        if !(b.lower[choice.axis] < choice.coordinate && choice.coordinate < b.upper[choice.axis]) {
            self.mixed_leaves.remove(&id);
            self.stalled_leaves.insert(id);
            return Ok(Some(SplitStep::Stalled {
                cell: id,
                axis: choice.axis,
                coordinate: choice.coordinate,
            }));
        }
        let (lower, upper) = self.apply_split(id, choice.axis, choice.coordinate)?;
        Ok(Some(SplitStep::Split(SplitRecord {
            cell: id,
            axis: choice.axis,
            coordinate: choice.coordinate,
            trigger,
            trigger_colliding,
            opposing: choice.opposing,
            lower,
            upper,
            lower_status: self.cells[lower.0 as usize].status,
            upper_status: self.cells[upper.0 as usize].status,
        })))
    }

    /// Leaf containing the sample with sequence number `seq`.
    pub fn leaf_holding(&self, q: &Configuration, seq: u64) -> Option<CellId> {
        let mut id = CellId(0);
        loop {
            let c = &self.cells[id.0 as usize];
            match &c.split {
                None => {
                    let holds = c.free.iter().chain(&c.colliding).any(|s| s.seq == seq);
                    return holds.then_some(id);
                }
                Some(plane) => {
                    id = if q[plane.axis] <= plane.coordinate {
                        plane.lower
                    } else {
                        plane.upper
                    }
                }
            }
        }
    }
}

/// Upper bound on the number of splits a possibly free cell can undergo
/// against colliders while keeping its free sample `q_f`, given that the
/// open ∞-ball of radius `eps_qf` around `q_f` is collision free.
pub fn max_splits_bound(bbox: &Aabb, q_f: &Configuration, eps_qf: f64) -> Result<u32> {
    if !(eps_qf > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "free-ball radius must be positive, got {eps_qf}"
        )));
    }
    if !bbox.contains(q_f) {
        return Err(Error::InvalidArgument("free sample lies outside the box".into()));
    }
    // ceil(log2(D / eps)) evaluated by halving, which is exact for powers of two.
    let side = |mut d: f64| {
        let mut m = 0;
        while d > eps_qf {
            d *= 0.5;
            m += 1;
        }
        m
    };
    Ok((0..bbox.dimension())
        .map(|i| side(bbox.upper[i] - q_f[i]) + side(q_f[i] - bbox.lower[i]))
        .sum())
}

/// Box around `q_f` whose interior no later split of its cell can cut.
///
/// For each axis and direction the nearest colliding configuration inside
/// the one-sided split sector bounds the closest possible split; the region
/// reaches halfway to it, or to the cell boundary when the sector is free.
/// Boxes are handled analytically; polynomial obstacles are probed on a grid
/// of spacing `clearance_resolution` and pulled in by one grid step.
pub fn cleared_region(
    cell_box: &Aabb,
    q_f: &Configuration,
    scene: &Scene,
    clearance_resolution: f64,
) -> Result<Aabb> {
    if scene.collides(q_f.coords()) {
        return Err(Error::InCollision(q_f.coords().to_vec()));
    }
    if !cell_box.contains(q_f) {
        return Err(Error::InvalidArgument("free sample lies outside the cell".into()));
    }
    let n = q_f.dimension();
    // nearest[2i] for the + side of axis i, nearest[2i + 1] for the - side.
    let mut nearest = vec![f64::INFINITY; 2 * n];
    for o in &scene.obstacles {
        sector_nearest(o, cell_box, q_f.coords(), clearance_resolution, &mut nearest);
    }
    let mut lower = cell_box.lower.coords().to_vec();
    let mut upper = cell_box.upper.coords().to_vec();
    for i in 0..n {
        if nearest[2 * i].is_finite() {
            upper[i] = upper[i].min(q_f[i] + 0.5 * nearest[2 * i]);
        }
        if nearest[2 * i + 1].is_finite() {
            lower[i] = lower[i].max(q_f[i] - 0.5 * nearest[2 * i + 1]);
        }
    }
    Ok(Aabb {
        lower: Configuration::from_unchecked(lower),
        upper: Configuration::from_unchecked(upper),
    })
}

fn sector_nearest(o: &Obstacle, cell: &Aabb, q: &[f64], step: f64, nearest: &mut [f64]) {
    match o {
        Obstacle::Box { lower, upper } => {
            let Some(b) = cell.intersection(&Aabb {
                lower: lower.clone(),
                upper: upper.clone(),
            }) else {
                return;
            };
            box_sector_nearest(&b, q, nearest);
        }
        Obstacle::Union { members } => {
            for m in members {
                sector_nearest(m, cell, q, step, nearest);
            }
        }
        Obstacle::Polynomial { .. } => grid_sector_nearest(o, cell, q, step, nearest),
    }
}

/// Smallest `t = |q'_i - q_i|` over `q'` in the closed box `b` that lie in
/// the closed one-sided sector, per axis and side.
fn box_sector_nearest(b: &Aabb, q: &[f64], nearest: &mut [f64]) {
    let n = q.len();
    let gap = |j: usize| (b.lower[j] - q[j]).max(q[j] - b.upper[j]).max(0.0);
    for i in 0..n {
        let others = (0..n).filter(|&j| j != i).map(gap).fold(0.0, f64::max);
        let t_plus = (b.lower[i] - q[i]).max(others).max(0.0);
        if q[i] + t_plus <= b.upper[i] {
            nearest[2 * i] = nearest[2 * i].min(t_plus);
        }
        let t_minus = (q[i] - b.upper[i]).max(others).max(0.0);
        if q[i] - t_minus >= b.lower[i] {
            nearest[2 * i + 1] = nearest[2 * i + 1].min(t_minus);
        }
    }
}

fn grid_sector_nearest(o: &Obstacle, cell: &Aabb, q: &[f64], step: f64, nearest: &mut [f64]) {
    let n = q.len();
    let counts: Vec<usize> = (0..n)
        .map(|i| (cell.width(i) / step).ceil() as usize + 1)
        .collect();
    let mut idx = vec![0usize; n];
    let mut p = vec![0.0; n];
    loop {
        for i in 0..n {
            p[i] = (cell.lower[i] + idx[i] as f64 * step).min(cell.upper[i]);
        }
        if o.contains(&p) {
            let d = chebyshev_unchecked(q, &p);
            for i in 0..n {
                let di = (p[i] - q[i]).abs();
                if di < d {
                    continue;
                }
                let t = (di - step).max(0.0);
                let slot = if p[i] >= q[i] { 2 * i } else { 2 * i + 1 };
                nearest[slot] = nearest[slot].min(t);
                if p[i] == q[i] {
                    nearest[2 * i + 1] = nearest[2 * i + 1].min(t);
                }
            }
        }
        let mut axis = 0;
        while axis < n {
            idx[axis] += 1;
            if idx[axis] < counts[axis] {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
        if axis == n {
            break;
        }
    }
}
