//! Connectivity graph over possibly free leaves.
//!
//! Face adjacency is tracked among all leaves so a split only has to look at
//! the parent's former neighbours. The graph proper is that adjacency
//! restricted to possibly free leaves.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::decomposition::{CellId, CellStatus, SplitTree};
#[cfg(test)]
use crate::decomposition::SplitStep;
use crate::geometry::{shared_face, Configuration};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityGraph {
    adjacency: BTreeMap<CellId, BTreeSet<CellId>>,
}

impl ConnectivityGraph {
    /// Graph of a tree that has not been split yet.
    pub fn new() -> Self {
        ConnectivityGraph {
            adjacency: BTreeMap::from([(CellId(0), BTreeSet::new())]),
        }
    }

    /// All-pairs reconstruction from the current leaves.
    pub fn rebuild(tree: &SplitTree) -> Self {
        let leaves: Vec<_> = tree.leaves().collect();
        let mut adjacency: BTreeMap<CellId, BTreeSet<CellId>> =
            leaves.iter().map(|c| (c.id, BTreeSet::new())).collect();
        for (i, a) in leaves.iter().enumerate() {
            for b in &leaves[i + 1..] {
                if shared_face(&a.bbox, &b.bbox).is_some() {
                    adjacency.get_mut(&a.id).unwrap().insert(b.id);
                    adjacency.get_mut(&b.id).unwrap().insert(a.id);
                }
            }
        }
        ConnectivityGraph { adjacency }
    }

    /// Replaces `parent` by its two children. `tree` must already contain the split.
    pub fn apply_split(&mut self, tree: &SplitTree, parent: CellId, lower: CellId, upper: CellId) {
        let old = self.adjacency.remove(&parent).unwrap_or_default();
        for n in &old {
            if let Some(set) = self.adjacency.get_mut(n) {
                set.remove(&parent);
            }
        }
        for child in [lower, upper] {
            let sibling = if child == lower { upper } else { lower };
            let bbox = &tree.cell_unchecked(child).bbox;
            let mut mine = BTreeSet::new();
            for &n in old.iter().chain(std::iter::once(&sibling)) {
                if shared_face(bbox, &tree.cell_unchecked(n).bbox).is_some() {
                    mine.insert(n);
                    self.adjacency.entry(n).or_default().insert(child);
                }
            }
            self.adjacency.entry(child).or_default().extend(mine);
        }
    }

    /// Face neighbours among all leaves.
    pub fn leaf_neighbors(&self, id: CellId) -> impl Iterator<Item = CellId> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    pub fn nodes<'a>(&'a self, tree: &'a SplitTree) -> impl Iterator<Item = CellId> + 'a {
        self.adjacency
            .keys()
            .copied()
            .filter(move |&id| tree.cell_unchecked(id).status == CellStatus::PossiblyFree)
    }

    pub fn neighbors<'a>(&'a self, tree: &'a SplitTree, id: CellId) -> impl Iterator<Item = CellId> + 'a {
        self.leaf_neighbors(id)
            .filter(move |&n| tree.cell_unchecked(n).status == CellStatus::PossiblyFree)
    }

    /// Undirected edges `(a, b)` with `a < b` between possibly free leaves.
    pub fn edges(&self, tree: &SplitTree) -> Vec<(CellId, CellId)> {
        self.nodes(tree)
            .flat_map(|a| self.neighbors(tree, a).filter(move |&b| a < b).map(move |b| (a, b)))
            .collect()
    }
}

impl Default for ConnectivityGraph {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellPath {
    pub cells: Vec<CellId>,
}

#[derive(Debug, Clone, Copy)]
struct Frontier {
    f: f64,
    id: CellId,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // Reversed so the max-heap pops the smallest f, then the smallest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(other.id.cmp(&self.id))
    }
}

/// Channel of possibly free cells from the cell of `q_start` to the cell of
/// `q_goal`, by A* over cell centres. `None` if either endpoint's cell is not
/// possibly free or no channel exists.
pub fn find_cell_path(
    tree: &SplitTree,
    graph: &ConnectivityGraph,
    q_start: &Configuration,
    q_goal: &Configuration,
) -> Option<CellPath> {
    let start = tree.locate(q_start);
    let goal = tree.locate(q_goal);
    let is_free = |id| tree.cell_unchecked(id).status == CellStatus::PossiblyFree;
    if !is_free(start) || !is_free(goal) {
        return None;
    }
    let goal_box = &tree.cell_unchecked(goal).bbox;
    let goal_radius = 0.5 * goal_box.diameter();
    // q_goal is within half a diameter of the goal cell's centre, so this is
    // a lower bound on the remaining centre-to-centre cost, and consistent.
    let heuristic = |id: CellId| {
        let c = tree.cell_unchecked(id).bbox.center();
        (c.euclidean_distance(q_goal) - goal_radius).max(0.0)
    };
    let center = |id: CellId| tree.cell_unchecked(id).bbox.center();

    let mut g: BTreeMap<CellId, f64> = BTreeMap::from([(start, 0.0)]);
    let mut came_from: BTreeMap<CellId, CellId> = BTreeMap::new();
    let mut closed: BTreeSet<CellId> = BTreeSet::new();
    let mut open = BinaryHeap::from([Frontier {
        f: heuristic(start),
        id: start,
    }]);
    while let Some(Frontier { id, .. }) = open.pop() {
        if !closed.insert(id) {
            continue;
        }
        if id == goal {
            let mut cells = vec![goal];
            let mut cur = goal;
            while let Some(&p) = came_from.get(&cur) {
                cells.push(p);
                cur = p;
            }
            cells.reverse();
            return Some(CellPath { cells });
        }
        let here = center(id);
        let g_here = g[&id];
        for n in graph.neighbors(tree, id) {
            if closed.contains(&n) {
                continue;
            }
            let cand = g_here + here.euclidean_distance(&center(n));
            if g.get(&n).is_none_or(|&old| cand < old) {
                g.insert(n, cand);
                came_from.insert(n, id);
                open.push(Frontier {
                    f: cand + heuristic(n),
                    id: n,
                });
            }
        }
    }
    None
}
