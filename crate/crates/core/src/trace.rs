//! Planner event log.
//!
//! A trace is a sequence of records `[kind, k, k_a, payload]`, one JSON
//! array per line. `k` is the outer iteration (1-based, 0 for the header),
//! `k_a` the number of channel searches so far in that iteration. Replaying
//! the records against the scene rebuilds the split tree exactly; the final
//! record carries a SHA-256 of the tree to confirm it.
//!
//! Record kinds and payloads:
//!
//! | kind       | payload |
//! |------------|---------|
//! | `header`   | version, scene name, dimension, scene fingerprint, start, goal, config, rng |
//! | `outer`    | `{}`, start of an outer iteration |
//! | `path`     | cells, verdict (`free`/`collision`), collider, owner cell |
//! | `nopath`   | `{}`, no channel: the inner loop breaks |
//! | `split`    | cell, axis, coord, trigger and opposing sample, child ids and statuses |
//! | `stall`    | cell, axis, coord: a mixed cell too thin to split in floating point |
//! | `sampling` | `{}`, start of the occupied-cell sampling step |
//! | `sample`   | cell, q, colliding |
//! | `store`    | cell, q: a free probe kept as a sample |
//! | `result`   | status, counts, tree hash, optional path |

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::collision::Scene;
use crate::decomposition::{CellId, CellStatus, SplitRecord, SplitStep, SplitTree};
use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::planner::PlannerConfig;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub scene: String,
    pub dimension: usize,
    pub fingerprint: String,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub config: PlannerConfig,
    pub rng: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Free,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEvent {
    pub cells: Vec<CellId>,
    pub verdict: Verdict,
    pub collider: Option<Vec<f64>>,
    pub owner: Option<CellId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEvent {
    pub cell: CellId,
    pub axis: usize,
    pub coord: f64,
    pub trigger: Vec<f64>,
    pub trigger_seq: u64,
    pub trigger_colliding: bool,
    pub opposing: Vec<f64>,
    pub opposing_seq: u64,
    pub lower: CellId,
    pub upper: CellId,
    pub lower_status: CellStatus,
    pub upper_status: CellStatus,
}

impl From<&SplitRecord> for SplitEvent {
    fn from(r: &SplitRecord) -> Self {
        SplitEvent {
            cell: r.cell,
            axis: r.axis,
            coord: r.coordinate,
            trigger: r.trigger.q.coords().to_vec(),
            trigger_seq: r.trigger.seq,
            trigger_colliding: r.trigger_colliding,
            opposing: r.opposing.q.coords().to_vec(),
            opposing_seq: r.opposing.seq,
            lower: r.lower,
            upper: r.upper,
            lower_status: r.lower_status,
            upper_status: r.upper_status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StallEvent {
    pub cell: CellId,
    pub axis: usize,
    pub coord: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEvent {
    pub cell: CellId,
    pub q: Vec<f64>,
    pub colliding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEvent {
    pub cell: CellId,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEvent {
    pub status: String,
    pub iterations: u64,
    pub splits: u64,
    pub samples: u64,
    pub probes: u64,
    pub tree_hash: String,
    pub path: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Header(TraceHeader),
    Outer,
    Path(PathEvent),
    NoPath,
    Split(SplitEvent),
    Stall(StallEvent),
    Sampling,
    Sample(SampleEvent),
    Store(StoreEvent),
    Result(ResultEvent),
}

impl TraceEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            TraceEvent::Header(_) => "header",
            TraceEvent::Outer => "outer",
            TraceEvent::Path(_) => "path",
            TraceEvent::NoPath => "nopath",
            TraceEvent::Split(_) => "split",
            TraceEvent::Stall(_) => "stall",
            TraceEvent::Sampling => "sampling",
            TraceEvent::Sample(_) => "sample",
            TraceEvent::Store(_) => "store",
            TraceEvent::Result(_) => "result",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: u64,
    pub k_a: u64,
    pub event: TraceEvent,
}

impl TraceRecord {
    pub fn to_line(&self) -> String {
        let payload = match &self.event {
            TraceEvent::Header(h) => serde_json::to_value(h),
            TraceEvent::Path(p) => serde_json::to_value(p),
            TraceEvent::Split(s) => serde_json::to_value(s),
            TraceEvent::Stall(s) => serde_json::to_value(s),
            TraceEvent::Sample(s) => serde_json::to_value(s),
            TraceEvent::Store(s) => serde_json::to_value(s),
            TraceEvent::Result(r) => serde_json::to_value(r),
            TraceEvent::Outer | TraceEvent::NoPath | TraceEvent::Sampling => Ok(json!({})),
        }
        .expect("trace payloads are plain data");
        json!([self.event.kind(), self.k, self.k_a, payload]).to_string()
    }

    pub fn from_line(line: &str, line_no: usize) -> Result<Self> {
        let bad = |message: String| Error::MalformedTrace {
            line: line_no,
            message,
        };
        let value: Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let Value::Array(mut parts) = value else {
            return Err(bad("expected [kind, k, k_a, payload]".into()));
        };
        if parts.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", parts.len())));
        }
        let payload = parts.pop().unwrap();
        let k_a = parts[2].as_u64().ok_or_else(|| bad("k_a: expected an integer".into()))?;
        let k = parts[1].as_u64().ok_or_else(|| bad("k: expected an integer".into()))?;
        let kind = parts[0].as_str().ok_or_else(|| bad("kind: expected a string".into()))?;
        fn decode<T: serde::de::DeserializeOwned>(v: Value, kind: &str) -> std::result::Result<T, String> {
            serde_json::from_value(v).map_err(|e| format!("{kind} payload: {e}"))
        }
        let event = match kind {
            "header" => TraceEvent::Header(decode(payload, kind).map_err(bad)?),
            "outer" => TraceEvent::Outer,
            "path" => TraceEvent::Path(decode(payload, kind).map_err(bad)?),
            "nopath" => TraceEvent::NoPath,
            "split" => TraceEvent::Split(decode(payload, kind).map_err(bad)?),
            "stall" => TraceEvent::Stall(decode(payload, kind).map_err(bad)?),
            "sampling" => TraceEvent::Sampling,
            "sample" => TraceEvent::Sample(decode(payload, kind).map_err(bad)?),
            "store" => TraceEvent::Store(decode(payload, kind).map_err(bad)?),
            "result" => TraceEvent::Result(decode(payload, kind).map_err(bad)?),
            other => return Err(bad(format!("unknown record kind {other:?}"))),
        };
        Ok(TraceRecord { k, k_a, event })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanTrace {
    pub records: Vec<TraceRecord>,
}

impl PlanTrace {
    pub fn push(&mut self, k: u64, k_a: u64, event: TraceEvent) {
        self.records.push(TraceRecord { k, k_a, event });
    }

    pub fn header(&self) -> Result<&TraceHeader> {
        match self.records.first().map(|r| &r.event) {
            Some(TraceEvent::Header(h)) => Ok(h),
            _ => Err(Error::MalformedTrace {
                line: 1,
                message: "first record must be a header".into(),
            }),
        }
    }

    pub fn result(&self) -> Option<&ResultEvent> {
        match self.records.last().map(|r| &r.event) {
            Some(TraceEvent::Result(r)) => Some(r),
            _ => None,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| TraceRecord::from_line(l, i + 1))
            .collect::<Result<Vec<_>>>()?;
        let trace = PlanTrace { records };
        let header = trace.header()?;
        if header.version != TRACE_VERSION {
            return Err(Error::UnsupportedVersion {
                found: header.version,
                supported: TRACE_VERSION,
            });
        }
        Ok(trace)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over the scene's dimension and obstacle list.
pub fn scene_fingerprint(scene: &Scene) -> String {
    let mut h = Sha256::new();
    h.update((scene.dimension as u64).to_le_bytes());
    h.update(serde_json::to_string(&scene.obstacles).expect("obstacles serialize").as_bytes());
    hex(&h.finalize())
}

/// SHA-256 over every node of the tree: boxes, split planes, statuses and
/// samples, with coordinates hashed by their bit patterns.
pub fn tree_hash(tree: &SplitTree) -> String {
    let mut h = Sha256::new();
    let put_f = |h: &mut Sha256, x: f64| h.update(x.to_bits().to_le_bytes());
    for i in 0..tree.node_count() {
        let c = tree.cell_unchecked(CellId(i as u32));
        h.update(c.id.0.to_le_bytes());
        for x in c.bbox.lower.coords().iter().chain(c.bbox.upper.coords()) {
            put_f(&mut h, *x);
        }
        match &c.split {
            Some(p) => {
                h.update([1u8]);
                h.update((p.axis as u64).to_le_bytes());
                put_f(&mut h, p.coordinate);
            }
            None => {
                h.update([
                    0u8,
                    match c.status {
                        CellStatus::PossiblyFree => 0,
                        CellStatus::PossiblyOccupied => 1,
                        CellStatus::Mixed => 2,
                    },
                ]);
                for (tag, list) in [(0u8, &c.free), (1u8, &c.colliding)] {
                    for s in list {
                        h.update([tag]);
                        h.update(s.seq.to_le_bytes());
                        for x in s.q.coords() {
                            put_f(&mut h, *x);
                        }
                    }
                }
            }
        }
    }
    hex(&h.finalize())
}

/// Incremental reconstruction of the split tree from trace records.
#[derive(Debug, Clone)]
pub struct Replay<'a> {
    scene: &'a Scene,
    tree: SplitTree,
}

impl<'a> Replay<'a> {
    pub fn new(header: &TraceHeader, scene: &'a Scene) -> Result<Self> {
        if header.dimension != scene.dimension {
            return Err(Error::TraceMismatch(format!(
                "trace is {}-dimensional, scene is {}-dimensional",
                header.dimension, scene.dimension
            )));
        }
        if header.fingerprint != scene_fingerprint(scene) {
            return Err(Error::TraceMismatch("scene fingerprint differs".into()));
        }
        let start = Configuration::new(header.start.clone())?;
        let goal = Configuration::new(header.goal.clone())?;
        Ok(Replay {
            scene,
            tree: SplitTree::new(vec![start, goal])?,
        })
    }

    pub fn tree(&self) -> &SplitTree {
        &self.tree
    }

    fn stored(&mut self, cell: CellId, q: &[f64], colliding: bool, what: &str) -> Result<()> {
        if self.scene.collides(q) != colliding {
            return Err(Error::TraceMismatch(format!(
                "{what} {q:?} recorded as {} but the scene disagrees",
                if colliding { "colliding" } else { "free" }
            )));
        }
        self.tree.add_sample(cell, Configuration::new(q.to_vec())?, colliding)?;
        Ok(())
    }

    /// Applies one record. For `split` records the recomputed split is
    /// checked against the recorded one and returned.
    pub fn apply(&mut self, record: &TraceRecord) -> Result<Option<SplitRecord>> {
        match &record.event {
            TraceEvent::Path(p) => {
                if let (Some(q), Some(owner)) = (&p.collider, p.owner) {
                    if self.tree.cell(owner).map(|c| c.status) != Some(CellStatus::PossiblyFree) {
                        return Err(Error::TraceMismatch(format!(
                            "collider owner {owner} is not a possibly free leaf"
                        )));
                    }
                    self.stored(owner, q, true, "collider")?;
                }
            }
            TraceEvent::Sample(s) => self.stored(s.cell, &s.q, s.colliding, "sample")?,
            TraceEvent::Store(s) => self.stored(s.cell, &s.q, false, "stored probe")?,
            TraceEvent::Split(s) => {
                let r = match self.tree.split_next_mixed()? {
                    Some(SplitStep::Split(r)) => r,
                    other => {
                        return Err(Error::TraceMismatch(format!(
                            "split of {} recorded but replay gives {other:?}",
                            s.cell
                        )))
                    }
                };
                if r.cell != s.cell
                    || r.axis != s.axis
                    || r.coordinate.to_bits() != s.coord.to_bits()
                    || r.lower != s.lower
                    || r.upper != s.upper
                    || r.trigger.seq != s.trigger_seq
                    || r.opposing.seq != s.opposing_seq
                {
                    return Err(Error::TraceMismatch(format!(
                        "recorded split of {} on axis {} at {} differs from recomputed split of {} on axis {} at {}",
                        s.cell, s.axis, s.coord, r.cell, r.axis, r.coordinate
                    )));
                }
                return Ok(Some(r));
            }
            TraceEvent::Stall(s) => match self.tree.split_next_mixed()? {
                Some(SplitStep::Stalled { cell, .. }) if cell == s.cell => {}
                other => {
                    return Err(Error::TraceMismatch(format!(
                        "stall of {} recorded but replay gives {other:?}",
                        s.cell
                    )))
                }
            },
            TraceEvent::Result(r) => {
                let got = tree_hash(&self.tree);
                if got != r.tree_hash {
                    return Err(Error::TraceMismatch(format!(
                        "final tree hash {got} differs from recorded {}",
                        r.tree_hash
                    )));
                }
            }
            TraceEvent::Header(_) | TraceEvent::Outer | TraceEvent::NoPath | TraceEvent::Sampling => {}
        }
        Ok(None)
    }
}

/// Replays a whole trace and returns the reconstructed tree.
pub fn replay(trace: &PlanTrace, scene: &Scene) -> Result<SplitTree> {
    let mut r = Replay::new(trace.header()?, scene)?;
    for rec in &trace.records[1..] {
        r.apply(rec)?;
    }
    Ok(r.tree)
}
