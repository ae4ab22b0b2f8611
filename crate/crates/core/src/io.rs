//! Versioned file formats: scenes, polylines, plan results and bench CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::collision::{Obstacle, Scene};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, Polyline};
use crate::planner::{PlanCounts, PlanResult, PlanStatus, PlannerConfig};

pub const SCENE_VERSION: u32 = 1;
pub const POLYLINE_VERSION: u32 = 1;
pub const RESULT_VERSION: u32 = 1;
pub const BENCH_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDocument {
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_path: Option<Vec<Vec<f64>>>,
    obstacles: Vec<Obstacle>,
}

/// A scene plus the optional query and reference path stored with it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub scene: Scene,
    pub start: Option<Configuration>,
    pub goal: Option<Configuration>,
    /// A known feasible path, used by the sampling audit.
    pub reference_path: Option<Polyline>,
}

fn check_version(value: &Value, supported: u32) -> Result<()> {
    match value.get("version").and_then(Value::as_u64) {
        Some(v) if v == supported as u64 => Ok(()),
        Some(v) => Err(Error::UnsupportedVersion {
            found: v as u32,
            supported,
        }),
        None => Err(Error::SceneFormat("version: missing or not an integer".into())),
    }
}

fn point(coords: Vec<f64>, dimension: usize, field: &str) -> Result<Configuration> {
    if coords.len() != dimension {
        return Err(Error::SceneFormat(format!(
            "{field}: expected {dimension} coordinates, found {}",
            coords.len()
        )));
    }
    Configuration::new(coords).map_err(|e| Error::SceneFormat(format!("{field}: {e}")))
}

/// Parses a scene document. `fallback_name` names scenes without a `name`.
pub fn load_scene(text: &str, fallback_name: &str) -> Result<SceneFile> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::SceneFormat(e.to_string()))?;
    check_version(&value, SCENE_VERSION)?;
    // Parse again from text so errors keep their line and column.
    let doc: SceneDocument = serde_json::from_str(text).map_err(|e| Error::SceneFormat(e.to_string()))?;
    let n = doc.dimension;
    let scene = Scene::new(doc.name.unwrap_or_else(|| fallback_name.into()), n, doc.obstacles)?;
    let start = doc.start.map(|c| point(c, n, "start")).transpose()?;
    let goal = doc.goal.map(|c| point(c, n, "goal")).transpose()?;
    let reference_path = doc
        .reference_path
        .map(|pts| {
            let pts = pts
                .into_iter()
                .enumerate()
                .map(|(i, c)| point(c, n, &format!("reference_path[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            Polyline::new(pts).map_err(|e| Error::SceneFormat(format!("reference_path: {e}")))
        })
        .transpose()?;
    Ok(SceneFile {
        scene,
        start,
        goal,
        reference_path,
    })
}

pub fn load_scene_file(path: &std::path::Path) -> Result<SceneFile> {
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    load_scene(&text, stem)
}

pub fn serialize_scene(file: &SceneFile) -> String {
    let doc = SceneDocument {
        version: SCENE_VERSION,
        name: Some(file.scene.name.clone()),
        dimension: file.scene.dimension,
        start: file.start.as_ref().map(|q| q.coords().to_vec()),
        goal: file.goal.as_ref().map(|q| q.coords().to_vec()),
        reference_path: file
            .reference_path
            .as_ref()
            .map(|p| p.waypoints().iter().map(|q| q.coords().to_vec()).collect()),
        obstacles: file.scene.obstacles.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("scene documents serialize")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolylineDocument {
    version: u32,
    waypoints: Vec<Vec<f64>>,
}

pub fn load_polyline(text: &str) -> Result<Polyline> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::SceneFormat(e.to_string()))?;
    check_version(&value, POLYLINE_VERSION)?;
    let doc: PolylineDocument = serde_json::from_value(value)?;
    let pts = doc
        .waypoints
        .into_iter()
        .map(Configuration::new)
        .collect::<Result<Vec<_>>>()?;
    Polyline::new(pts)
}

pub fn serialize_polyline(path: &Polyline) -> String {
    serde_json::to_string(&PolylineDocument {
        version: POLYLINE_VERSION,
        waypoints: path.waypoints().iter().map(|q| q.coords().to_vec()).collect(),
    })
    .expect("polylines serialize")
}

/// Summary of one plan run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub version: u32,
    pub scene: String,
    pub config: PlannerConfig,
    pub status: String,
    pub iterations: u64,
    pub k_solve: Option<u64>,
    pub counts: PlanCounts,
    pub path: Option<Vec<Vec<f64>>>,
}

impl ResultFile {
    pub fn new(scene: &Scene, config: &PlannerConfig, result: &PlanResult) -> Self {
        let path = match &result.status {
            PlanStatus::Solved(p) => Some(p.waypoints().iter().map(|q| q.coords().to_vec()).collect()),
            PlanStatus::Exhausted => None,
        };
        ResultFile {
            version: RESULT_VERSION,
            scene: scene.name.clone(),
            config: config.clone(),
            status: if path.is_some() { "solved" } else { "exhausted" }.into(),
            iterations: result.iterations,
            k_solve: path.is_some().then_some(result.iterations),
            counts: result.counts,
            path,
        }
    }
}

/// One row of a bench CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scene: String,
    pub seed: u64,
    pub budget: u64,
    pub solved: bool,
    pub k_solve: Option<u64>,
    pub splits: u64,
    pub samples: u64,
    pub probes: u64,
    pub wall_ms: f64,
}

pub const BENCH_COLUMNS: [&str; 9] = [
    "scene", "seed", "budget", "solved", "k_solve", "splits", "samples", "probes", "wall_ms",
];

/// Writes a `# pcd-bench v1` line followed by the CSV header and rows.
pub fn write_bench_csv<W: Write>(mut out: W, rows: &[BenchRow]) -> Result<()> {
    writeln!(out, "# pcd-bench v{BENCH_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(BENCH_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bench_csv(text: &str) -> Result<Vec<BenchRow>> {
    let first = text.lines().next().unwrap_or_default();
    let version = first
        .strip_prefix("# pcd-bench v")
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| Error::SceneFormat("bench csv: missing version line".into()))?;
    if version != BENCH_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: BENCH_VERSION,
        });
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    if r.headers()?.iter().ne(BENCH_COLUMNS) {
        return Err(Error::SceneFormat("bench csv: unexpected columns".into()));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let f = load_scene(r#"{"version":1,"dimension":2,"obstacles":[]}"#, "x").unwrap();
        assert_eq!(f.scene, Scene { name: "x".into(), ..Scene::empty(2) });
        assert!(f.start.is_none() && f.reference_path.is_none());
    }

    #[test]
    fn one_box() {
        let f = load_scene(
            r#"{"version":1,"dimension":2,"obstacles":[{"kind":"box","lower":[0.4,0.4],"upper":[0.6,0.6]}]}"#,
            "b",
        )
        .unwrap();
        assert_eq!(f.scene.obstacles.len(), 1);
        assert!(matches!(f.scene.obstacles[0], Obstacle::Box { .. }));
    }

    #[test]
    fn bad_exponent_list_names_field() {
        let err = load_scene(
            r#"{"version":1,"dimension":2,"obstacles":[{"kind":"polynomial","constraints":[{"terms":[[1.0,[2,0,1]]],"relation":"<=0"}]}]}"#,
            "p",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("obstacles[0].constraints[0].terms[0]"), "{err}");
    }

    #[test]
    fn rejects_unknown_kind_with_position() {
        let err = load_scene(
            "{\"version\":1,\"dimension\":2,\n\"obstacles\":[{\"kind\":\"sphere\"}]}",
            "s",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("sphere") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn rejects_other_versions() {
        assert!(matches!(
            load_scene(r#"{"version":2,"dimension":2,"obstacles":[]}"#, "v"),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
        assert!(load_scene(r#"{"dimension":2,"obstacles":[]}"#, "v").is_err());
    }

    #[test]
    fn rejects_bad_query_points() {
        let err = load_scene(r#"{"version":1,"dimension":2,"start":[0.1],"obstacles":[]}"#, "q")
            .unwrap_err()
            .to_string();
        assert!(err.contains("start"), "{err}");
    }

    #[test]
    fn polyline_round_trip() {
        let p = Polyline::new(vec![
            Configuration::new(vec![0.1, 0.2]).unwrap(),
            Configuration::new(vec![0.3, 0.7]).unwrap(),
        ])
        .unwrap();
        assert_eq!(load_polyline(&serialize_polyline(&p)).unwrap(), p);
    }

    #[test]
    fn bench_csv_round_trip() {
        let rows = vec![BenchRow {
            scene: "empty".into(),
            seed: 3,
            budget: 10,
            solved: true,
            k_solve: Some(1),
            splits: 0,
            samples: 2,
            probes: 161,
            wall_ms: 0.25,
        }];
        let mut buf = Vec::new();
        write_bench_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# pcd-bench v1\nscene,seed,budget,solved,k_solve,splits,samples,probes,wall_ms\n"));
        assert_eq!(read_bench_csv(&text).unwrap(), rows);
    }
}
