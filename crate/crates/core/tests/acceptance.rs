//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use pcd::analysis::{
    audit_trace, finite_covering, manhattanize, run_success_experiment, tunnel_clearance, verify_sampling_bound,
    AuditReport, CheckOutcome, Query,
};
use pcd::collision::{Obstacle, Scene};
use pcd::decomposition::{CellId, CellStatus, SplitStep, SplitTree};
use pcd::geometry::{Aabb, Configuration, Polyline};
use pcd::graph::{find_cell_path, ConnectivityGraph};
use pcd::io::{load_scene_file, SceneFile};
use pcd::planner::{plan, PlanStatus, PlannerConfig};
use pcd::rng::SampleRng;
use pcd::svg::render_svg;
use pcd::trace::PlanTrace;

type Outcome = Result<String, String>;

const FEASIBLE: [&str; 6] = ["empty", "wall-gap", "narrow-passage", "u-trap", "box-maze", "disk"];
const BUDGETS: [u64; 4] = [10, 100, 1000, 10_000];
const SEEDS: u64 = 50;
/// Blocked-wall refinement grows superlinearly with k, so the infeasible
/// control stops at 500 iterations.
const BLOCKED_BUDGETS: [u64; 3] = [10, 100, 500];
const BLOCKED_AUDIT_BUDGET: u64 = 100;

fn corpus(name: &str) -> SceneFile {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.json"));
    load_scene_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn query(file: &SceneFile) -> Query {
    Query {
        scene: file.scene.clone(),
        start: file.start.clone().expect("corpus scenes have a start"),
        goal: file.goal.clone().expect("corpus scenes have a goal"),
    }
}

fn cfg(seed: u64, budget: u64) -> PlannerConfig {
    PlannerConfig {
        seed,
        max_iterations: budget,
        ..PlannerConfig::default()
    }
}

fn criterion_1() -> Outcome {
    let f = corpus("empty");
    let q = query(&f);
    let t = Instant::now();
    let r = plan(&q.scene, &q.start, &q.goal, &PlannerConfig::default()).map_err(|e| e.to_string())?;
    let ms = t.elapsed().as_secs_f64() * 1e3;
    let expected = Polyline::new(vec![q.start.clone(), q.goal.clone()]).unwrap();
    let path_ok = matches!(&r.status, PlanStatus::Solved(p) if *p == expected);
    let detail = format!("k={}, splits={}, {:.3} ms", r.iterations, r.counts.splits, ms);
    if r.iterations == 1 && r.counts.splits == 0 && path_ok && ms < 10.0 {
        Ok(detail)
    } else {
        Err(format!("{detail}, path {:?}", r.path()))
    }
}

fn criterion_2() -> Outcome {
    let queries: Vec<Query> = FEASIBLE.iter().map(|n| query(&corpus(n))).collect();
    let t = Instant::now();
    let curves = run_success_experiment(&queries, &BUDGETS, SEEDS, 0, PlannerConfig::default().resolution)
        .map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for c in &curves {
        let worst = c.runs.iter().filter_map(|r| r.k_solve).max().unwrap_or(0);
        summary.push(format!("{} max k {worst}", c.scene));
        if *c.rates.last().unwrap() != 1.0 {
            problems.push(format!("{} solved {:.2} at 10000", c.scene, c.rates.last().unwrap()));
        }
        if !c.is_non_decreasing() {
            problems.push(format!("{} rates {:?} decrease", c.scene, c.rates));
        }
    }
    if secs >= 300.0 {
        problems.push(format!("took {secs:.1} s"));
    }
    let detail = format!("{} scenes x {SEEDS} seeds in {secs:.2} s; {}", curves.len(), summary.join(", "));
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", problems.join("; ")))
    }
}

fn criterion_3() -> Outcome {
    let q = query(&corpus("blocked-wall"));
    let t = Instant::now();
    let curves = run_success_experiment(&[q], &BLOCKED_BUDGETS, SEEDS, 0, PlannerConfig::default().resolution)
        .map_err(|e| e.to_string())?;
    let c = &curves[0];
    let detail = format!(
        "rates {:?} at budgets {:?} over {SEEDS} seeds, {:.1} s",
        c.rates,
        c.budgets,
        t.elapsed().as_secs_f64()
    );
    if c.rates.iter().all(|&r| r == 0.0) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct AuditedRun {
    scene: String,
    seed: u64,
    boxes_only: bool,
    report: AuditReport,
}

/// Traced runs the audits cover: every feasible scene over all seeds with
/// the full budget, the blocked wall at a small budget, and the stored
/// check-path variant on the box scenes.
fn audited_runs() -> Result<Vec<AuditedRun>, String> {
    let mut out = Vec::new();
    let mut run = |file: &SceneFile, config: PlannerConfig| -> Result<(), String> {
        let q = query(file);
        let r = plan(&q.scene, &q.start, &q.goal, &config).map_err(|e| e.to_string())?;
        let trace = r.trace.as_ref().expect("plan records a trace");
        let report = audit_trace(trace, &q.scene, file.reference_path.as_ref())
            .map_err(|e| format!("{} seed {}: {e}", q.scene.name, config.seed))?;
        out.push(AuditedRun {
            scene: q.scene.name.clone(),
            seed: config.seed,
            boxes_only: q.scene.is_box_only(),
            report,
        });
        Ok(())
    };
    for name in FEASIBLE {
        let f = corpus(name);
        for seed in 0..SEEDS {
            run(&f, cfg(seed, 10_000))?;
            if f.scene.is_box_only() && seed < 10 {
                run(
                    &f,
                    PlannerConfig {
                        store_checkpath_samples: true,
                        ..cfg(seed, 10_000)
                    },
                )?;
            }
        }
    }
    let blocked = corpus("blocked-wall");
    for seed in 0..SEEDS {
        run(&blocked, cfg(seed, BLOCKED_AUDIT_BUDGET))?;
    }
    Ok(out)
}

fn summarize<'a>(
    runs: impl Iterator<Item = &'a AuditedRun>,
    pick: impl Fn(&AuditReport) -> Option<&CheckOutcome>,
) -> Outcome {
    let (mut traces, mut checked, mut bad) = (0, 0, Vec::new());
    for r in runs {
        if let Some(o) = pick(&r.report) {
            traces += 1;
            checked += o.checked;
            for v in &o.violations {
                bad.push(format!("{} seed {} record {}: {}", r.scene, r.seed, v.record, v.message));
            }
        }
    }
    let detail = format!("{traces} traces, {checked} checks, {} violations", bad.len());
    if bad.is_empty() {
        Ok(detail)
    } else {
        bad.truncate(3);
        Err(format!("{detail}; first: {}", bad.join(" | ")))
    }
}

fn criterion_4(runs: &[AuditedRun]) -> Outcome {
    let boxes = || runs.iter().filter(|r| r.boxes_only);
    let a = summarize(boxes(), |r| Some(&r.split_bound));
    let b = summarize(boxes(), |r| Some(&r.inner_loop));
    match (a, b) {
        (Ok(a), Ok(b)) => Ok(format!("split bound: {a}; inner loop: {b}")),
        (a, b) => Err(format!("split bound: {}; inner loop: {}", a.unwrap_or_else(|e| e), b.unwrap_or_else(|e| e))),
    }
}

fn criterion_5(runs: &[AuditedRun]) -> Outcome {
    summarize(runs.iter(), |r| Some(&r.cleared_regions))
}

fn criterion_6(runs: &[AuditedRun]) -> Outcome {
    summarize(runs.iter(), |r| r.sampling_coverage.as_ref())
}

fn random_polyline_through(rng: &mut SampleRng, n: usize, through: &Configuration) -> Polyline {
    let segments = 1 + (rng.unit_open() * 3.0) as usize;
    let anchor = (rng.unit_open() * (segments + 1) as f64) as usize;
    let pts = (0..=segments)
        .map(|i| {
            if i == anchor {
                through.clone()
            } else {
                rng.uniform_in(&Aabb::unit(n))
            }
        })
        .collect();
    Polyline::new(pts).expect("random points are distinct")
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let mut rng = SampleRng::new(7);
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    for instance in 0..100u64 {
        let n = 2 + (instance % 2) as usize;
        let eps = 0.02 + 0.28 * rng.unit_open();
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for _ in 0..n {
            // Some widths fall below eps so narrow axes get exercised.
            let w = if rng.unit_open() < 0.3 { eps * rng.unit_open() } else { 0.05 + 0.95 * rng.unit_open() };
            let l = (1.0 - w) * rng.unit_open();
            lo.push(l);
            hi.push((l + w).min(1.0));
        }
        let cell = Aabb::from_bounds(lo, hi).unwrap();
        let through = rng.uniform_in(&cell);
        let path = random_polyline_through(&mut rng, n, &through);
        let check = verify_sampling_bound(&cell, &path, eps, 100_000, 1000 + instance).map_err(|e| e.to_string())?;
        min_margin = min_margin.min(check.rate - check.bound);
        if !check.passed {
            failures.push(format!("instance {instance}: {check:?}"));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let detail = format!("100 instances, min rate - bound {min_margin:.4}, {secs:.1} s");
    if failures.is_empty() && secs < 120.0 {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join(" | ")))
    }
}

/// Random samples with random labels, split as the planner would.
fn random_tree(rng: &mut SampleRng, n: usize, samples: usize) -> SplitTree {
    let mut tree = SplitTree::new(vec![rng.uniform_in(&Aabb::unit(n))]).unwrap();
    for _ in 0..samples {
        let p = rng.uniform_in(&Aabb::unit(n));
        let id = tree.locate(&p);
        tree.add_sample(id, p, rng.unit_open() < 0.5).unwrap();
        tree.split_mixed_cells().unwrap();
    }
    tree
}

fn criterion_8() -> Outcome {
    let mut rng = SampleRng::new(8);
    let mut worst = 0.0f64;
    for run in 0..1000 {
        let n = 1 + run % 3;
        let samples = 5 + (rng.unit_open() * 60.0) as usize;
        let tree = random_tree(&mut rng, n, samples);
        let leaves: Vec<_> = tree.leaves().collect();
        let total: f64 = leaves.iter().map(|c| c.bbox.measure()).sum();
        worst = worst.max((total - 1.0).abs());
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("run {run}: leaf measures sum to {total}"));
        }
        for (i, a) in leaves.iter().enumerate() {
            for b in &leaves[i + 1..] {
                if a.bbox.interiors_intersect(&b.bbox) {
                    return Err(format!("run {run}: leaves {} and {} overlap", a.id, b.id));
                }
            }
            for s in a.free.iter().chain(&a.colliding) {
                if !a.bbox.contains(&s.q) {
                    return Err(format!("run {run}: sample outside leaf {}", a.id));
                }
            }
        }
        for _ in 0..50 {
            let p = rng.uniform_in(&Aabb::unit(n));
            let id = tree.locate(&p);
            let cell = tree.cell(id).unwrap();
            if !cell.is_leaf() || !cell.bbox.contains(&p) {
                return Err(format!("run {run}: locate returned {id} not holding {:?}", p.coords()));
            }
        }
    }
    Ok(format!("1000 sequences, max |sum - 1| = {worst:.2e}"))
}

fn bfs_reachable(tree: &SplitTree, graph: &ConnectivityGraph, from: CellId, to: CellId) -> bool {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        if c == to {
            return true;
        }
        for n in graph.neighbors(tree, c) {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    false
}

fn criterion_9() -> Outcome {
    let mut rng = SampleRng::new(9);
    let mut compared = 0;
    for run in 0..200 {
        let n = 2 + run % 2;
        let mut tree = SplitTree::new(vec![rng.uniform_in(&Aabb::unit(n))]).unwrap();
        let mut graph = ConnectivityGraph::rebuild(&tree);
        for _ in 0..40 {
            let p = rng.uniform_in(&Aabb::unit(n));
            let id = tree.locate(&p);
            tree.add_sample(id, p, rng.unit_open() < 0.5).unwrap();
            while let Some(step) = tree.split_next_mixed().map_err(|e| e.to_string())? {
                if let SplitStep::Split(r) = step {
                    graph.apply_split(&tree, r.cell, r.lower, r.upper);
                    let fresh = ConnectivityGraph::rebuild(&tree);
                    let nodes = |g: &ConnectivityGraph| g.nodes(&tree).collect::<Vec<_>>();
                    if nodes(&graph) != nodes(&fresh) || graph.edges(&tree) != fresh.edges(&tree) {
                        return Err(format!("run {run}: incremental graph diverges after splitting {}", r.cell));
                    }
                    compared += 1;
                }
            }
        }
    }
    let (mut reachable, mut unreachable) = (0, 0);
    for run in 0..1000 {
        let n = 2 + run % 2;
        let samples = 10 + (rng.unit_open() * 50.0) as usize;
        let tree = random_tree(&mut rng, n, samples);
        let graph = ConnectivityGraph::rebuild(&tree);
        let (s, g) = (rng.uniform_in(&Aabb::unit(n)), rng.uniform_in(&Aabb::unit(n)));
        let (cs, cg) = (tree.locate(&s), tree.locate(&g));
        let free = |c| tree.cell(c).unwrap().status == CellStatus::PossiblyFree;
        let expect = free(cs) && free(cg) && bfs_reachable(&tree, &graph, cs, cg);
        let found = find_cell_path(&tree, &graph, &s, &g);
        if found.is_some() != expect {
            return Err(format!("random graph {run}: A* found {} but BFS says {expect}", found.is_some()));
        }
        if let Some(p) = found {
            let linked = p.cells.windows(2).all(|w| graph.neighbors(&tree, w[0]).any(|x| x == w[1]));
            if p.cells[0] != cs || *p.cells.last().unwrap() != cg || !linked {
                return Err(format!("random graph {run}: path {:?} is not a channel", p.cells));
            }
        }
        if expect {
            reachable += 1;
        } else {
            unreachable += 1;
        }
    }
    Ok(format!(
        "{compared} incremental updates matched; 1000 graphs ({reachable} reachable, {unreachable} not) agree with BFS"
    ))
}

fn random_box_scene(rng: &mut SampleRng, n: usize) -> Scene {
    let obstacles = (0..3)
        .map(|_| {
            let c = rng.uniform_in(&Aabb::unit(n));
            let lo: Vec<f64> = c.coords().iter().map(|&x| (x - 0.1 * rng.unit_open()).max(0.0)).collect();
            let hi: Vec<f64> = c.coords().iter().map(|&x| (x + 0.1 * rng.unit_open()).min(1.0)).collect();
            Obstacle::from_box(Aabb::from_bounds(lo, hi).unwrap())
        })
        .collect();
    Scene::new("random", n, obstacles).unwrap()
}

fn criterion_10() -> Outcome {
    let mut rng = SampleRng::new(10);
    let mut done = 0;
    let mut attempts = 0;
    let mut over = Vec::new();
    while done < 50 {
        attempts += 1;
        if attempts > 100_000 {
            return Err(format!("only {done} usable random paths generated"));
        }
        let n = 2 + done % 2;
        let scene = random_box_scene(&mut rng, n);
        let through = rng.uniform_in(&Aabb::unit(n));
        let path = random_polyline_through(&mut rng, n, &through);
        let clearance = match tunnel_clearance(&scene, &path, 0.002) {
            Ok(c) if c > 0.02 => c,
            _ => continue,
        };
        let eps = clearance * (0.3 + 0.6 * rng.unit_open());
        let delta = eps / 4.0;
        let m = manhattanize(&scene, &path, eps, delta).map_err(|e| format!("path {done}: {e}"))?;
        let axis_parallel = m
            .path
            .segments()
            .all(|(a, b)| (0..n).filter(|&i| a[i] != b[i]).count() == 1);
        if !axis_parallel {
            return Err(format!("path {done}: output is not axis-parallel"));
        }
        if m.path.start() != path.start() || m.path.end() != path.end() {
            return Err(format!("path {done}: endpoints moved"));
        }
        for (a, b) in m.path.segments() {
            if scene.check_segment(a, b, delta).map_err(|e| e.to_string())?.collider.is_some() {
                return Err(format!("path {done}: axis-parallel path collides"));
            }
        }
        let balls = m.centers.len() as f64;
        let ratio = path.length() / eps;
        if balls > ratio.ceil() + 1.0 {
            return Err(format!("path {done}: {balls} balls exceed ceil(L/eps) + 1"));
        }
        if balls > ratio + 1.0 {
            over.push(format!("path {done}: {balls} balls, L/eps + 1 = {:.3}", ratio + 1.0));
        }
        let cover = finite_covering(&m, eps).map_err(|e| e.to_string())?;
        let cover_bound = 2.0 + m.corners() as f64 + m.path.length() / eps;
        if cover.count() as f64 >= cover_bound {
            return Err(format!("path {done}: covering uses {} balls, bound {cover_bound:.3}", cover.count()));
        }
        if !cover.covers(&m.path, 2000.0) {
            return Err(format!("path {done}: dense probes escape the covering"));
        }
        done += 1;
    }
    let detail = format!(
        "50 paths; axis-parallel, endpoints, collision, covering and ceil(L/eps) + 1 checks hold; {} exceed L/eps + 1",
        over.len()
    );
    if over.is_empty() {
        Ok(detail)
    } else {
        over.truncate(3);
        Err(format!("{detail}; first: {}", over.join(" | ")))
    }
}

fn criterion_11() -> Outcome {
    let mut compared = 0;
    for name in ["wall-gap", "u-trap", "box-maze", "disk"] {
        let f = corpus(name);
        let q = query(&f);
        for seed in [0, 1, 42] {
            let render = || -> Result<(String, String), String> {
                let r = plan(&q.scene, &q.start, &q.goal, &cfg(seed, 10_000)).map_err(|e| e.to_string())?;
                let trace = r.trace.as_ref().unwrap().to_jsonl();
                let svg = render_svg(&r.tree, &q.scene, r.path()).map_err(|e| e.to_string())?;
                Ok((trace, svg))
            };
            let (first, second) = (render()?, render()?);
            if first != second {
                return Err(format!("{name} seed {seed}: outputs differ between runs"));
            }
            if PlanTrace::from_jsonl(&first.0).map_err(|e| e.to_string())?.to_jsonl() != first.0 {
                return Err(format!("{name} seed {seed}: trace does not round-trip"));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} run pairs byte-identical"))
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id, name, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let outcome = f();
        let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
        let detail = outcome.as_ref().unwrap_or_else(|e| e);
        println!("criterion {id:>2} [{verdict}] {name}: {detail} ({:.1} s)", t.elapsed().as_secs_f64());
        results.push((id, name, outcome));
    };
    record(1, "trivial solve", &criterion_1);
    record(2, "feasible scenes solve", &criterion_2);
    record(3, "infeasible control", &criterion_3);
    let runs = audited_runs();
    let with_runs = |f: fn(&[AuditedRun]) -> Outcome| {
        let runs = &runs;
        move || runs.as_ref().map_err(Clone::clone).and_then(|r| f(r))
    };
    record(4, "split-count audit", &with_runs(criterion_4));
    record(5, "cleared-region audit", &with_runs(criterion_5));
    record(6, "sampling-coverage audit", &with_runs(criterion_6));
    record(7, "tunnel sampling bound", &criterion_7);
    record(8, "partition fuzz", &criterion_8);
    record(9, "graph oracles", &criterion_9);
    record(10, "manhattan and covering", &criterion_10);
    record(11, "determinism", &criterion_11);
    let failed: Vec<_> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
