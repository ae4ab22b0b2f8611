use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcd::analysis::{self, Query};
use pcd::error::{Error, Result};
use pcd::geometry::{Configuration, Polyline};
use pcd::io::{self, ResultFile, SceneFile};
use pcd::planner::{plan, plan_untraced, PlannerConfig, DEFAULT_MAX_ITERATIONS};
use pcd::svg::render_svg;
use pcd::trace::{replay, PlanTrace};

#[derive(Parser)]
#[command(name = "pcd", version, about = "Probabilistic cell decomposition planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one query and print the result as JSON.
    Plan(PlanArgs),
    /// Run seeded trials over scenes and write a bench CSV.
    Bench(BenchArgs),
    /// Replay a trace and audit the split, inner-loop, cleared-region and sampling checks.
    Audit(AuditArgs),
    /// Path constructions and clearance.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Replay a trace and draw the final decomposition.
    Render(RenderArgs),
}

#[derive(Args)]
struct PlanArgs {
    scene: PathBuf,
    /// Comma-separated coordinates; defaults to the scene's start.
    #[arg(long, value_delimiter = ',')]
    start: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    goal: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    budget: u64,
    #[arg(long, default_value_t = PlannerConfig::default().resolution)]
    resolution: f64,
    #[arg(long)]
    store_checkpath_samples: bool,
    /// Write the JSON-lines trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write an SVG of the final decomposition here (2-D only).
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Scene files or directories of scene files.
    #[arg(required = true)]
    corpus: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
    budgets: Vec<u64>,
    #[arg(long, default_value_t = 50)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = PlannerConfig::default().resolution)]
    resolution: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    trace: PathBuf,
    scene: PathBuf,
    /// Polyline file; defaults to the scene's reference path.
    #[arg(long)]
    reference_path: Option<PathBuf>,
}

#[derive(Args)]
struct PathArgs {
    scene: PathBuf,
    /// Polyline file; defaults to the scene's reference path.
    #[arg(long)]
    path: Option<PathBuf>,
    #[arg(long, default_value_t = PlannerConfig::default().resolution)]
    resolution: f64,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Convert a path into an axis-parallel path through chained ε-balls.
    Manhattanize {
        #[command(flatten)]
        args: PathArgs,
        #[arg(long)]
        eps: f64,
    },
    /// Manhattanize, then cover the result with ε-balls.
    Covering {
        #[command(flatten)]
        args: PathArgs,
        #[arg(long)]
        eps: f64,
    },
    /// Minimum clearance along a path.
    Clearance {
        #[command(flatten)]
        args: PathArgs,
    },
}

#[derive(Args)]
struct RenderArgs {
    trace: PathBuf,
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn point(coords: Option<Vec<f64>>, fallback: Option<Configuration>, what: &str) -> Result<Configuration> {
    match coords {
        Some(c) => Configuration::new(c),
        None => fallback.ok_or_else(|| Error::InvalidArgument(format!("no {what} given and the scene has none"))),
    }
}

fn reference(file: &SceneFile, path: Option<&Path>) -> Result<Option<Polyline>> {
    match path {
        Some(p) => Ok(Some(io::load_polyline(&fs::read_to_string(p)?)?)),
        None => Ok(file.reference_path.clone()),
    }
}

fn required_path(file: &SceneFile, path: Option<&Path>) -> Result<Polyline> {
    reference(file, path)?
        .ok_or_else(|| Error::InvalidArgument("no --path given and the scene has no reference path".into()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

fn scene_files(corpus: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in corpus {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|f| f.extension().is_some_and(|e| e == "json"));
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn run_plan(a: PlanArgs) -> Result<bool> {
    let file = io::load_scene_file(&a.scene)?;
    let start = point(a.start, file.start.clone(), "start")?;
    let goal = point(a.goal, file.goal.clone(), "goal")?;
    let config = PlannerConfig {
        resolution: a.resolution,
        max_iterations: a.budget,
        seed: a.seed,
        store_checkpath_samples: a.store_checkpath_samples,
    };
    let result = if a.trace.is_some() {
        plan(&file.scene, &start, &goal, &config)?
    } else {
        plan_untraced(&file.scene, &start, &goal, &config)?
    };
    if let (Some(p), Some(t)) = (&a.trace, &result.trace) {
        fs::write(p, t.to_jsonl())?;
    }
    if let Some(p) = &a.svg {
        fs::write(p, render_svg(&result.tree, &file.scene, result.path())?)?;
    }
    emit(&json(&ResultFile::new(&file.scene, &config, &result)), a.out.as_deref())?;
    Ok(result.is_solved())
}

fn run_bench(a: BenchArgs) -> Result<bool> {
    let mut queries = Vec::new();
    for f in scene_files(&a.corpus)? {
        let file = io::load_scene_file(&f)?;
        let missing = || Error::InvalidArgument(format!("{}: scene has no start/goal", f.display()));
        queries.push(Query {
            start: file.start.clone().ok_or_else(missing)?,
            goal: file.goal.clone().ok_or_else(missing)?,
            scene: file.scene,
        });
    }
    let curves = analysis::run_success_experiment(&queries, &a.budgets, a.trials, a.seed, a.resolution)?;
    let rows: Vec<_> = curves.iter().flat_map(|c| c.bench_rows()).collect();
    match &a.out {
        Some(p) => io::write_bench_csv(fs::File::create(p)?, &rows)?,
        None => io::write_bench_csv(std::io::stdout().lock(), &rows)?,
    }
    for c in &curves {
        let rates: Vec<String> = c.rates.iter().map(|r| format!("{r:.3}")).collect();
        eprintln!("{}: success {} at budgets {:?}", c.scene, rates.join(" "), c.budgets);
    }
    Ok(true)
}

fn run_audit(a: AuditArgs) -> Result<bool> {
    let file = io::load_scene_file(&a.scene)?;
    let trace = PlanTrace::from_jsonl(&fs::read_to_string(&a.trace)?)?;
    let reference = reference(&file, a.reference_path.as_deref())?;
    let report = analysis::audit_trace(&trace, &file.scene, reference.as_ref())?;
    println!("{}", json(&report));
    Ok(report.passed())
}

fn run_analyze(c: AnalyzeCommand) -> Result<bool> {
    match c {
        AnalyzeCommand::Manhattanize { args, eps } => {
            let file = io::load_scene_file(&args.scene)?;
            let path = required_path(&file, args.path.as_deref())?;
            let m = analysis::manhattanize(&file.scene, &path, eps, args.resolution)?;
            let bound = path.length() / eps + 1.0;
            println!(
                "{}",
                json(&serde_json::json!({
                    "eps": eps,
                    "resolution": args.resolution,
                    "length": path.length(),
                    "balls": m.centers.len(),
                    "ball_bound": bound,
                    "corners": m.corners(),
                    "waypoints": m.path.waypoints().iter().map(|q| q.coords()).collect::<Vec<_>>(),
                }))
            );
            Ok(true)
        }
        AnalyzeCommand::Covering { args, eps } => {
            let file = io::load_scene_file(&args.scene)?;
            let path = required_path(&file, args.path.as_deref())?;
            let m = analysis::manhattanize(&file.scene, &path, eps, args.resolution)?;
            let cover = analysis::finite_covering(&m, eps)?;
            let bound = 2.0 + m.corners() as f64 + m.path.length() / eps;
            let covered = cover.covers(&m.path, 2000.0);
            println!(
                "{}",
                json(&serde_json::json!({
                    "eps": eps,
                    "resolution": args.resolution,
                    "balls": cover.count(),
                    "corners": m.corners(),
                    "bound": bound,
                    "covered": covered,
                    "centers": cover.centers.iter().map(|q| q.coords()).collect::<Vec<_>>(),
                }))
            );
            Ok(covered && (cover.count() as f64) < bound)
        }
        AnalyzeCommand::Clearance { args } => {
            let file = io::load_scene_file(&args.scene)?;
            let path = required_path(&file, args.path.as_deref())?;
            let clearance = analysis::tunnel_clearance(&file.scene, &path, args.resolution)?;
            println!(
                "{}",
                json(&serde_json::json!({
                    "resolution": args.resolution,
                    "clearance": clearance,
                    "clearing_radius": clearance / 5.0,
                }))
            );
            Ok(true)
        }
    }
}

fn run_render(a: RenderArgs) -> Result<bool> {
    let file = io::load_scene_file(&a.scene)?;
    let trace = PlanTrace::from_jsonl(&fs::read_to_string(&a.trace)?)?;
    let tree = replay(&trace, &file.scene)?;
    let path = trace
        .result()
        .and_then(|r| r.path.clone())
        .map(|pts| pts.into_iter().map(Configuration::new).collect::<Result<Vec<_>>>())
        .transpose()?
        .map(Polyline::new)
        .transpose()?;
    fs::write(&a.out, render_svg(&tree, &file.scene, path.as_ref())?)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Plan(a) => run_plan(a),
        Command::Bench(a) => run_bench(a),
        Command::Audit(a) => run_audit(a),
        Command::Analyze(c) => run_analyze(c),
        Command::Render(a) => run_render(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
