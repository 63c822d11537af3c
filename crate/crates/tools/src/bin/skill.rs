//! `skill`: generate demonstration datasets, inject rules into reference
//! paths, simulate, estimate rules back and score predictions.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use skill_core::dynamics::simulate;
use skill_core::geometry::{make_reference_path, WorkpieceKind};
use skill_core::segmentation::segment_path;
use skill_core::{apply_rules, estimate_rules, RawPath, RuleSet, Segmentation};
use skill_tools::config::{parse_geometry, RunConfig};
use skill_tools::dataset::{self, Split};
use skill_tools::eval::{self, Prediction};
use skill_tools::{formats, svg};

#[derive(Parser)]
#[command(name = "skill", version, about = "Rule-based skill injection for surface-following paths")]
struct Cli {
    /// JSON run configuration; flags override its values [default: built-in defaults]
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Do not echo the resolved configuration to stderr [default: off]
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic demonstration dataset
    Gen(GenArgs),
    /// Execute a target profile CSV and write the trajectory CSV
    Simulate(SimulateArgs),
    /// Label a reference path straight/corner and write the labels CSV
    Segment(SegmentArgs),
    /// Segment a path, apply rules, simulate, and write the trajectory CSV
    Inject(InjectArgs),
    /// Recover rules from a trajectory, or from every sample of a dataset
    Estimate(EstimateArgs),
    /// Score rule predictions against a dataset's ground truth
    Eval(EvalArgs),
    /// Draw a predicted-vs-true scatter SVG from an eval scatter CSV
    Scatter(ScatterArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Workpiece family: l_shape or window [default: l_shape]
    #[arg(long, value_parser = parse_geometry)]
    geometry: Option<WorkpieceKind>,
    /// Number of samples [default: 100]
    #[arg(long)]
    n: Option<usize>,
    /// Base seed; sample i uses seed ^ i [default: 42]
    #[arg(long, env = "SKILL_SEED")]
    seed: Option<u64>,
    /// Train,val,test fractions [default: 0.8,0.1,0.1]
    #[arg(long, value_parser = parse_split)]
    split: Option<[f64; 3]>,
    /// Point-cloud size per sample [default: 1024]
    #[arg(long)]
    cloud_points: Option<usize>,
    /// Activate exactly one rule kind per sample [default: off]
    #[arg(long)]
    single_rule: bool,
    /// Worker threads, 0 = one per logical CPU
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory [required]
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    /// Integration step, s [default: 0.002]
    #[arg(long)]
    dt: Option<f64>,
    /// Nominal path speed, m/s [default: 1.0]
    #[arg(long)]
    speed: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Target profile CSV (x,y,z,qw,qx,qy,qz,speed,part_id,class,tx,ty,tz) [required]
    #[arg(long)]
    profile: PathBuf,
    /// Trajectory CSV to write [required]
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Args)]
struct PathSource {
    /// Reference path CSV (x,y,z,roll,pitch,yaw,part_id) [required unless --geometry]
    #[arg(long, conflicts_with = "geometry", required_unless_present = "geometry")]
    path: Option<PathBuf>,
    /// Build the reference path of a canonical workpiece instead: l_shape or window [required unless --path]
    #[arg(long, value_parser = parse_geometry)]
    geometry: Option<WorkpieceKind>,
    /// Pose the workpiece as dataset sample seed SEED does [default: canonical pose]
    #[arg(long, requires = "geometry")]
    pose_seed: Option<u64>,
    /// Also write the reference path CSV here [default: not written]
    #[arg(long)]
    write_path: Option<PathBuf>,
}

#[derive(Args)]
struct SegArgs {
    /// Odd sliding-window width in waypoints [default: 9]
    #[arg(long)]
    window: Option<usize>,
    /// RMS residual (m) at or below which a window is straight [default: 1e-4]
    #[arg(long)]
    threshold: Option<f64>,
    /// Shortest run kept as its own segment [default: 3]
    #[arg(long)]
    min_len: Option<usize>,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    source: PathSource,
    #[command(flatten)]
    seg: SegArgs,
    /// Labels CSV to write (index,part_id,class) [required]
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InjectArgs {
    #[command(flatten)]
    source: PathSource,
    #[command(flatten)]
    seg: SegArgs,
    #[command(flatten)]
    sim: SimArgs,
    /// Rules JSON array of {kind, target_class, param} [required]
    #[arg(long)]
    rules: PathBuf,
    /// Trajectory CSV to write [required]
    #[arg(long)]
    out: PathBuf,
    /// Also write the target profile CSV here [default: not written]
    #[arg(long)]
    profile_out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Trajectory CSV (t,px,py,pz,qw,qx,qy,qz,v), with --path or --geometry [required unless --dataset]
    #[arg(long, conflicts_with = "dataset", requires = "path_or_geometry")]
    trajectory: Option<PathBuf>,
    #[command(flatten)]
    source: Option<EstimateSource>,
    #[command(flatten)]
    seg: SegArgs,
    /// Nominal path speed, m/s [default: 1.0]
    #[arg(long)]
    speed: Option<f64>,
    /// Dataset directory; writes oracle predictions for its samples [required unless --trajectory]
    #[arg(long, required_unless_present = "trajectory")]
    dataset: Option<PathBuf>,
    /// Restrict dataset estimation to one split: train, val or test [default: all]
    #[arg(long, requires = "dataset")]
    split: Option<Split>,
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "path_or_geometry", multiple = true)]
struct EstimateSource {
    /// Reference path CSV (x,y,z,roll,pitch,yaw,part_id) [default: none, use --geometry]
    #[arg(long, conflicts_with = "geometry")]
    path: Option<PathBuf>,
    /// Canonical workpiece whose reference path was executed: l_shape or window [default: none, use --path]
    #[arg(long, value_parser = parse_geometry)]
    geometry: Option<WorkpieceKind>,
    /// Pose seed used with --geometry [default: canonical pose]
    #[arg(long, requires = "geometry")]
    pose_seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions JSON lines: {"id", "rules": [{"kind", "class", "param"}]} [required]
    #[arg(long)]
    predictions: PathBuf,
    /// Dataset directory holding manifest.jsonl [required]
    #[arg(long)]
    dataset: PathBuf,
    /// Split to score: train, val or test [default: all]
    #[arg(long)]
    split: Option<Split>,
    /// Report JSON to write [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scatter CSV to write (kind,geometry,class,truth,prediction) [default: not written]
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Args)]
struct ScatterArgs {
    /// Scatter CSV produced by `eval --scatter` [required]
    #[arg(long)]
    input: PathBuf,
    /// SVG file to write [required]
    #[arg(long)]
    out: PathBuf,
}

fn parse_split(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected three comma-separated fractions, got {}", p.len()))
}

fn echo(cfg: &RunConfig, quiet: bool) {
    if !quiet {
        eprintln!("resolved config:\n{}", cfg.to_json());
    }
}

fn apply_sim(cfg: &mut RunConfig, a: &SimArgs) {
    if let Some(dt) = a.dt {
        cfg.sim.dt = dt;
    }
    if let Some(v) = a.speed {
        cfg.path.nominal_speed = v;
    }
}

fn apply_seg(cfg: &mut RunConfig, a: &SegArgs) {
    if let Some(w) = a.window {
        cfg.segment.window = w;
    }
    if let Some(t) = a.threshold {
        cfg.segment.residual_threshold = t;
    }
    if let Some(m) = a.min_len {
        cfg.segment.min_len = m;
    }
}

fn reference_path(
    cfg: &RunConfig,
    path: Option<&Path>,
    geometry: Option<WorkpieceKind>,
    pose_seed: Option<u64>,
) -> Result<(RawPath, Segmentation)> {
    match (path, geometry) {
        (Some(p), _) => {
            let path = formats::load_path(p, cfg.path.nominal_speed)?;
            let seg = segment_path(&path, &cfg.segment)?;
            Ok((path, seg))
        }
        (None, Some(kind)) => match pose_seed {
            Some(seed) => {
                let (_, path, seg) = dataset::reference_for_seed(cfg, kind, seed)?;
                Ok((path, seg))
            }
            None => {
                let path = make_reference_path(&cfg.workpieces.build(kind)?, &cfg.path)?;
                let seg = segment_path(&path, &cfg.segment)?;
                Ok((path, seg))
            }
        },
        (None, None) => bail!("either --path or --geometry is required"),
    }
}

fn resolve_source(cfg: &RunConfig, src: &PathSource) -> Result<(RawPath, Segmentation)> {
    let (path, seg) = reference_path(cfg, src.path.as_deref(), src.geometry, src.pose_seed)?;
    if let Some(out) = &src.write_path {
        formats::save_path(out, &path)?;
    }
    Ok((path, seg))
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_gen(mut cfg: RunConfig, a: GenArgs, quiet: bool) -> Result<()> {
    let ds = &mut cfg.dataset;
    if let Some(g) = a.geometry {
        ds.geometry = g;
    }
    if let Some(n) = a.n {
        ds.n = n;
    }
    if let Some(s) = a.seed {
        ds.seed = s;
    }
    if let Some(s) = a.split {
        ds.split = s;
    }
    if let Some(k) = a.cloud_points {
        ds.cloud_points = k;
    }
    ds.single_rule |= a.single_rule;
    cfg.validate()?;
    echo(&cfg, quiet);
    let entries = dataset::generate_dataset(&cfg, &a.out, a.workers)?;
    let [train, val, test] = dataset::split_summary(&entries);
    println!(
        "wrote {} {} samples to {}: train {train}, val {val}, test {test}",
        entries.len(),
        cfg.dataset.geometry.as_str(),
        a.out.display()
    );
    Ok(())
}

fn cmd_simulate(mut cfg: RunConfig, a: SimulateArgs, quiet: bool) -> Result<()> {
    apply_sim(&mut cfg, &a.sim);
    echo(&cfg, quiet);
    let f = fs::File::open(&a.profile).with_context(|| format!("opening {}", a.profile.display()))?;
    let profile = formats::read_profile(BufReader::new(f), cfg.path.nominal_speed)?;
    let traj = simulate(&profile, &cfg.sim)?;
    formats::save_trajectory(&a.out, &traj)
}

fn cmd_segment(mut cfg: RunConfig, a: SegmentArgs, quiet: bool) -> Result<()> {
    apply_seg(&mut cfg, &a.seg);
    echo(&cfg, quiet);
    let (path, seg) = resolve_source(&cfg, &a.source)?;
    let f = io::BufWriter::new(fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    formats::write_labels(f, &path, &seg.labels)?;
    let corners = seg.labels.iter().filter(|&&c| c == skill_core::SegmentClass::Corner).count();
    println!("{} waypoints, {} segments, {corners} corner waypoints", path.len(), seg.segments.len());
    Ok(())
}

fn cmd_inject(mut cfg: RunConfig, a: InjectArgs, quiet: bool) -> Result<()> {
    apply_seg(&mut cfg, &a.seg);
    apply_sim(&mut cfg, &a.sim);
    echo(&cfg, quiet);
    let rules: RuleSet = formats::load_rules(&a.rules)?;
    let (path, seg) = resolve_source(&cfg, &a.source)?;
    let profile = apply_rules(&path, &seg, &rules, &cfg.profile)?;
    if let Some(p) = &a.profile_out {
        formats::write_profile(output(Some(p))?, &profile)?;
    }
    let traj = simulate(&profile, &cfg.sim)?;
    formats::save_trajectory(&a.out, &traj)
}

fn cmd_estimate(mut cfg: RunConfig, a: EstimateArgs, quiet: bool) -> Result<()> {
    if let Some(dir) = &a.dataset {
        // The dataset's own configuration defines its reference paths.
        let mut cfg = dataset::load_dataset_config(dir)?;
        apply_seg(&mut cfg, &a.seg);
        echo(&cfg, quiet);
        let entries = dataset::read_manifest(dir)?;
        let preds: Vec<Prediction> = eval::oracle_predictions(dir, &cfg, &entries, a.split)?;
        eval::write_predictions(output(a.out.as_deref())?, &preds)?;
        return Ok(());
    }
    apply_seg(&mut cfg, &a.seg);
    if let Some(v) = a.speed {
        cfg.path.nominal_speed = v;
    }
    echo(&cfg, quiet);
    let traj_path = a.trajectory.as_deref().expect("clap enforces --trajectory");
    let src = a.source.as_ref();
    let (path, seg) = reference_path(
        &cfg,
        src.and_then(|s| s.path.as_deref()),
        src.and_then(|s| s.geometry),
        src.and_then(|s| s.pose_seed),
    )?;
    let traj = formats::load_trajectory(traj_path)?;
    let est = estimate_rules(&traj, &path, &seg, &cfg.estimate)?;
    let mut w = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &est)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_eval(cfg: RunConfig, a: EvalArgs, quiet: bool) -> Result<()> {
    echo(&cfg, quiet);
    let f = fs::File::open(&a.predictions).with_context(|| format!("opening {}", a.predictions.display()))?;
    let preds = eval::read_predictions(BufReader::new(f))?;
    let entries = dataset::read_manifest(&a.dataset)?;
    let (summary, scatter) = eval::evaluate_predictions(&a.dataset, &entries, a.split, &preds)?;
    if let Some(p) = &a.scatter {
        eval::write_scatter_csv(output(Some(p))?, &scatter)?;
    }
    let mut w = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_scatter(a: ScatterArgs) -> Result<()> {
    let f = fs::File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let rows = eval::read_scatter_csv(f)?;
    fs::write(&a.out, svg::render_scatter(&rows)?).with_context(|| format!("writing {}", a.out.display()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load_or_default(cli.config.as_deref())?;
    let quiet = cli.quiet;
    match cli.command {
        Command::Gen(a) => cmd_gen(cfg, a, quiet),
        Command::Simulate(a) => cmd_simulate(cfg, a, quiet),
        Command::Segment(a) => cmd_segment(cfg, a, quiet),
        Command::Inject(a) => cmd_inject(cfg, a, quiet),
        Command::Estimate(a) => cmd_estimate(cfg, a, quiet),
        Command::Eval(a) => cmd_eval(cfg, a, quiet),
        Command::Scatter(a) => cmd_scatter(a),
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .any(|c| c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
