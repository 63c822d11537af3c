//! Synthetic demonstration datasets: per-sample generation, split
//! assignment, and the on-disk manifest and sample documents.
//!
//! Layout: `out/config.json`, `out/manifest.jsonl`, `out/samples/<id>.json`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use skill_core::dynamics::{simulate, Trajectory, TrajectorySample};
use skill_core::geometry::{make_reference_path, sample_point_cloud, PointCloud, Pose, WorkpieceKind};
use skill_core::math::{Quat, UnitQuat};
use skill_core::rules::{apply_rules, sample_ruleset, Rule, RuleSet, TargetProfile};
use skill_core::segmentation::{segment_path, Segmentation};
use skill_core::{Error as CoreError, RawPath, Workpiece};

use crate::config::RunConfig;

/// XOR mask applied to a sample seed when its simulation fails.
pub const RETRY_MASK: u64 = 0x9E37_79B9;
pub const MAX_RETRIES: u64 = 3;

const STREAM_POSE: u64 = 0;
const STREAM_RULES: u64 = 1;
const STREAM_CLOUD: u64 = 2;
const STREAM_SPLIT: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Split, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split `{s}` (expected train, val or test)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub split: Split,
    pub geometry: WorkpieceKind,
    pub seed: u64,
}

/// Column-major trajectory as stored in sample documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryColumns {
    pub t: Vec<f64>,
    pub p: Vec<[f64; 3]>,
    /// Scalar-first unit quaternions.
    pub q: Vec<[f64; 4]>,
    /// Speed.
    pub v: Vec<f64>,
    /// Linear velocity vectors.
    pub lin_vel: Vec<[f64; 3]>,
}

impl TrajectoryColumns {
    pub fn from_trajectory(traj: &Trajectory) -> Result<TrajectoryColumns> {
        let mut cols = TrajectoryColumns {
            t: Vec::with_capacity(traj.len()),
            p: Vec::with_capacity(traj.len()),
            q: Vec::with_capacity(traj.len()),
            v: Vec::with_capacity(traj.len()),
            lin_vel: Vec::with_capacity(traj.len()),
        };
        for (j, s) in traj.samples.iter().enumerate() {
            let vel = s.velocity.ok_or(CoreError::MissingVelocity { index: j })?;
            cols.t.push(s.t);
            cols.p.push(s.position.to_array());
            cols.q.push(s.orientation.to_array());
            cols.v.push(s.speed);
            cols.lin_vel.push(vel.to_array());
        }
        Ok(cols)
    }

    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let n = self.t.len();
        if [self.p.len(), self.q.len(), self.v.len(), self.lin_vel.len()]
            .iter()
            .any(|&l| l != n)
        {
            bail!("trajectory columns have unequal lengths");
        }
        let samples = (0..n)
            .map(|j| {
                let [w, x, y, z] = self.q[j];
                Ok(TrajectorySample {
                    t: self.t[j],
                    position: self.p[j].into(),
                    orientation: UnitQuat::from_stored(Quat::new(w, x, y, z))?,
                    speed: self.v[j],
                    velocity: Some(self.lin_vel[j].into()),
                })
            })
            .collect::<Result<_, CoreError>>()?;
        Ok(Trajectory { samples })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub geometry: WorkpieceKind,
    pub seed: u64,
    pub split: Split,
    pub point_cloud: Vec<[f64; 3]>,
    pub trajectory: TrajectoryColumns,
    /// One entry per rule kind; inactive rules target `none`.
    pub rules: Vec<Rule>,
}

impl SampleRecord {
    pub fn ruleset(&self) -> Result<RuleSet> {
        Ok(RuleSet::new(self.rules.clone())?)
    }
}

/// Everything derived from one sample seed.
#[derive(Clone, Debug)]
pub struct Demonstration {
    pub workpiece: Workpiece,
    pub path: RawPath,
    pub segmentation: Segmentation,
    pub rules: RuleSet,
    pub profile: TargetProfile,
    pub trajectory: Trajectory,
    pub cloud: PointCloud,
}

pub fn sample_seed(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Posed workpiece, reference path and its segmentation for `seed`. This is
/// what an estimator needs to re-derive the nominal motion of a sample.
pub fn reference_for_seed(cfg: &RunConfig, kind: WorkpieceKind, seed: u64) -> Result<(Workpiece, RawPath, Segmentation)> {
    let pose = Pose::random_perturbation(&mut stream(seed, STREAM_POSE));
    let workpiece = cfg.workpieces.build(kind)?.with_pose(pose);
    let path = make_reference_path(&workpiece, &cfg.path)?;
    let segmentation = segment_path(&path, &cfg.segment)?;
    Ok((workpiece, path, segmentation))
}

/// Runs the full pipeline for one seed without retries.
pub fn build_demonstration(cfg: &RunConfig, kind: WorkpieceKind, seed: u64) -> Result<Demonstration> {
    let (workpiece, path, segmentation) = reference_for_seed(cfg, kind, seed)?;
    let rules = sample_ruleset(&mut stream(seed, STREAM_RULES), cfg.dataset.single_rule).complete();
    let cloud = sample_point_cloud(&workpiece, cfg.dataset.cloud_points, &mut stream(seed, STREAM_CLOUD))?;
    let profile = apply_rules(&path, &segmentation, &rules, &cfg.profile)?;
    let trajectory = simulate(&profile, &cfg.sim)?;
    Ok(Demonstration {
        workpiece,
        path,
        segmentation,
        rules,
        profile,
        trajectory,
        cloud,
    })
}

fn is_retryable(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<CoreError>(),
        Some(CoreError::Divergence { .. } | CoreError::IncompleteTrajectory { .. })
    )
}

/// [`build_demonstration`] with up to [`MAX_RETRIES`] reseeded attempts on
/// simulation failure. Returns the seed that succeeded.
pub fn build_with_retries(cfg: &RunConfig, kind: WorkpieceKind, seed: u64) -> Result<(u64, Demonstration)> {
    let mut attempt_seed = seed;
    for attempt in 0..=MAX_RETRIES {
        match build_demonstration(cfg, kind, attempt_seed) {
            Ok(d) => return Ok((attempt_seed, d)),
            Err(e) if is_retryable(&e) && attempt < MAX_RETRIES => {
                attempt_seed = seed ^ RETRY_MASK.wrapping_mul(attempt + 1);
            }
            Err(e) => return Err(e.context(format!("sample seed {attempt_seed}"))),
        }
    }
    unreachable!("loop returns on the last attempt")
}

/// Exact per-split counts for `n` samples. Each `n * ratio` must be an
/// integer (within 1e-9) and the ratios must sum to 1.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        bail!("split ratios must sum to 1, got {sum}");
    }
    let mut counts = [0usize; 3];
    for (c, r) in counts.iter_mut().zip(ratios) {
        if !(0.0..=1.0).contains(&r) {
            bail!("split ratio {r} outside [0, 1]");
        }
        let exact = n as f64 * r;
        let rounded = exact.round();
        if (exact - rounded).abs() > 1e-9 * (n.max(1) as f64) {
            bail!("{n} samples cannot be split exactly with ratio {r} ({exact})");
        }
        *c = rounded as usize;
    }
    if counts.iter().sum::<usize>() != n {
        bail!("split counts {counts:?} do not add up to {n}");
    }
    Ok(counts)
}

/// Split tag per sample index: the first `train` entries of a seeded shuffle
/// go to train, the next `val` to validation, the rest to test.
pub fn assign_splits(n: usize, ratios: [f64; 3], base_seed: u64) -> Result<Vec<Split>> {
    let counts = split_counts(n, ratios)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(base_seed, STREAM_SPLIT));
    let mut splits = vec![Split::Train; n];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < counts[0] {
            Split::Train
        } else if rank < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(splits)
}

pub fn sample_id(kind: WorkpieceKind, index: usize) -> String {
    format!("{}_{index:06}", kind.as_str())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn sample_record(id: String, kind: WorkpieceKind, seed: u64, split: Split, demo: &Demonstration) -> Result<SampleRecord> {
    Ok(SampleRecord {
        id,
        geometry: kind,
        seed,
        split,
        point_cloud: demo.cloud.points.iter().map(|p| p.to_array()).collect(),
        trajectory: TrajectoryColumns::from_trajectory(&demo.trajectory)?,
        rules: demo.rules.rules().to_vec(),
    })
}

/// Rebuilds the sample file of `entry` from its recorded seed. The bytes
/// equal those written by [`generate_dataset`] under the same `cfg`.
pub fn regenerate_sample(cfg: &RunConfig, entry: &ManifestEntry) -> Result<Vec<u8>> {
    let demo = build_demonstration(cfg, entry.geometry, entry.seed)?;
    let record = sample_record(entry.id.clone(), entry.geometry, entry.seed, entry.split, &demo)?;
    let mut out = serde_json::to_vec(&record)?;
    out.push(b'\n');
    Ok(out)
}

/// Generates `cfg.dataset.n` samples into `out_dir` using `workers` threads
/// (0 = one per logical CPU). Output bytes do not depend on `workers`.
pub fn generate_dataset(cfg: &RunConfig, out_dir: &Path, workers: usize) -> Result<Vec<ManifestEntry>> {
    cfg.validate()?;
    let ds = cfg.dataset;
    let splits = assign_splits(ds.n, ds.split, ds.seed)?;
    let samples_dir = out_dir.join("samples");
    fs::create_dir_all(&samples_dir).with_context(|| format!("creating {}", samples_dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let entries: Vec<ManifestEntry> = pool.install(|| {
        (0..ds.n)
            .into_par_iter()
            .map(|i| {
                let id = sample_id(ds.geometry, i);
                let (seed, demo) = build_with_retries(cfg, ds.geometry, sample_seed(ds.seed, i))
                    .with_context(|| format!("generating {id}"))?;
                let record = sample_record(id.clone(), ds.geometry, seed, splits[i], &demo)?;
                let rel = format!("samples/{id}.json");
                write_json(&out_dir.join(&rel), &record)?;
                Ok(ManifestEntry {
                    id,
                    path: rel,
                    split: splits[i],
                    geometry: ds.geometry,
                    seed,
                })
            })
            .collect::<Result<_>>()
    })?;

    let mut manifest = BufWriter::new(fs::File::create(out_dir.join("manifest.jsonl"))?);
    for e in &entries {
        serde_json::to_writer(&mut manifest, e)?;
        manifest.write_all(b"\n")?;
    }
    manifest.flush()?;
    fs::write(out_dir.join("config.json"), cfg.to_json() + "\n")?;
    Ok(entries)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let path = dir.join("manifest.jsonl");
    let f = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

pub fn load_dataset_config(dir: &Path) -> Result<RunConfig> {
    RunConfig::load(&dir.join("config.json"))
}

pub fn load_sample(dir: &Path, entry: &ManifestEntry) -> Result<SampleRecord> {
    let path: PathBuf = dir.join(&entry.path);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Per-split sample counts of a manifest.
pub fn split_summary(entries: &[ManifestEntry]) -> [usize; 3] {
    let mut counts = [0; 3];
    for e in entries {
        counts[e.split as usize] += 1;
    }
    counts
}
