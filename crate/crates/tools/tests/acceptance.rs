//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Set `SKILL_ACCEPT_FULL=1` to also generate the 10,000-sample
//! L-shape dataset.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use skill_core::dynamics::{integrate_rk4, BodyParams, PursuitTarget, RigidBodyState, Wrench};
use skill_core::estimate::{align_to_path, estimate_rules, evaluate};
use skill_core::geometry::{make_reference_path_labelled, Pose, WorkpieceKind};
use skill_core::math::{quat_to_6d, sixd_to_quat, Quat, UnitQuat, Vec3};
use skill_core::segmentation::segment_path;
use skill_core::{apply_rules, RuleKind, RuleSet, SegmentClass};
use skill_tools::dataset::{build_demonstration, generate_dataset, split_counts, split_summary};
use skill_tools::RunConfig;

const GEOMETRIES: [WorkpieceKind; 2] = [WorkpieceKind::LShape, WorkpieceKind::Window];

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// 1. Rotation round trip.
const ROT_SAMPLES: usize = 1000;
const ROT_TOL: f64 = 1e-9;
const ROT_TIME: Duration = Duration::from_secs(1);

fn rotation_round_trip() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..ROT_SAMPLES {
        let raw = Quat::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let Ok(q) = UnitQuat::normalize(raw) else { continue };
        let back = sixd_to_quat(quat_to_6d(q)).expect("6D of a unit quaternion decodes");
        worst = worst.max(q.angle_to(back));
    }
    let dt = t0.elapsed();
    check(
        worst < ROT_TOL && dt < ROT_TIME,
        format!("max geodesic {worst:.2e} rad (< {ROT_TOL:.0e}), {:.3} s", dt.as_secs_f64()),
    )
}

// 2. RK4 self-convergence on the damped pursuit of a fixed pose.
const CONV_H: f64 = 0.004;
const CONV_T: f64 = 0.064;
const CONV_FACTOR: f64 = 12.0;
const CONV_TIME: Duration = Duration::from_secs(10);

fn state_diff(a: &RigidBodyState, b: &RigidBodyState) -> f64 {
    let (qa, qb) = (a.orientation.to_array(), b.orientation.to_array());
    let dq = qa.iter().zip(&qb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    [
        (a.position - b.position).norm(),
        (a.linear_velocity - b.linear_velocity).norm(),
        dq,
        (a.angular_velocity - b.angular_velocity).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn pursue(cfg: &RunConfig, body: &BodyParams, target: &PursuitTarget, h: f64) -> RigidBodyState {
    let steps = (CONV_T / h).round() as usize;
    let mut s = RigidBodyState::at_rest(Vec3::ZERO, UnitQuat::IDENTITY);
    let ctrl = &cfg.sim.controller;
    for _ in 0..steps {
        s = integrate_rk4(&s, body, h, |x| skill_core::dynamics::compute_wrench(x, target, body, ctrl));
    }
    s
}

fn rk4_order() -> Outcome {
    let t0 = Instant::now();
    let cfg = RunConfig::default();
    let body = BodyParams {
        inertia: Vec3::new(0.01, 0.015, 0.02),
        ..cfg.sim.body
    };
    let target = PursuitTarget {
        position: Vec3::new(0.1, -0.05, 0.02),
        orientation: UnitQuat::from_euler(0.3, -0.2, 0.5),
        speed: 1.0,
    };
    let reference = pursue(&cfg, &body, &target, CONV_H / 64.0);
    let e1 = state_diff(&pursue(&cfg, &body, &target, CONV_H), &reference);
    let e2 = state_diff(&pursue(&cfg, &body, &target, CONV_H / 2.0), &reference);
    let factor = e1 / e2;
    let dt = t0.elapsed();
    check(
        factor >= CONV_FACTOR && dt < CONV_TIME,
        format!("error ratio {factor:.2} (>= {CONV_FACTOR}), errors {e1:.2e} / {e2:.2e}, {:.3} s", dt.as_secs_f64()),
    )
}

// 3. Force-free viscous decay against the exact per-step factor.
const DECAY_DT: f64 = 0.005;
const DECAY_C_OVER_M: f64 = 10.0;
const DECAY_STEPS: usize = 200;
const DECAY_TOL: f64 = 1e-8;

fn damping_oracle() -> Outcome {
    let body = BodyParams {
        mass: 1.0,
        linear_damping: DECAY_C_OVER_M,
        ..BodyParams::default()
    };
    let factor = (-DECAY_C_OVER_M * DECAY_DT).exp();
    let mut s = RigidBodyState::at_rest(Vec3::ZERO, UnitQuat::IDENTITY);
    s.linear_velocity = Vec3::new(1.0, 0.0, 0.0);
    let mut worst = 0.0f64;
    for _ in 0..DECAY_STEPS {
        let expected = s.linear_velocity * factor;
        s = integrate_rk4(&s, &body, DECAY_DT, |x| Wrench {
            force: x.linear_velocity * -body.linear_damping,
            torque: Vec3::ZERO,
        });
        worst = worst.max((s.linear_velocity - expected).norm());
    }
    check(
        worst < DECAY_TOL,
        format!("max per-step deviation {worst:.2e} (< {DECAY_TOL:.0e}) at c/m = {DECAY_C_OVER_M}, dt = {DECAY_DT}"),
    )
}

// 4. Segmentation against construction labels.
const SEG_PATHS: u64 = 50;
const SEG_AGREEMENT: f64 = 0.95;
const SEG_TIME: Duration = Duration::from_secs(30);

fn segmentation_agreement() -> Outcome {
    let t0 = Instant::now();
    let cfg = RunConfig::default();
    let band = cfg.segment.window / 2;
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in GEOMETRIES {
        let (mut agree, mut total, mut worst) = (0usize, 0usize, 1.0f64);
        for seed in 0..SEG_PATHS {
            let pose = Pose::random_perturbation(&mut ChaCha8Rng::seed_from_u64(seed));
            let w = cfg.workpieces.build(kind).unwrap().with_pose(pose);
            let (path, truth) = make_reference_path_labelled(&w, &cfg.path).unwrap();
            let seg = segment_path(&path, &cfg.segment).unwrap();
            let (mut a, mut n) = (0usize, 0usize);
            for i in 0..truth.len() {
                let lo = i.saturating_sub(band);
                let hi = (i + band).min(truth.len() - 1);
                if truth[lo..=hi].iter().any(|&c| c != truth[i]) {
                    continue;
                }
                n += 1;
                a += usize::from(seg.labels[i] == truth[i]);
            }
            worst = worst.min(a as f64 / n as f64);
            agree += a;
            total += n;
        }
        let rate = agree as f64 / total as f64;
        pass &= worst >= SEG_AGREEMENT;
        parts.push(format!("{} {:.4} (worst path {:.4})", kind.as_str(), rate, worst));
    }
    let dt = t0.elapsed();
    check(
        pass && dt < SEG_TIME,
        format!("agreement {} (>= {SEG_AGREEMENT} per path), {:.2} s", parts.join(", "), dt.as_secs_f64()),
    )
}

// 5. Oracle round trip.
const ORACLE_SAMPLES: u64 = 200;
const ORACLE_SEED: u64 = 2024;
const ORACLE_TIME: Duration = Duration::from_secs(300);

struct OracleBounds {
    velocity_mae: f64,
    orientation_mae: f64,
}

fn oracle_bounds(kind: WorkpieceKind) -> OracleBounds {
    match kind {
        WorkpieceKind::LShape => OracleBounds {
            velocity_mae: 0.06,
            orientation_mae: 0.03,
        },
        WorkpieceKind::Window => OracleBounds {
            velocity_mae: 0.13,
            orientation_mae: 0.04,
        },
    }
}

fn oracle_round_trip() -> Outcome {
    let t0 = Instant::now();
    let cfg = RunConfig::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in GEOMETRIES {
        let pairs: Result<Vec<(RuleSet, RuleSet)>, String> = (0..ORACLE_SAMPLES)
            .into_par_iter()
            .map(|i| {
                let seed = ORACLE_SEED ^ i;
                let d = build_demonstration(&cfg, kind, seed).map_err(|e| format!("seed {seed}: {e:#}"))?;
                let est = estimate_rules(&d.trajectory, &d.path, &d.segmentation, &cfg.estimate)
                    .map_err(|e| format!("seed {seed}: {e}"))?;
                Ok((d.rules, est.rules))
            })
            .collect();
        let pairs = match pairs {
            Ok(p) => p,
            Err(e) => return check(false, format!("{}: {e}", kind.as_str())),
        };
        let r = evaluate(&pairs).unwrap();
        let b = oracle_bounds(kind);
        let vel = r.kind(RuleKind::VelocityScale).mae.unwrap_or(f64::NAN);
        let ori = r.kind(RuleKind::OrientationOffset).mae.unwrap_or(f64::NAN);
        pass &= r.f1.macro_f1 == 1.0 && vel <= b.velocity_mae && ori <= b.orientation_mae;
        parts.push(format!(
            "{} macro-F1 {:.4}, velocity MAE {vel:.4} (<= {}), orientation MAE {ori:.2e} rad (<= {})",
            kind.as_str(),
            r.f1.macro_f1,
            b.velocity_mae,
            b.orientation_mae
        ));
    }
    let dt = t0.elapsed();
    check(pass && dt < ORACLE_TIME, format!("{}; {:.1} s", parts.join("; "), dt.as_secs_f64()))
}

// 6. Determinism of the generator binary.
const DET_N: &str = "100";

fn skill(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_skill"))
        .arg("--quiet")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    // Different worker counts must not change a byte.
    let runs = [
        skill(&["gen", "--n", DET_N, "--seed", "7", "--workers", "1", "--out", a.to_str().unwrap()]),
        skill(&["gen", "--n", DET_N, "--seed", "7", "--out", b.to_str().unwrap()]),
    ];
    if let Some(Err(e)) = runs.iter().find(|r| r.is_err()) {
        return check(false, format!("gen failed: {e}"));
    }
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    let differing: Vec<&String> = ta.keys().filter(|k| tb.get(*k) != ta.get(*k)).collect();
    let bytes: usize = ta.values().map(Vec::len).sum();
    check(
        ta.len() == tb.len() && differing.is_empty(),
        format!("{} files, {} bytes, {} differing", ta.len(), bytes, differing.len() + ta.len().abs_diff(tb.len())),
    )
}

// 7. Split exactness.
const SPLIT: [f64; 3] = [0.8, 0.1, 0.1];
const WINDOW_N: usize = 1000;
const WINDOW_TIME: Duration = Duration::from_secs(15 * 60);

fn split_exactness() -> Outcome {
    let mut pass = split_counts(10_000, SPLIT).ok() == Some([8000, 1000, 1000])
        && split_counts(1000, SPLIT).ok() == Some([800, 100, 100]);
    let mut parts = vec![format!("configured counts {}", if pass { "exact" } else { "wrong" })];
    let mut run = |kind: WorkpieceKind, n: usize, expect: [usize; 3]| {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.dataset.geometry = kind;
        cfg.dataset.n = n;
        cfg.dataset.split = SPLIT;
        let t0 = Instant::now();
        match generate_dataset(&cfg, tmp.path(), 0) {
            Ok(entries) => {
                let got = split_summary(&entries);
                let dt = t0.elapsed();
                pass &= got == expect && dt < WINDOW_TIME;
                parts.push(format!("{} x{n} generated {got:?} in {:.1} s", kind.as_str(), dt.as_secs_f64()));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{} x{n} failed: {e:#}", kind.as_str()));
            }
        }
    };
    run(WorkpieceKind::Window, WINDOW_N, [800, 100, 100]);
    if std::env::var_os("SKILL_ACCEPT_FULL").is_some() {
        run(WorkpieceKind::LShape, 10_000, [8000, 1000, 1000]);
    } else {
        parts.push("l_shape x10000 skipped (SKILL_ACCEPT_FULL unset)".into());
    }
    check(pass, parts.join(", "))
}

// 8. Identity injection.
const IDENTITY_SPEED_TOL: f64 = 0.05;
const IDENTITY_ORI_TOL: f64 = 0.02;

/// Profile orientation at the projection of `p` onto the polyline around
/// waypoint `i`, within its part.
fn profile_orientation_at(profile: &skill_core::TargetProfile, i: usize, p: Vec3) -> UnitQuat {
    let pts = &profile.points;
    let mut best = (f64::INFINITY, pts[i].orientation);
    for (a, b) in [(i.wrapping_sub(1), i), (i, i + 1)] {
        if b >= pts.len() || a >= pts.len() || pts[a].part_id != pts[b].part_id {
            continue;
        }
        let d = pts[b].position - pts[a].position;
        let t = ((p - pts[a].position).dot(d) / d.norm_squared()).clamp(0.0, 1.0);
        let dist = p.distance(pts[a].position.lerp(pts[b].position, t));
        if dist < best.0 {
            best = (dist, pts[a].orientation.slerp(pts[b].orientation, t));
        }
    }
    best.1
}

/// Interior samples only; near class changes and part ends the controller
/// leads the nearest pose by design.
fn identity_injection() -> Outcome {
    let cfg = RunConfig::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in GEOMETRIES {
        let w = cfg.workpieces.build(kind).unwrap();
        let path = skill_core::geometry::make_reference_path(&w, &cfg.path).unwrap();
        let seg = segment_path(&path, &cfg.segment).unwrap();
        let profile = apply_rules(&path, &seg, &RuleSet::empty(), &cfg.profile).unwrap();
        let traj = skill_core::simulate(&profile, &cfg.sim).unwrap();
        let al = align_to_path(&traj, &path, &seg, &cfg.estimate).unwrap();
        let (mut sum, mut n, mut worst) = (0.0, 0usize, 0.0f64);
        for (j, s) in traj.samples.iter().enumerate() {
            if !al.included[j] {
                continue;
            }
            worst = worst.max(s.orientation.angle_to(profile_orientation_at(&profile, al.indices[j], s.position)));
            if al.classes[j] == SegmentClass::Straight {
                sum += s.speed;
                n += 1;
            }
        }
        let ratio = sum / n as f64 / profile.nominal_speed;
        pass &= (ratio - 1.0).abs() <= IDENTITY_SPEED_TOL && worst <= IDENTITY_ORI_TOL;
        parts.push(format!("{} speed ratio {ratio:.4}, max tilt {worst:.2e} rad", kind.as_str()));
    }
    check(
        pass,
        format!("{} (|ratio - 1| <= {IDENTITY_SPEED_TOL}, tilt <= {IDENTITY_ORI_TOL})", parts.join(", ")),
    )
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("rotation round trip", rotation_round_trip),
        ("rk4 order", rk4_order),
        ("damping oracle", damping_oracle),
        ("segmentation agreement", segmentation_agreement),
        ("oracle round trip", oracle_round_trip),
        ("determinism", determinism),
        ("split exactness", split_exactness),
        ("identity injection", identity_injection),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        failed += usize::from(!o.pass);
        println!("criterion {} {name}: {} - {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
