//! Plain-text interchange formats: CSV tables, whitespace point clouds and
//! rule-set JSON.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use skill_core::dynamics::{Trajectory, TrajectorySample};
use skill_core::geometry::{PointCloud, RawPath, Waypoint};
use skill_core::math::{Quat, UnitQuat, Vec3};
use skill_core::rules::{ProfilePoint, TargetProfile};
use skill_core::{RuleSet, SegmentClass};

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

#[derive(Serialize, Deserialize)]
struct PathRow {
    x: f64,
    y: f64,
    z: f64,
    roll: f64,
    pitch: f64,
    yaw: f64,
    part_id: u32,
}

/// `x,y,z,roll,pitch,yaw,part_id`. The nominal speed is not stored.
pub fn write_path<W: Write>(w: W, path: &RawPath) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for wp in path.waypoints() {
        out.serialize(PathRow {
            x: wp.position.x,
            y: wp.position.y,
            z: wp.position.z,
            roll: wp.euler[0],
            pitch: wp.euler[1],
            yaw: wp.euler[2],
            part_id: wp.part_id,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_path<R: Read>(r: R, nominal_speed: f64) -> Result<RawPath> {
    let mut waypoints = Vec::new();
    for (i, row) in csv::Reader::from_reader(r).deserialize().enumerate() {
        let row: PathRow = row.with_context(|| format!("path row {}", i + 1))?;
        waypoints.push(Waypoint {
            position: Vec3::new(row.x, row.y, row.z),
            euler: [row.roll, row.pitch, row.yaw],
            part_id: row.part_id,
        });
    }
    Ok(RawPath::new(waypoints, nominal_speed)?)
}

pub fn save_path(path: &Path, p: &RawPath) -> Result<()> {
    write_path(create(path)?, p)
}

pub fn load_path(path: &Path, nominal_speed: f64) -> Result<RawPath> {
    read_path(open(path)?, nominal_speed).with_context(|| format!("reading {}", path.display()))
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRow {
    t: f64,
    px: f64,
    py: f64,
    pz: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    v: f64,
}

/// `t,px,py,pz,qw,qx,qy,qz,v`, shortest round-trip decimal floats.
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in &traj.samples {
        let q = s.orientation;
        out.serialize(TrajectoryRow {
            t: s.t,
            px: s.position.x,
            py: s.position.y,
            pz: s.position.z,
            qw: q.w(),
            qx: q.x(),
            qy: q.y(),
            qz: q.z(),
            v: s.speed,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Velocity vectors are not part of the CSV; loaded samples carry speed only.
pub fn read_trajectory<R: Read>(r: R) -> Result<Trajectory> {
    let mut samples = Vec::new();
    for (i, row) in csv::Reader::from_reader(r).deserialize().enumerate() {
        let row: TrajectoryRow = row.with_context(|| format!("trajectory row {}", i + 1))?;
        let orientation = UnitQuat::from_stored(Quat::new(row.qw, row.qx, row.qy, row.qz))
            .with_context(|| format!("trajectory row {}", i + 1))?;
        samples.push(TrajectorySample {
            t: row.t,
            position: Vec3::new(row.px, row.py, row.pz),
            orientation,
            speed: row.v,
            velocity: None,
        });
    }
    Ok(Trajectory { samples })
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_trajectory(create(path)?, traj)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    read_trajectory(open(path)?).with_context(|| format!("reading {}", path.display()))
}

#[derive(Serialize)]
struct LabelRow {
    index: usize,
    part_id: u32,
    class: SegmentClass,
}

/// `index,part_id,class`.
pub fn write_labels<W: Write>(w: W, path: &RawPath, labels: &[SegmentClass]) -> Result<()> {
    if labels.len() != path.len() {
        bail!("{} labels for {} waypoints", labels.len(), path.len());
    }
    let mut out = csv::Writer::from_writer(w);
    for (index, (wp, &class)) in path.waypoints().iter().zip(labels).enumerate() {
        out.serialize(LabelRow {
            index,
            part_id: wp.part_id,
            class,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ProfileRow {
    x: f64,
    y: f64,
    z: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    speed: f64,
    part_id: u32,
    class: SegmentClass,
    tx: f64,
    ty: f64,
    tz: f64,
}

/// `x,y,z,qw,qx,qy,qz,speed,part_id,class,tx,ty,tz`.
pub fn write_profile<W: Write>(w: W, profile: &TargetProfile) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in &profile.points {
        let q = p.orientation;
        out.serialize(ProfileRow {
            x: p.position.x,
            y: p.position.y,
            z: p.position.z,
            qw: q.w(),
            qx: q.x(),
            qy: q.y(),
            qz: q.z(),
            speed: p.speed,
            part_id: p.part_id,
            class: p.class,
            tx: p.tangent.x,
            ty: p.tangent.y,
            tz: p.tangent.z,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_profile<R: Read>(r: R, nominal_speed: f64) -> Result<TargetProfile> {
    let mut points = Vec::new();
    for (i, row) in csv::Reader::from_reader(r).deserialize().enumerate() {
        let row: ProfileRow = row.with_context(|| format!("profile row {}", i + 1))?;
        points.push(ProfilePoint {
            position: Vec3::new(row.x, row.y, row.z),
            orientation: UnitQuat::from_stored(Quat::new(row.qw, row.qx, row.qy, row.qz))?,
            speed: row.speed,
            part_id: row.part_id,
            class: row.class,
            tangent: Vec3::new(row.tx, row.ty, row.tz),
        });
    }
    Ok(TargetProfile { points, nominal_speed })
}

/// One `x y z` line per point.
pub fn write_point_cloud<W: Write>(mut w: W, cloud: &PointCloud) -> Result<()> {
    for p in &cloud.points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_point_cloud<R: BufRead>(r: R) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .with_context(|| format!("point cloud line {}", i + 1))?;
        if v.len() != 3 {
            bail!("point cloud line {}: expected 3 values, got {}", i + 1, v.len());
        }
        points.push(Vec3::new(v[0], v[1], v[2]));
    }
    Ok(PointCloud { points })
}

/// JSON array of `{kind, target_class, param}`. An empty array is the empty
/// rule set.
pub fn load_rules(path: &Path) -> Result<RuleSet> {
    let rules: RuleSet =
        serde_json::from_reader(open(path)?).with_context(|| format!("reading rules {}", path.display()))?;
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use skill_core::geometry::{make_l_workpiece, make_reference_path, PathParams};

    #[test]
    fn path_round_trip_is_exact() {
        let w = make_l_workpiece(0.8, 0.6, 0.2).unwrap();
        let path = make_reference_path(&w, &PathParams::default()).unwrap();
        let mut buf = Vec::new();
        write_path(&mut buf, &path).unwrap();
        assert!(buf.starts_with(b"x,y,z,roll,pitch,yaw,part_id\n"));
        let back = read_path(buf.as_slice(), 1.0).unwrap();
        assert_eq!(back, path);
    }

    #[test]
    fn trajectory_round_trip_keeps_every_bit() {
        let q = UnitQuat::from_euler(0.1, 0.2, 0.3);
        let traj = Trajectory {
            samples: (0..5)
                .map(|j| TrajectorySample {
                    t: j as f64 * 0.002,
                    position: Vec3::new(0.1 * j as f64, 1.0 / 3.0, -2e-17),
                    orientation: q,
                    speed: core::f64::consts::PI,
                    velocity: Some(Vec3::X),
                })
                .collect(),
        };
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        assert!(buf.starts_with(b"t,px,py,pz,qw,qx,qy,qz,v\n"));
        let back = read_trajectory(buf.as_slice()).unwrap();
        for (a, b) in traj.samples.iter().zip(&back.samples) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.position, b.position);
            assert_eq!(a.orientation.to_array(), b.orientation.to_array());
            assert_eq!(a.speed, b.speed);
            assert!(b.velocity.is_none());
        }
    }

    #[test]
    fn labels_header_and_rows() {
        let w = make_l_workpiece(0.8, 0.6, 0.2).unwrap();
        let path = make_reference_path(&w, &PathParams::default()).unwrap();
        let labels = vec![SegmentClass::Straight; path.len()];
        let mut buf = Vec::new();
        write_labels(&mut buf, &path, &labels).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,part_id,class"));
        assert_eq!(lines.next(), Some("0,0,straight"));
        assert!(write_labels(Vec::new(), &path, &labels[1..]).is_err());
    }

    #[test]
    fn point_cloud_round_trip() {
        let cloud = PointCloud {
            points: vec![Vec3::new(0.1, 0.2, 0.0), Vec3::new(1e-9, -3.5, 0.25)],
        };
        let mut buf = Vec::new();
        write_point_cloud(&mut buf, &cloud).unwrap();
        assert_eq!(read_point_cloud(buf.as_slice()).unwrap(), cloud);
        assert!(read_point_cloud(&b"1 2\n"[..]).is_err());
    }

    #[test]
    fn rules_json_parses_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        std::fs::write(&p, r#"[{"kind":"velocity_scale","target_class":"straight","param":2.0}]"#).unwrap();
        let rs = load_rules(&p).unwrap();
        assert_eq!(rs.rules().len(), 1);
        std::fs::write(&p, "[]").unwrap();
        assert!(load_rules(&p).unwrap().rules().is_empty());
        std::fs::write(&p, r#"[{"kind":"velocity_scale","target_class":"straight","param":9.0}]"#).unwrap();
        assert!(load_rules(&p).is_err());
    }
}
