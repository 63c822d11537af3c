//! Procedural workpieces (L-shapes and window frames), their top-surface point
//! clouds, and the raw reference paths painted over them.
//!
//! Workpieces are planar slabs whose top surface is the local `z = 0` plane.
//! Every member is an axis-aligned rectangle in local coordinates; the pose
//! places the slab in the world.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmath;
use crate::math::{mat_from_columns, UnitQuat, Vec3};
use crate::segmentation::SegmentClass;

/// Rigid transform `p -> rotation * p + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: UnitQuat,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: UnitQuat::IDENTITY,
        translation: Vec3::ZERO,
    };

    /// Rotation about world z followed by a translation.
    pub fn planar(yaw: f64, translation: Vec3) -> Pose {
        Pose {
            rotation: UnitQuat::from_axis_angle(Vec3::Z, yaw),
            translation,
        }
    }

    /// Per-sample perturbation used for dataset variety: yaw uniform in
    /// `[-π, π]`, translation uniform in `[-0.2, 0.2]` m per axis.
    pub fn random_perturbation<R: Rng + ?Sized>(rng: &mut R) -> Pose {
        let yaw = rng.gen_range(-PI..=PI);
        let t = Vec3::new(
            rng.gen_range(-0.2..=0.2),
            rng.gen_range(-0.2..=0.2),
            rng.gen_range(-0.2..=0.2),
        );
        Pose::planar(yaw, t)
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn apply_dir(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    pub fn inverse_apply(&self, p: Vec3) -> Vec3 {
        self.rotation.inverse().rotate(p - self.translation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Corner square `width x width` at the origin, leg A along +x, leg B along +y.
    LShape { leg_a: f64, leg_b: f64, width: f64 },
    /// Rectangular frame of member thickness `frame_t` with evenly spaced
    /// vertical mullions.
    Window {
        outer_w: f64,
        outer_h: f64,
        frame_t: f64,
        mullions: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkpieceKind {
    LShape,
    Window,
}

impl WorkpieceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WorkpieceKind::LShape => "l_shape",
            WorkpieceKind::Window => "window",
        }
    }
}

/// Axis-aligned member rectangle in local coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: (f64, f64),
    pub max: (f64, f64),
}

impl Rect {
    fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect {
            min: (x0, y0),
            max: (x1, y1),
        }
    }

    pub fn area(&self) -> f64 {
        (self.max.0 - self.min.0) * (self.max.1 - self.min.1)
    }

    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        x >= self.min.0 - tol && x <= self.max.0 + tol && y >= self.min.1 - tol && y <= self.max.1 + tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workpiece {
    pub shape: Shape,
    pub pose: Pose,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDimension { name, value })
    }
}

pub fn make_l_workpiece(leg_a: f64, leg_b: f64, width: f64) -> Result<Workpiece> {
    positive("leg_a", leg_a)?;
    positive("leg_b", leg_b)?;
    positive("width", width)?;
    Ok(Workpiece {
        shape: Shape::LShape { leg_a, leg_b, width },
        pose: Pose::IDENTITY,
    })
}

pub fn make_window_workpiece(outer_w: f64, outer_h: f64, frame_t: f64, mullions: u32) -> Result<Workpiece> {
    positive("frame_t", frame_t)?;
    positive("outer_w", outer_w)?;
    positive("outer_h", outer_h)?;
    if outer_w - 2.0 * frame_t <= 0.0 {
        return Err(Error::InvalidDimension {
            name: "inner_width",
            value: outer_w - 2.0 * frame_t,
        });
    }
    if outer_h - 2.0 * frame_t <= 0.0 {
        return Err(Error::InvalidDimension {
            name: "inner_height",
            value: outer_h - 2.0 * frame_t,
        });
    }
    // Mullions must clear the side members and each other.
    if mullions > 0 && outer_w / f64::from(mullions + 1) < 1.5 * frame_t {
        return Err(Error::InvalidDimension {
            name: "mullions",
            value: f64::from(mullions),
        });
    }
    Ok(Workpiece {
        shape: Shape::Window {
            outer_w,
            outer_h,
            frame_t,
            mullions,
        },
        pose: Pose::IDENTITY,
    })
}

impl Workpiece {
    pub fn kind(&self) -> WorkpieceKind {
        match self.shape {
            Shape::LShape { .. } => WorkpieceKind::LShape,
            Shape::Window { .. } => WorkpieceKind::Window,
        }
    }

    pub fn with_pose(mut self, pose: Pose) -> Workpiece {
        self.pose = pose;
        self
    }

    /// Disjoint member rectangles. L-shapes list `[corner, leg_a, leg_b]`;
    /// windows list `[bottom, top, left, right, mullions...]`.
    pub fn rects(&self) -> Vec<Rect> {
        match self.shape {
            Shape::LShape { leg_a, leg_b, width } => alloc::vec![
                Rect::new(0.0, 0.0, width, width),
                Rect::new(width, 0.0, width + leg_a, width),
                Rect::new(0.0, width, width, width + leg_b),
            ],
            Shape::Window {
                outer_w: w,
                outer_h: h,
                frame_t: t,
                mullions,
            } => {
                let mut r = alloc::vec![
                    Rect::new(0.0, 0.0, w, t),
                    Rect::new(0.0, h - t, w, h),
                    Rect::new(0.0, t, t, h - t),
                    Rect::new(w - t, t, w, h - t),
                ];
                for xc in mullion_centers(w, mullions) {
                    r.push(Rect::new(xc - 0.5 * t, t, xc + 0.5 * t, h - t));
                }
                r
            }
        }
    }

    pub fn area(&self) -> f64 {
        self.rects().iter().map(Rect::area).sum()
    }

    /// Local-frame bounding box `(min, max)` of the top surface.
    pub fn bounding_box(&self) -> ((f64, f64), (f64, f64)) {
        match self.shape {
            Shape::LShape { leg_a, leg_b, width } => ((0.0, 0.0), (width + leg_a, width + leg_b)),
            Shape::Window { outer_w, outer_h, .. } => ((0.0, 0.0), (outer_w, outer_h)),
        }
    }

    /// World-frame outward normal of the top surface.
    pub fn surface_normal(&self) -> Vec3 {
        self.pose.apply_dir(Vec3::Z)
    }

    /// Whether `p` (world frame) lies on the top surface within `tol`.
    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let l = self.pose.inverse_apply(p);
        fmath::abs(l.z) <= tol && self.rects().iter().any(|r| r.contains(l.x, l.y, tol))
    }
}

fn mullion_centers(outer_w: f64, mullions: u32) -> impl Iterator<Item = f64> {
    let step = outer_w / f64::from(mullions + 1);
    (1..=mullions).map(move |k| step * f64::from(k))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathParams {
    /// Maximum distance between consecutive waypoints, m.
    pub spacing: f64,
    /// Tool height above the surface, m.
    pub standoff: f64,
    /// m/s.
    pub nominal_speed: f64,
    /// Radius of the arcs joining straight members, m.
    pub corner_radius: f64,
}

impl Default for PathParams {
    fn default() -> Self {
        PathParams {
            spacing: 0.01,
            standoff: 0.1,
            nominal_speed: 1.0,
            corner_radius: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Vec3,
    /// `(roll, pitch, yaw)`, intrinsic Z-Y-X.
    pub euler: [f64; 3],
    pub part_id: u32,
}

impl Waypoint {
    pub fn orientation(&self) -> UnitQuat {
        UnitQuat::from_euler(self.euler[0], self.euler[1], self.euler[2])
    }
}

/// Geometrically planned path: waypoints grouped into strokes by part id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPath {
    waypoints: Vec<Waypoint>,
    nominal_speed: f64,
}

impl RawPath {
    /// Validates that part ids start at 0, never decrease and never skip.
    pub fn new(waypoints: Vec<Waypoint>, nominal_speed: f64) -> Result<RawPath> {
        if !(nominal_speed > 0.0) {
            return Err(Error::InvalidParameter {
                name: "nominal_speed",
                value: nominal_speed,
            });
        }
        let mut expected = 0u32;
        for (i, w) in waypoints.iter().enumerate() {
            let ok = if i == 0 {
                w.part_id == 0
            } else {
                w.part_id == expected || w.part_id == expected + 1
            };
            if !ok {
                return Err(Error::NonContiguousParts {
                    expected,
                    found: w.part_id,
                });
            }
            expected = w.part_id;
        }
        Ok(RawPath {
            waypoints,
            nominal_speed,
        })
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn nominal_speed(&self) -> f64 {
        self.nominal_speed
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.waypoints.iter().map(|w| w.position).collect()
    }

    /// Index ranges of each part, in part order.
    pub fn part_ranges(&self) -> Vec<core::ops::Range<usize>> {
        part_ranges(self.waypoints.iter().map(|w| w.part_id))
    }

    pub fn arc_length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .filter(|w| w[0].part_id == w[1].part_id)
            .map(|w| w[0].position.distance(w[1].position))
            .sum()
    }
}

pub(crate) fn part_ranges(ids: impl Iterator<Item = u32>) -> Vec<core::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut current: Option<u32> = None;
    let mut n = 0;
    for (i, id) in ids.enumerate() {
        if current.is_some_and(|c| c != id) {
            out.push(start..i);
            start = i;
        }
        current = Some(id);
        n = i + 1;
    }
    if n > start {
        out.push(start..n);
    }
    out
}

#[derive(Clone, Copy, Debug)]
enum Primitive {
    Line {
        a: Vec3,
        b: Vec3,
    },
    Arc {
        center: Vec3,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Primitive {
    fn length(&self) -> f64 {
        match *self {
            Primitive::Line { a, b } => a.distance(b),
            Primitive::Arc { radius, sweep, .. } => radius * fmath::abs(sweep),
        }
    }

    /// Position and unit tangent at arc length `u` from the primitive start.
    fn eval(&self, u: f64) -> (Vec3, Vec3) {
        match *self {
            Primitive::Line { a, b } => {
                let len = a.distance(b);
                let dir = (b - a) / len;
                (a + dir * u, dir)
            }
            Primitive::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let sign = if sweep >= 0.0 { 1.0 } else { -1.0 };
                let th = start_angle + sign * u / radius;
                let (s, c) = (fmath::sin(th), fmath::cos(th));
                (
                    center + Vec3::new(radius * c, radius * s, 0.0),
                    Vec3::new(-s, c, 0.0) * sign,
                )
            }
        }
    }

    fn class(&self) -> SegmentClass {
        match self {
            Primitive::Line { .. } => SegmentClass::Straight,
            Primitive::Arc { .. } => SegmentClass::Corner,
        }
    }
}

/// Planar polyline (local z ignored) with interior vertices rounded by arcs of `radius`.
fn rounded_polyline(pts: &[Vec3], radius: f64) -> Result<Vec<Primitive>> {
    let n = pts.len();
    let dirs: Vec<Vec3> = pts
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].distance(w[1]))
        .collect();
    let mut tangent_len = alloc::vec![0.0; n];
    let mut turns = alloc::vec![0.0; n];
    for i in 1..n - 1 {
        let (din, dout) = (dirs[i - 1], dirs[i]);
        let turn = fmath::atan2(din.x * dout.y - din.y * dout.x, din.dot(dout));
        turns[i] = turn;
        tangent_len[i] = radius * fmath::tan(0.5 * fmath::abs(turn));
    }
    for i in 0..n - 1 {
        let edge = pts[i].distance(pts[i + 1]);
        if tangent_len[i] + tangent_len[i + 1] > edge + 1e-12 {
            return Err(Error::InvalidDimension {
                name: "corner_radius",
                value: radius,
            });
        }
    }
    let mut prims = Vec::new();
    let mut cur = pts[0];
    for i in 1..n - 1 {
        if fmath::abs(turns[i]) < 1e-12 {
            continue;
        }
        let (din, dout) = (dirs[i - 1], dirs[i]);
        let p1 = pts[i] - din * tangent_len[i];
        let p2 = pts[i] + dout * tangent_len[i];
        if cur.distance(p1) > 0.0 {
            prims.push(Primitive::Line { a: cur, b: p1 });
        }
        let left = Vec3::new(-din.y, din.x, 0.0);
        let sign = if turns[i] > 0.0 { 1.0 } else { -1.0 };
        let center = p1 + left * (radius * sign);
        let rel = p1 - center;
        prims.push(Primitive::Arc {
            center,
            radius,
            start_angle: fmath::atan2(rel.y, rel.x),
            sweep: turns[i],
        });
        cur = p2;
    }
    if cur.distance(pts[n - 1]) > 0.0 {
        prims.push(Primitive::Line { a: cur, b: pts[n - 1] });
    }
    Ok(prims)
}

/// Centerline polylines (local frame, z = 0), one per stroke.
fn stroke_polylines(shape: &Shape) -> Vec<Vec<Vec3>> {
    match *shape {
        Shape::LShape { leg_a, leg_b, width } => {
            let c = 0.5 * width;
            alloc::vec![alloc::vec![
                Vec3::new(width + leg_a, c, 0.0),
                Vec3::new(c, c, 0.0),
                Vec3::new(c, width + leg_b, 0.0),
            ]]
        }
        Shape::Window {
            outer_w: w,
            outer_h: h,
            frame_t: t,
            mullions,
        } => {
            let c = 0.5 * t;
            let start = Vec3::new(0.5 * w, c, 0.0);
            let mut strokes = alloc::vec![alloc::vec![
                start,
                Vec3::new(w - c, c, 0.0),
                Vec3::new(w - c, h - c, 0.0),
                Vec3::new(c, h - c, 0.0),
                Vec3::new(c, c, 0.0),
                start,
            ]];
            for xc in mullion_centers(w, mullions) {
                strokes.push(alloc::vec![Vec3::new(xc, t, 0.0), Vec3::new(xc, h - t, 0.0)]);
            }
            strokes
        }
    }
}

/// Total centerline length of every stroke, arcs included.
pub fn analytic_path_length(w: &Workpiece, corner_radius: f64) -> Result<f64> {
    let mut total = 0.0;
    for poly in stroke_polylines(&w.shape) {
        total += rounded_polyline(&poly, corner_radius)?
            .iter()
            .map(Primitive::length)
            .sum::<f64>();
    }
    Ok(total)
}

/// Reference path over `w` plus the construction-time class of every
/// waypoint (`corner` on arcs, `straight` on lines).
pub fn make_reference_path_labelled(w: &Workpiece, params: &PathParams) -> Result<(RawPath, Vec<SegmentClass>)> {
    let PathParams {
        spacing,
        standoff,
        nominal_speed,
        corner_radius,
    } = *params;
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter {
            name: "spacing",
            value: spacing,
        });
    }
    if !(standoff >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "standoff",
            value: standoff,
        });
    }
    if !(corner_radius > 0.0) {
        return Err(Error::InvalidParameter {
            name: "corner_radius",
            value: corner_radius,
        });
    }
    let polys = stroke_polylines(&w.shape);
    let shortest = polys
        .iter()
        .flat_map(|p| p.windows(2).map(|e| e[0].distance(e[1])))
        .fold(f64::INFINITY, f64::min);
    if spacing > shortest {
        return Err(Error::SpacingTooLarge { spacing, shortest });
    }

    let down = -w.surface_normal();
    let mut waypoints = Vec::new();
    let mut labels = Vec::new();
    for (part, poly) in polys.iter().enumerate() {
        let prims = rounded_polyline(poly, corner_radius)?;
        let lens: Vec<f64> = prims.iter().map(Primitive::length).collect();
        let total: f64 = lens.iter().sum();
        let n = fmath::ceil(total / spacing - 1e-9).max(1.0) as usize;
        let mut k = 0;
        let mut k_start = 0.0;
        for i in 0..=n {
            let s = total * i as f64 / n as f64;
            while k + 1 < prims.len() && s >= k_start + lens[k] {
                k_start += lens[k];
                k += 1;
            }
            let u = (s - k_start).clamp(0.0, lens[k]);
            let (p_local, t_local) = prims[k].eval(u);
            let position = w.pose.apply(p_local + Vec3::new(0.0, 0.0, standoff));
            let x_axis = w.pose.apply_dir(t_local);
            let y_axis = down.cross(x_axis);
            let q = UnitQuat::from_matrix(&mat_from_columns(x_axis, y_axis, down));
            let (roll, pitch, yaw) = q.to_euler();
            waypoints.push(Waypoint {
                position,
                euler: [roll, pitch, yaw],
                part_id: part as u32,
            });
            labels.push(prims[k].class());
        }
    }
    Ok((RawPath::new(waypoints, nominal_speed)?, labels))
}

pub fn make_reference_path(w: &Workpiece, params: &PathParams) -> Result<RawPath> {
    make_reference_path_labelled(w, params).map(|(p, _)| p)
}

/// Workpiece surface geometry `O = {x_1..x_K}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

pub const MIN_CLOUD_POINTS: usize = 64;

/// Area-uniform sample of `k` points on the top surface of `w`.
pub fn sample_point_cloud<R: Rng + ?Sized>(w: &Workpiece, k: usize, rng: &mut R) -> Result<PointCloud> {
    if k < MIN_CLOUD_POINTS {
        return Err(Error::InvalidParameter {
            name: "cloud_points",
            value: k as f64,
        });
    }
    let rects = w.rects();
    let mut cdf = Vec::with_capacity(rects.len());
    let mut acc = 0.0;
    for r in &rects {
        acc += r.area();
        cdf.push(acc);
    }
    let points = (0..k)
        .map(|_| {
            let u = rng.gen_range(0.0..acc);
            let idx = cdf.iter().position(|&c| u < c).unwrap_or(rects.len() - 1);
            let r = rects[idx];
            let x = rng.gen_range(r.min.0..=r.max.0);
            let y = rng.gen_range(r.min.1..=r.max.1);
            w.pose.apply(Vec3::new(x, y, 0.0))
        })
        .collect();
    Ok(PointCloud { points })
}
