//! Pure-pursuit execution of a target profile by a damped rigid body.
//!
//! A virtual target advances along each part of the profile at the profile's
//! target speed; the body is pulled toward the pose one lookahead distance
//! further along by independent proportional force and torque, with viscous
//! damping on both. The coupled ODE is integrated with classical RK4.
//!
//! Angular velocity is expressed in the world frame; the inertia tensor is
//! diagonal in the body frame.

use alloc::boxed::Box;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, PartialTrajectory, Result};
use crate::fmath;
use crate::math::{mat_vec, quat_error_rotvec, Mat3, Quat, UnitQuat, Vec3};
use crate::rules::{ProfilePoint, TargetProfile};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BodyParams {
    /// kg
    pub mass: f64,
    /// Principal moments, kg·m².
    pub inertia: Vec3,
    /// N·s/m
    pub linear_damping: f64,
    /// N·m·s/rad
    pub angular_damping: f64,
}

impl Default for BodyParams {
    fn default() -> Self {
        BodyParams {
            mass: 1.0,
            inertia: Vec3::new(0.01, 0.01, 0.01),
            linear_damping: 200.0,
            angular_damping: 2.0,
        }
    }
}

impl BodyParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("mass", self.mass, self.mass > 0.0),
            ("inertia.x", self.inertia.x, self.inertia.x > 0.0),
            ("inertia.y", self.inertia.y, self.inertia.y > 0.0),
            ("inertia.z", self.inertia.z, self.inertia.z > 0.0),
            ("linear_damping", self.linear_damping, self.linear_damping >= 0.0),
            ("angular_damping", self.angular_damping, self.angular_damping >= 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerParams {
    /// N/m
    pub kp_pos: f64,
    /// N·m/rad
    pub kp_ori: f64,
    /// Arc length between the virtual target and the pursued pose, m.
    pub lookahead_dist: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            kp_pos: 10_000.0,
            kp_ori: 100.0,
            lookahead_dist: 0.05,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("kp_pos", self.kp_pos),
            ("kp_ori", self.kp_ori),
            ("lookahead_dist", self.lookahead_dist),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub body: BodyParams,
    pub controller: ControllerParams,
    /// s
    pub dt: f64,
    /// A part is complete once progress reaches its end and the body is
    /// within this distance (m) of the final waypoint.
    pub end_tolerance: f64,
    /// Defaults to `20 * arc_length / nominal_speed / dt` plus two seconds
    /// of settling per part.
    pub max_steps: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            body: BodyParams::default(),
            controller: ControllerParams::default(),
            dt: 0.002,
            end_tolerance: 0.01,
            max_steps: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.body.validate()?;
        self.controller.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: self.dt,
            });
        }
        if !(self.end_tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "end_tolerance",
                value: self.end_tolerance,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyState {
    pub position: Vec3,
    pub orientation: UnitQuat,
    pub linear_velocity: Vec3,
    /// World frame, rad/s.
    pub angular_velocity: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(position: Vec3, orientation: UnitQuat) -> Self {
        RigidBodyState {
            position,
            orientation,
            linear_velocity: Vec3::ZERO,
            angular_velocity: Vec3::ZERO,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.orientation.quat().is_finite()
            && self.linear_velocity.is_finite()
            && self.angular_velocity.is_finite()
    }

    pub fn kinetic_energy(&self, body: &BodyParams) -> f64 {
        let r = self.orientation.to_matrix();
        let wb = mat_t_vec(&r, self.angular_velocity);
        0.5 * body.mass * self.linear_velocity.norm_squared() + 0.5 * wb.dot(body.inertia.component_mul(wb))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    /// s
    pub t: f64,
    pub position: Vec3,
    pub orientation: UnitQuat,
    /// `‖linear_velocity‖`, m/s.
    pub speed: f64,
    /// Linear velocity when known (recorded by the simulator, absent when
    /// loaded from speed-only formats).
    pub velocity: Option<Vec3>,
}

/// Time-indexed executed motion `{(t, p, q, v)}` with constant step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }
}

/// Pose and speed the controller chases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PursuitTarget {
    pub position: Vec3,
    pub orientation: UnitQuat,
    /// m/s
    pub speed: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

/// One part of a profile with its cumulative arc length.
#[derive(Clone, Debug)]
pub struct Track<'a> {
    points: &'a [ProfilePoint],
    cumulative: Vec<f64>,
}

impl<'a> Track<'a> {
    pub fn new(points: &'a [ProfilePoint]) -> Result<Track<'a>> {
        if points.is_empty() {
            return Err(Error::EmptyProfile);
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut s = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            s += w[0].position.distance(w[1].position);
            cumulative.push(s);
        }
        Ok(Track { points, cumulative })
    }

    pub fn points(&self) -> &'a [ProfilePoint] {
        self.points
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Interpolated pose and speed at arc length `s` (clamped to the track).
    pub fn at(&self, s: f64) -> PursuitTarget {
        let s = s.clamp(0.0, self.total_length());
        let idx = self.cumulative.partition_point(|&c| c <= s);
        if idx >= self.points.len() {
            let p = self.points[self.points.len() - 1];
            return PursuitTarget {
                position: p.position,
                orientation: p.orientation,
                speed: p.speed,
            };
        }
        let (a, b) = (self.points[idx - 1], self.points[idx]);
        let seg = self.cumulative[idx] - self.cumulative[idx - 1];
        let f = if seg > 0.0 {
            (s - self.cumulative[idx - 1]) / seg
        } else {
            0.0
        };
        PursuitTarget {
            position: a.position.lerp(b.position, f),
            orientation: a.orientation.slerp(b.orientation, f),
            speed: a.speed + (b.speed - a.speed) * f,
        }
    }
}

/// Profile pose at arc length `min(progress + lookahead_dist, total)`.
pub fn lookahead_target(track: &Track<'_>, progress: f64, lookahead_dist: f64) -> PursuitTarget {
    track.at((progress + lookahead_dist).min(track.total_length()))
}

/// Proportional pull toward `target` plus viscous damping.
pub fn compute_wrench(
    state: &RigidBodyState,
    target: &PursuitTarget,
    body: &BodyParams,
    ctrl: &ControllerParams,
) -> Wrench {
    Wrench {
        force: (target.position - state.position) * ctrl.kp_pos - state.linear_velocity * body.linear_damping,
        torque: quat_error_rotvec(target.orientation, state.orientation) * ctrl.kp_ori
            - state.angular_velocity * body.angular_damping,
    }
}

fn mat_t_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3::new(
        m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
        m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
        m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z,
    )
}

/// Integration state with an unnormalized quaternion (RK4 stages leave the
/// unit sphere).
#[derive(Clone, Copy)]
struct Raw {
    p: Vec3,
    v: Vec3,
    q: Quat,
    w: Vec3,
}

#[derive(Clone, Copy)]
struct Rate {
    dp: Vec3,
    dv: Vec3,
    dq: Quat,
    dw: Vec3,
}

impl Raw {
    fn advance(&self, r: &Rate, h: f64) -> Raw {
        Raw {
            p: self.p + r.dp * h,
            v: self.v + r.dv * h,
            q: self.q + r.dq * h,
            w: self.w + r.dw * h,
        }
    }

    fn as_state(&self) -> RigidBodyState {
        let n = self.q.norm();
        RigidBodyState {
            position: self.p,
            orientation: UnitQuat::new_unchecked(self.q * (1.0 / n)),
            linear_velocity: self.v,
            angular_velocity: self.w,
        }
    }
}

fn rate<F: Fn(&RigidBodyState) -> Wrench>(x: &Raw, body: &BodyParams, wrench: &F) -> Rate {
    let state = x.as_state();
    let Wrench { force, torque } = wrench(&state);
    let r = state.orientation.to_matrix();
    let wb = mat_t_vec(&r, x.w);
    let tb = mat_t_vec(&r, torque);
    let iw = body.inertia.component_mul(wb);
    let dwb = tb - wb.cross(iw);
    let dwb = Vec3::new(dwb.x / body.inertia.x, dwb.y / body.inertia.y, dwb.z / body.inertia.z);
    Rate {
        dp: x.v,
        dv: force * (1.0 / body.mass),
        dq: Quat::from_scalar_vector(0.0, x.w) * x.q * 0.5,
        dw: mat_vec(&r, dwb),
    }
}

/// One classical RK4 step of the rigid-body ODE under the wrench law
/// `wrench`, re-evaluated at every stage. The orientation is renormalized
/// after the step.
pub fn integrate_rk4<F: Fn(&RigidBodyState) -> Wrench>(
    state: &RigidBodyState,
    body: &BodyParams,
    dt: f64,
    wrench: F,
) -> RigidBodyState {
    let x0 = Raw {
        p: state.position,
        v: state.linear_velocity,
        q: state.orientation.quat(),
        w: state.angular_velocity,
    };
    let k1 = rate(&x0, body, &wrench);
    let k2 = rate(&x0.advance(&k1, 0.5 * dt), body, &wrench);
    let k3 = rate(&x0.advance(&k2, 0.5 * dt), body, &wrench);
    let k4 = rate(&x0.advance(&k3, dt), body, &wrench);
    let sixth = dt / 6.0;
    let x1 = Raw {
        p: x0.p + (k1.dp + (k2.dp + k3.dp) * 2.0 + k4.dp) * sixth,
        v: x0.v + (k1.dv + (k2.dv + k3.dv) * 2.0 + k4.dv) * sixth,
        q: x0.q + (k1.dq + (k2.dq + k3.dq) * 2.0 + k4.dq) * sixth,
        w: x0.w + (k1.dw + (k2.dw + k3.dw) * 2.0 + k4.dw) * sixth,
    };
    x1.as_state()
}

/// Advances the body by `dt` while pursuing the lookahead pose of `track`,
/// frozen at the start of the step. Progress moves forward at the target
/// speed and never decreases.
pub fn rk4_step(
    state: &RigidBodyState,
    track: &Track<'_>,
    progress: f64,
    body: &BodyParams,
    ctrl: &ControllerParams,
    dt: f64,
) -> Result<(RigidBodyState, f64)> {
    let target = lookahead_target(track, progress, ctrl.lookahead_dist);
    let next = integrate_rk4(state, body, dt, |s| compute_wrench(s, &target, body, ctrl));
    if !next.is_finite() {
        return Err(Error::Divergence { step: 0 });
    }
    let new_progress = (progress + target.speed.max(0.0) * dt).min(track.total_length());
    Ok((next, new_progress))
}

fn record(step: usize, dt: f64, s: &RigidBodyState) -> TrajectorySample {
    TrajectorySample {
        t: step as f64 * dt,
        position: s.position,
        orientation: s.orientation,
        speed: s.linear_velocity.norm(),
        velocity: Some(s.linear_velocity),
    }
}

/// Default step budget for a profile.
pub fn default_max_steps(profile: &TargetProfile, dt: f64) -> usize {
    let length: f64 = profile
        .points
        .windows(2)
        .filter(|w| w[0].part_id == w[1].part_id)
        .map(|w| w[0].position.distance(w[1].position))
        .sum();
    let parts = profile.part_ranges().len().max(1) as f64;
    fmath::ceil((20.0 * length / profile.nominal_speed + 2.0 * parts) / dt) as usize
}

/// Executes every part of `profile` in order. Each part starts at rest on its
/// first pose; time runs on across parts.
pub fn simulate(profile: &TargetProfile, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if profile.is_empty() {
        return Err(Error::EmptyProfile);
    }
    let dt = cfg.dt;
    let max_steps = cfg.max_steps.unwrap_or_else(|| default_max_steps(profile, dt));
    let mut samples = Vec::new();
    let mut step = 0usize;
    for (k, range) in profile.part_ranges().into_iter().enumerate() {
        let track = Track::new(&profile.points[range])?;
        let first = track.points()[0];
        let end = track.points()[track.points().len() - 1].position;
        let mut state = RigidBodyState::at_rest(first.position, first.orientation);
        let mut progress = 0.0;
        if k > 0 {
            step += 1;
        }
        samples.push(record(step, dt, &state));
        loop {
            if progress >= track.total_length() && state.position.distance(end) < cfg.end_tolerance {
                break;
            }
            if step >= max_steps {
                return Err(Error::IncompleteTrajectory {
                    steps: step,
                    partial: PartialTrajectory(Box::new(Trajectory { samples })),
                });
            }
            let (next, p) = rk4_step(&state, &track, progress, &cfg.body, &cfg.controller, dt)
                .map_err(|_| Error::Divergence { step })?;
            state = next;
            progress = p;
            step += 1;
            samples.push(record(step, dt, &state));
        }
    }
    Ok(Trajectory { samples })
}
