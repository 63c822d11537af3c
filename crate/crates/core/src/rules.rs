//! Rule vocabulary, activation, and composition of rules into a target
//! execution profile.
//!
//! A rule overrides execution on every waypoint whose segment class matches
//! its target. Velocity rules scale the target speed; orientation rules tilt
//! the tool about the local path tangent. Positions are never touched.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{part_ranges, RawPath};
use crate::math::{UnitQuat, Vec3};
use crate::segmentation::{SegmentClass, Segmentation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    VelocityScale,
    OrientationOffset,
}

impl RuleKind {
    pub const ALL: [RuleKind; 2] = [RuleKind::VelocityScale, RuleKind::OrientationOffset];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::VelocityScale => "velocity_scale",
            RuleKind::OrientationOffset => "orientation_offset",
        }
    }

    pub fn parse(s: &str) -> Option<RuleKind> {
        match s {
            "velocity_scale" => Some(RuleKind::VelocityScale),
            "orientation_offset" => Some(RuleKind::OrientationOffset),
            _ => None,
        }
    }

    /// Admissible parameter range for an active rule.
    pub fn param_range(self) -> (f64, f64) {
        match self {
            RuleKind::VelocityScale => (VELOCITY_SCALE_MIN, VELOCITY_SCALE_MAX),
            RuleKind::OrientationOffset => (-ORIENTATION_OFFSET_MAX, ORIENTATION_OFFSET_MAX),
        }
    }
}

pub const VELOCITY_SCALE_MIN: f64 = 0.1;
pub const VELOCITY_SCALE_MAX: f64 = 3.0;
/// rad
pub const ORIENTATION_OFFSET_MAX: f64 = 0.6;

/// Velocity scales inside this band are never drawn for an active rule.
pub const VELOCITY_NEUTRAL_BAND: (f64, f64) = (0.85, 1.15);
/// Smallest tilt magnitude drawn for an active rule, rad.
pub const ORIENTATION_MIN_TILT: f64 = 0.03;

/// One parametric override. `param` is a dimensionless speed factor for
/// [`RuleKind::VelocityScale`] and a signed tilt (rad) about the local path
/// tangent for [`RuleKind::OrientationOffset`]. Inactive rules carry
/// `target_class = none` and `param = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub kind: RuleKind,
    pub target_class: SegmentClass,
    pub param: f64,
}

impl Rule {
    pub fn new(kind: RuleKind, target_class: SegmentClass, param: f64) -> Result<Rule> {
        if target_class == SegmentClass::None {
            return Ok(Rule::inactive(kind));
        }
        let (min, max) = kind.param_range();
        if !(param >= min && param <= max) {
            return Err(Error::RuleParamOutOfRange {
                kind: kind.as_str(),
                param,
                min,
                max,
            });
        }
        Ok(Rule {
            kind,
            target_class,
            param,
        })
    }

    pub fn inactive(kind: RuleKind) -> Rule {
        Rule {
            kind,
            target_class: SegmentClass::None,
            param: 0.0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.target_class != SegmentClass::None
    }
}

pub fn rule_is_active(rule: &Rule, segment_class: SegmentClass) -> bool {
    rule.target_class != SegmentClass::None && rule.target_class == segment_class
}

/// Ordered rules, at most one per kind; order is application order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rule>", into = "Vec<Rule>")]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl TryFrom<Vec<Rule>> for RuleSet {
    type Error = Error;
    fn try_from(rules: Vec<Rule>) -> Result<Self> {
        RuleSet::new(rules)
    }
}

impl From<RuleSet> for Vec<Rule> {
    fn from(r: RuleSet) -> Self {
        r.rules
    }
}

impl AsRef<[Rule]> for RuleSet {
    fn as_ref(&self) -> &[Rule] {
        &self.rules
    }
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Result<RuleSet> {
        let mut validated = Vec::with_capacity(rules.len());
        for r in rules {
            if validated.iter().any(|v: &Rule| v.kind == r.kind) {
                return Err(Error::DuplicateRule { kind: r.kind.as_str() });
            }
            validated.push(Rule::new(r.kind, r.target_class, r.param)?);
        }
        Ok(RuleSet { rules: validated })
    }

    pub fn empty() -> RuleSet {
        RuleSet::default()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn get(&self, kind: RuleKind) -> Option<&Rule> {
        self.rules.iter().find(|r| r.kind == kind)
    }

    /// The rule for `kind`, or its inactive form when absent.
    pub fn rule_or_inactive(&self, kind: RuleKind) -> Rule {
        self.get(kind).copied().unwrap_or_else(|| Rule::inactive(kind))
    }

    /// One entry per kind in [`RuleKind::ALL`] order.
    pub fn complete(&self) -> RuleSet {
        RuleSet {
            rules: RuleKind::ALL.iter().map(|&k| self.rule_or_inactive(k)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    /// Transitions between segment classes are ramped over this many waypoints.
    pub blend_len: usize,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams { blend_len: 5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub position: Vec3,
    pub orientation: UnitQuat,
    /// m/s
    pub speed: f64,
    pub part_id: u32,
    pub class: SegmentClass,
    /// Unit path tangent, the axis of orientation offsets.
    pub tangent: Vec3,
}

/// Per-waypoint execution target produced by [`apply_rules`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetProfile {
    pub points: Vec<ProfilePoint>,
    pub nominal_speed: f64,
}

impl TargetProfile {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn part_ranges(&self) -> Vec<core::ops::Range<usize>> {
        part_ranges(self.points.iter().map(|p| p.part_id))
    }
}

/// Unit tangents from central differences within each part (one-sided at
/// part ends). Degenerate neighbourhoods fall back to the tool x-axis.
pub fn path_tangents(path: &RawPath) -> Vec<Vec3> {
    let wps = path.waypoints();
    let mut out = Vec::with_capacity(wps.len());
    for range in path.part_ranges() {
        for i in range.clone() {
            let lo = if i > range.start { i - 1 } else { i };
            let hi = if i + 1 < range.end { i + 1 } else { i };
            let d = wps[hi].position - wps[lo].position;
            let t = d
                .try_normalize(1e-12)
                .unwrap_or_else(|| wps[i].orientation().rotate(Vec3::X));
            out.push(t);
        }
    }
    out
}

/// Centered moving average of width `width` within `range`, truncated at the
/// range ends. A step between two runs becomes a linear ramp.
fn box_smooth(values: &[f64], range: core::ops::Range<usize>, width: usize, out: &mut [f64]) {
    let half = width / 2;
    for i in range.clone() {
        let lo = i.saturating_sub(half).max(range.start);
        let hi = (i + half).min(range.end - 1);
        let s: f64 = values[lo..=hi].iter().sum();
        out[i] = s / (hi - lo + 1) as f64;
    }
}

/// Profile with no overrides: path orientations at nominal speed.
pub fn identity_profile(path: &RawPath, seg: &Segmentation) -> Result<TargetProfile> {
    if seg.len() != path.len() {
        return Err(Error::LengthMismatch {
            expected: path.len(),
            found: seg.len(),
        });
    }
    let tangents = path_tangents(path);
    let points = path
        .waypoints()
        .iter()
        .zip(&seg.labels)
        .zip(tangents)
        .map(|((w, &class), tangent)| ProfilePoint {
            position: w.position,
            orientation: w.orientation(),
            speed: path.nominal_speed(),
            part_id: w.part_id,
            class,
            tangent,
        })
        .collect();
    Ok(TargetProfile {
        points,
        nominal_speed: path.nominal_speed(),
    })
}

/// Applies the active rules of `rules`, in order, to the identity profile of
/// `path`.
pub fn apply_rules(
    path: &RawPath,
    seg: &Segmentation,
    rules: &RuleSet,
    params: &ProfileParams,
) -> Result<TargetProfile> {
    let mut profile = identity_profile(path, seg)?;
    let n = profile.len();
    let ranges = profile.part_ranges();
    let width = params.blend_len.max(1);
    let mut raw = alloc::vec![0.0; n];
    let mut smooth = alloc::vec![0.0; n];
    for rule in rules.rules().iter().filter(|r| r.is_active()) {
        let neutral = match rule.kind {
            RuleKind::VelocityScale => 1.0,
            RuleKind::OrientationOffset => 0.0,
        };
        for (v, p) in raw.iter_mut().zip(&profile.points) {
            *v = if rule_is_active(rule, p.class) { rule.param } else { neutral };
        }
        for r in &ranges {
            box_smooth(&raw, r.clone(), width, &mut smooth);
        }
        for (p, &s) in profile.points.iter_mut().zip(&smooth) {
            match rule.kind {
                RuleKind::VelocityScale => p.speed *= s,
                RuleKind::OrientationOffset => {
                    if s != 0.0 {
                        p.orientation = UnitQuat::from_axis_angle(p.tangent, s) * p.orientation;
                    }
                }
            }
        }
    }
    Ok(profile)
}

/// Draws a rule set for synthetic data. Each kind independently targets
/// straight, corner or none with equal odds; active parameters avoid the
/// neutral band. With `single_rule`, one kind (chosen uniformly) is active on
/// straight or corner and the other is inactive.
pub fn sample_ruleset<R: Rng + ?Sized>(rng: &mut R, single_rule: bool) -> RuleSet {
    let mut rules = Vec::with_capacity(2);
    let only = single_rule.then(|| RuleKind::ALL[rng.gen_range(0..2)]);
    for kind in RuleKind::ALL {
        let class = match only {
            Some(k) if k != kind => SegmentClass::None,
            Some(_) => [SegmentClass::Straight, SegmentClass::Corner][rng.gen_range(0..2)],
            None => SegmentClass::ALL[rng.gen_range(0..3)],
        };
        if class == SegmentClass::None {
            rules.push(Rule::inactive(kind));
            continue;
        }
        let param = match kind {
            RuleKind::VelocityScale => {
                let (lo, hi) = VELOCITY_NEUTRAL_BAND;
                let below = lo - VELOCITY_SCALE_MIN;
                let above = VELOCITY_SCALE_MAX - hi;
                let u = rng.gen_range(0.0..below + above);
                if u < below {
                    VELOCITY_SCALE_MIN + u
                } else {
                    (hi + (u - below)).min(VELOCITY_SCALE_MAX).max(hi + f64::EPSILON)
                }
            }
            RuleKind::OrientationOffset => {
                let mag = rng.gen_range(ORIENTATION_MIN_TILT..=ORIENTATION_OFFSET_MAX);
                if rng.gen_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            }
        };
        rules.push(Rule {
            kind,
            target_class: class,
            param,
        });
    }
    RuleSet { rules }
}
