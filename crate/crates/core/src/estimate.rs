//! Closed-form recovery of injected rules from an executed trajectory, and
//! the classification/regression metrics used to score predictions.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::RawPath;
use crate::rules::{
    path_tangents, Rule, RuleKind, RuleSet, ORIENTATION_OFFSET_MAX, VELOCITY_SCALE_MAX, VELOCITY_SCALE_MIN,
};
use crate::segmentation::{SegmentClass, Segmentation};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateParams {
    /// Fewest interior samples a labelled class must contribute.
    pub min_samples: usize,
    /// `|speed ratio - 1|` above which the velocity rule is active.
    pub velocity_threshold: f64,
    /// |mean tilt| (rad) above which the orientation rule is active.
    pub orientation_threshold: f64,
    /// Samples aligned within this many waypoints of a class change or a
    /// part end are excluded from class statistics.
    pub boundary_margin: usize,
    /// Forward search window (waypoints) for alignment.
    pub search_window: usize,
}

impl Default for EstimateParams {
    fn default() -> Self {
        EstimateParams {
            min_samples: 20,
            velocity_threshold: 0.1,
            orientation_threshold: 0.02,
            boundary_margin: 12,
            search_window: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Waypoint index per trajectory sample, non-decreasing.
    pub indices: Vec<usize>,
    pub classes: Vec<SegmentClass>,
    /// False for samples near class changes and part ends.
    pub included: Vec<bool>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Maps every sample of `traj` to a waypoint of `path`. The first sample
/// takes the globally nearest waypoint; later samples search forward from
/// the previous match within the current part, and may jump to the start of
/// the next part once the current part's end is in reach. Ties go to the
/// lower index.
pub fn align_to_path(traj: &Trajectory, path: &RawPath, seg: &Segmentation, params: &EstimateParams) -> Result<Alignment> {
    if traj.is_empty() || path.is_empty() {
        return Err(Error::TooFewPoints {
            required: 1,
            found: traj.len().min(path.len()),
        });
    }
    if seg.len() != path.len() {
        return Err(Error::LengthMismatch {
            expected: path.len(),
            found: seg.len(),
        });
    }
    let wps = path.waypoints();
    let ranges = path.part_ranges();
    let mut part_of = Vec::with_capacity(wps.len());
    for (k, r) in ranges.iter().enumerate() {
        part_of.extend(core::iter::repeat_n(k, r.len()));
    }

    let nearest = |p, candidates: &mut dyn Iterator<Item = usize>| {
        let mut best = (f64::INFINITY, usize::MAX);
        for i in candidates {
            let d = wps[i].position.distance(p);
            if d < best.0 || (d == best.0 && i < best.1) {
                best = (d, i);
            }
        }
        best.1
    };

    let mut indices = Vec::with_capacity(traj.len());
    let mut cur = nearest(traj.samples[0].position, &mut (0..wps.len()));
    indices.push(cur);
    for s in &traj.samples[1..] {
        let range = &ranges[part_of[cur]];
        let hi = (cur + params.search_window).min(range.end - 1);
        let next_start = (hi == range.end - 1 && range.end < wps.len()).then_some(range.end);
        cur = nearest(s.position, &mut (cur..=hi).chain(next_start));
        indices.push(cur);
    }

    let mut segment_of = alloc::vec![0usize; wps.len()];
    for (k, s) in seg.segments.iter().enumerate() {
        for slot in &mut segment_of[s.start..=s.end] {
            *slot = k;
        }
    }
    let m = params.boundary_margin;
    let classes = indices.iter().map(|&i| seg.labels[i]).collect();
    let included = indices
        .iter()
        .map(|&i| {
            let s = seg.segments[segment_of[i]];
            i >= s.start + m && i + m <= s.end
        })
        .collect();
    Ok(Alignment {
        indices,
        classes,
        included,
    })
}

/// Interior statistics of one segment class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: SegmentClass,
    pub count: usize,
    /// Mean speed over nominal speed.
    pub speed_ratio: f64,
    /// Mean signed tilt about the path tangent, rad.
    pub mean_tilt: f64,
}

/// Per-class recovered statistics and the decision drawn from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleEstimate {
    pub rules: RuleSet,
    pub stats: Vec<ClassStats>,
}

/// Interior statistics for each class labelled on `path`. Classes that label
/// no waypoint are omitted.
pub fn class_statistics(
    traj: &Trajectory,
    path: &RawPath,
    seg: &Segmentation,
    alignment: &Alignment,
    params: &EstimateParams,
) -> Result<Vec<ClassStats>> {
    if alignment.len() != traj.len() {
        return Err(Error::LengthMismatch {
            expected: traj.len(),
            found: alignment.len(),
        });
    }
    let tangents = path_tangents(path);
    let wps = path.waypoints();
    let mut out = Vec::new();
    for class in [SegmentClass::Straight, SegmentClass::Corner] {
        if !seg.labels.contains(&class) {
            continue;
        }
        let (mut n, mut speed, mut tilt) = (0usize, 0.0, 0.0);
        for (j, s) in traj.samples.iter().enumerate() {
            if !alignment.included[j] || alignment.classes[j] != class {
                continue;
            }
            let i = alignment.indices[j];
            let delta = s.orientation * wps[i].orientation().inverse();
            n += 1;
            speed += s.speed;
            tilt += delta.twist_angle(tangents[i]);
        }
        if n < params.min_samples {
            return Err(Error::InsufficientSamples {
                class,
                count: n,
                required: params.min_samples,
            });
        }
        out.push(ClassStats {
            class,
            count: n,
            speed_ratio: speed / n as f64 / path.nominal_speed(),
            mean_tilt: tilt / n as f64,
        });
    }
    if out.is_empty() {
        return Err(Error::InsufficientSamples {
            class: SegmentClass::Straight,
            count: 0,
            required: params.min_samples,
        });
    }
    Ok(out)
}

fn pick(stats: &[ClassStats], deviation: impl Fn(&ClassStats) -> f64, threshold: f64) -> Option<&ClassStats> {
    let best = stats.iter().fold(None::<&ClassStats>, |best, s| match best {
        Some(b) if deviation(b).abs() >= deviation(s).abs() => Some(b),
        _ => Some(s),
    })?;
    (deviation(best).abs() > threshold).then_some(best)
}

/// Velocity rule from class speed ratios: the class whose ratio deviates
/// most from 1, if beyond the threshold.
pub fn estimate_velocity_rule(stats: &[ClassStats], params: &EstimateParams) -> Rule {
    match pick(stats, |s| s.speed_ratio - 1.0, params.velocity_threshold) {
        Some(s) => Rule {
            kind: RuleKind::VelocityScale,
            target_class: s.class,
            param: s.speed_ratio.clamp(VELOCITY_SCALE_MIN, VELOCITY_SCALE_MAX),
        },
        None => Rule::inactive(RuleKind::VelocityScale),
    }
}

/// Orientation rule from class mean tilts.
pub fn estimate_orientation_rule(stats: &[ClassStats], params: &EstimateParams) -> Rule {
    match pick(stats, |s| s.mean_tilt, params.orientation_threshold) {
        Some(s) => Rule {
            kind: RuleKind::OrientationOffset,
            target_class: s.class,
            param: s.mean_tilt.clamp(-ORIENTATION_OFFSET_MAX, ORIENTATION_OFFSET_MAX),
        },
        None => Rule::inactive(RuleKind::OrientationOffset),
    }
}

/// Aligns `traj` to `path` and estimates both rule kinds.
pub fn estimate_rules(
    traj: &Trajectory,
    path: &RawPath,
    seg: &Segmentation,
    params: &EstimateParams,
) -> Result<RuleEstimate> {
    let alignment = align_to_path(traj, path, seg, params)?;
    let stats = class_statistics(traj, path, seg, &alignment, params)?;
    let rules = RuleSet::new(alloc::vec![
        estimate_velocity_rule(&stats, params),
        estimate_orientation_rule(&stats, params),
    ])?;
    Ok(RuleEstimate { rules, stats })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Occurrences in the ground truth.
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub per_class: BTreeMap<SegmentClass, ClassScore>,
    /// Unweighted mean of F1 over the classes present in the ground truth.
    pub macro_f1: f64,
    /// Overall accuracy, which equals micro-averaged F1 for single-label data.
    pub micro_f1: f64,
}

pub fn f1_multiclass(pred: &[SegmentClass], truth: &[SegmentClass]) -> Result<F1Report> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::NoActiveEntries);
    }
    let mut per_class = BTreeMap::new();
    let mut macro_sum = 0.0;
    let mut present = 0usize;
    for c in SegmentClass::ALL {
        let tp = pred.iter().zip(truth).filter(|&(&p, &t)| p == c && t == c).count();
        let predicted = pred.iter().filter(|&&p| p == c).count();
        let support = truth.iter().filter(|&&t| t == c).count();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (precision, recall) = (ratio(tp, predicted), ratio(tp, support));
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        if support > 0 {
            macro_sum += f1;
            present += 1;
        }
        per_class.insert(
            c,
            ClassScore {
                precision,
                recall,
                f1,
                support,
            },
        );
    }
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(F1Report {
        per_class,
        macro_f1: macro_sum / present as f64,
        micro_f1: correct as f64 / truth.len() as f64,
    })
}

/// Mean absolute error over entries flagged in `mask`.
pub fn mae(pred: &[f64], truth: &[f64], mask: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() || mask.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: if pred.len() != truth.len() { pred.len() } else { mask.len() },
        });
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for ((p, t), &m) in pred.iter().zip(truth).zip(mask) {
        if m {
            sum += (p - t).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoActiveEntries);
    }
    Ok(sum / n as f64)
}

/// Scores of one rule kind over a set of samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub f1: F1Report,
    /// `None` when no sample has this rule active.
    pub mae: Option<f64>,
    pub active: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    /// Both rule kinds pooled into one three-class problem.
    pub f1: F1Report,
    pub velocity: KindReport,
    pub orientation: KindReport,
}

impl EvalReport {
    pub fn kind(&self, kind: RuleKind) -> &KindReport {
        match kind {
            RuleKind::VelocityScale => &self.velocity,
            RuleKind::OrientationOffset => &self.orientation,
        }
    }
}

fn rule_of(rules: &[Rule], kind: RuleKind) -> Rule {
    rules
        .iter()
        .find(|r| r.kind == kind)
        .copied()
        .unwrap_or_else(|| Rule::inactive(kind))
}

/// Scores `(truth, prediction)` rule lists. Missing kinds count as inactive.
/// Predictions are not range-checked. Parameter MAE is taken over samples
/// whose true rule is active, using the raw predicted parameter.
pub fn evaluate<T: AsRef<[Rule]>, P: AsRef<[Rule]>>(pairs: &[(T, P)]) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::NoActiveEntries);
    }
    let mut pooled_pred = Vec::new();
    let mut pooled_truth = Vec::new();
    let mut kinds = Vec::new();
    for kind in RuleKind::ALL {
        let (mut pc, mut tc, mut pp, mut tp, mut mask) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (truth, pred) in pairs {
            let (t, p) = (rule_of(truth.as_ref(), kind), rule_of(pred.as_ref(), kind));
            tc.push(t.target_class);
            pc.push(p.target_class);
            tp.push(t.param);
            pp.push(p.param);
            mask.push(t.is_active());
        }
        let active = mask.iter().filter(|&&m| m).count();
        let report = KindReport {
            f1: f1_multiclass(&pc, &tc)?,
            mae: if active > 0 { Some(mae(&pp, &tp, &mask)?) } else { None },
            active,
        };
        pooled_pred.extend(pc);
        pooled_truth.extend(tc);
        kinds.push(report);
    }
    let orientation = kinds.pop().expect("two kinds");
    let velocity = kinds.pop().expect("two kinds");
    Ok(EvalReport {
        n: pairs.len(),
        f1: f1_multiclass(&pooled_pred, &pooled_truth)?,
        velocity,
        orientation,
    })
}
