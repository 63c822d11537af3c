//! Straight/corner labelling of paths from sliding-window principal-axis
//! residuals, and run-length grouping of labels into segments.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RawPath;
use crate::math::principal_axis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentClass {
    Straight,
    Corner,
    /// Rule-target marker for an inactive rule; never a path label.
    None,
}

impl SegmentClass {
    pub const ALL: [SegmentClass; 3] = [SegmentClass::Straight, SegmentClass::Corner, SegmentClass::None];

    pub fn as_str(self) -> &'static str {
        match self {
            SegmentClass::Straight => "straight",
            SegmentClass::Corner => "corner",
            SegmentClass::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<SegmentClass> {
        match s {
            "straight" => Some(SegmentClass::Straight),
            "corner" => Some(SegmentClass::Corner),
            "none" => Some(SegmentClass::None),
            _ => None,
        }
    }
}

impl fmt::Display for SegmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentParams {
    /// Odd window width in waypoints.
    pub window: usize,
    /// RMS residual (m) at or below which a window counts as straight.
    pub residual_threshold: f64,
    /// Shortest run kept as its own segment.
    pub min_len: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            window: 9,
            residual_threshold: 1e-4,
            min_len: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub class: SegmentClass,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-waypoint labels and the ordered segments they form. Segments never
/// span two parts; within a part adjacent segments differ in class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub labels: Vec<SegmentClass>,
    pub segments: Vec<Segment>,
}

impl Segmentation {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Labels every waypoint of `path` straight or corner. Each part is labelled
/// on its own; windows are truncated at part ends (never below 3 points).
pub fn label_points(path: &RawPath, window: usize, residual_threshold: f64) -> Result<Vec<SegmentClass>> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::InvalidParameter {
            name: "window",
            value: window as f64,
        });
    }
    let half = window / 2;
    let positions = path.positions();
    let mut labels = Vec::with_capacity(positions.len());
    for range in path.part_ranges() {
        let part = &positions[range.clone()];
        if part.len() < 3 {
            return Err(Error::PartTooShort {
                part: path.waypoints()[range.start].part_id,
                len: part.len(),
            });
        }
        for i in 0..part.len() {
            let mut lo = i.saturating_sub(half);
            let mut hi = (i + half).min(part.len() - 1);
            while hi - lo + 1 < 3 {
                if lo > 0 {
                    lo -= 1;
                } else {
                    hi += 1;
                }
            }
            let residual = match principal_axis(&part[lo..=hi]) {
                Ok(pa) => pa.residual_rms,
                Err(Error::ZeroSpread) => 0.0,
                Err(e) => return Err(e),
            };
            labels.push(if residual <= residual_threshold {
                SegmentClass::Straight
            } else {
                SegmentClass::Corner
            });
        }
    }
    Ok(labels)
}

/// Run-length groups `labels`. Runs shorter than `min_len` merge into the
/// preceding run; a short leading run merges forward. Indices are offset by
/// `base`.
fn group_runs(labels: &[SegmentClass], min_len: usize, base: usize) -> Vec<Segment> {
    let mut runs: Vec<Segment> = Vec::new();
    for (i, &c) in labels.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.class == c => r.end = base + i,
            _ => runs.push(Segment {
                class: c,
                start: base + i,
                end: base + i,
            }),
        }
    }
    let n_runs = runs.len();
    let mut out: Vec<Segment> = Vec::new();
    let mut pending: Option<usize> = None;
    for (k, run) in runs.into_iter().enumerate() {
        let keep = run.len() >= min_len || (out.is_empty() && k + 1 == n_runs);
        if keep {
            let start = pending.take().unwrap_or(run.start);
            match out.last_mut() {
                Some(last) if last.class == run.class => last.end = run.end,
                _ => out.push(Segment {
                    class: run.class,
                    start,
                    end: run.end,
                }),
            }
        } else if let Some(last) = out.last_mut() {
            last.end = run.end;
        } else {
            pending.get_or_insert(run.start);
        }
    }
    out
}

pub fn group_segments(labels: &[SegmentClass], min_len: usize) -> Segmentation {
    let segments = group_runs(labels, min_len, 0);
    Segmentation {
        labels: expand(&segments, labels.len()),
        segments,
    }
}

fn expand(segments: &[Segment], n: usize) -> Vec<SegmentClass> {
    let mut labels = Vec::with_capacity(n);
    for s in segments {
        labels.extend(core::iter::repeat_n(s.class, s.len()));
    }
    labels
}

/// Labels `path` and groups each part into segments.
pub fn segment_path(path: &RawPath, params: &SegmentParams) -> Result<Segmentation> {
    let raw = label_points(path, params.window, params.residual_threshold)?;
    let mut segments = Vec::new();
    for range in path.part_ranges() {
        segments.extend(group_runs(&raw[range.clone()], params.min_len, range.start));
    }
    Ok(Segmentation {
        labels: expand(&segments, raw.len()),
        segments,
    })
}
