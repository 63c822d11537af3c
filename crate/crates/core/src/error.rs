use alloc::boxed::Box;
use core::fmt;

use crate::dynamics::Trajectory;
use crate::segmentation::SegmentClass;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate quaternion: norm {norm:e} is too small to normalize")]
    DegenerateQuaternion { norm: f64 },

    #[error("degenerate 6D rotation: columns are zero or parallel")]
    DegenerateRotation,

    #[error("zero spread: all points coincide")]
    ZeroSpread,

    #[error("need at least {required} points, got {found}")]
    TooFewPoints { required: usize, found: usize },

    #[error("invalid dimension `{name}`: {value}")]
    InvalidDimension { name: &'static str, value: f64 },

    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("spacing {spacing} is larger than the shortest member ({shortest})")]
    SpacingTooLarge { spacing: f64, shortest: f64 },

    #[error("path part {part} has {len} points, need at least 3")]
    PartTooShort { part: u32, len: usize },

    #[error("part ids must be contiguous from 0; found {found} where {expected} was expected")]
    NonContiguousParts { expected: u32, found: u32 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("parameter {param} for {kind} is outside [{min}, {max}]")]
    RuleParamOutOfRange {
        kind: &'static str,
        param: f64,
        min: f64,
        max: f64,
    },

    #[error("rule set holds more than one {kind} rule")]
    DuplicateRule { kind: &'static str },

    #[error("profile is empty")]
    EmptyProfile,

    #[error("simulation diverged at step {step}")]
    Divergence { step: usize },

    #[error("simulation hit max_steps ({steps}) before completing the profile")]
    IncompleteTrajectory {
        steps: usize,
        partial: PartialTrajectory,
    },

    #[error("class {class} has {count} usable samples, need {required}")]
    InsufficientSamples {
        class: SegmentClass,
        count: usize,
        required: usize,
    },

    #[error("no active entries to average over")]
    NoActiveEntries,

    #[error("trajectory sample {index} carries no velocity vector")]
    MissingVelocity { index: usize },
}

/// Partial trajectory carried by [`Error::IncompleteTrajectory`]. Its `Debug`
/// output is a summary so error reports stay readable.
#[derive(Clone, PartialEq)]
pub struct PartialTrajectory(pub Box<Trajectory>);

impl fmt::Debug for PartialTrajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PartialTrajectory({} samples)", self.0.len())
    }
}
