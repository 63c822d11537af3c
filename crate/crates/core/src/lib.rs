//! Rule-based skill injection for surface-following robot paths.
//!
//! Geometry generation, path segmentation, rule application, rigid-body
//! execution and the analytic rule estimator. The crate is `no_std` with
//! `alloc`; file formats and the command line live in `skill-tools`.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod fmath;

pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod features;
pub mod geometry;
pub mod math;
pub mod rules;
pub mod segmentation;

pub use dynamics::{simulate, SimConfig, Trajectory, TrajectorySample};
pub use error::{Error, Result};
pub use estimate::{estimate_rules, evaluate, EstimateParams, EvalReport, RuleEstimate};
pub use features::encode_features;
pub use geometry::{make_reference_path, PathParams, RawPath, Workpiece};
pub use math::{UnitQuat, Vec3};
pub use rules::{apply_rules, ProfileParams, Rule, RuleKind, RuleSet, TargetProfile};
pub use segmentation::{segment_path, SegmentClass, SegmentParams, Segmentation};
