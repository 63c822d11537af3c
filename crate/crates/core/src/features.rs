//! Fixed-width per-sample features for learners.

use alloc::vec::Vec;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

pub const FEATURE_WIDTH: usize = 10;

/// One row per sample: `[Δt, vx, vy, vz, r0..r5]` where `r` is the 6D
/// rotation. `Δt` is 0 on the first row.
pub fn encode_features(traj: &Trajectory) -> Result<Vec<[f64; FEATURE_WIDTH]>> {
    if traj.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            found: traj.len(),
        });
    }
    let mut rows = Vec::with_capacity(traj.len());
    let mut prev_t = traj.samples[0].t;
    for (j, s) in traj.samples.iter().enumerate() {
        let v = s.velocity.ok_or(Error::MissingVelocity { index: j })?;
        let r = s.orientation.to_6d().0;
        rows.push([s.t - prev_t, v.x, v.y, v.z, r[0], r[1], r[2], r[3], r[4], r[5]]);
        prev_t = s.t;
    }
    Ok(rows)
}
