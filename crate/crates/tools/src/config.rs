//! Run configuration shared by every subcommand. One JSON document holds all
//! sections; missing keys take defaults and unknown keys are rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use skill_core::geometry::{make_l_workpiece, make_window_workpiece, WorkpieceKind};
use skill_core::{EstimateParams, PathParams, ProfileParams, SegmentParams, SimConfig, Workpiece};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LShapeDims {
    pub leg_a: f64,
    pub leg_b: f64,
    pub width: f64,
}

impl Default for LShapeDims {
    fn default() -> Self {
        LShapeDims {
            leg_a: 1.0,
            leg_b: 1.0,
            width: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowDims {
    pub outer_w: f64,
    pub outer_h: f64,
    pub frame_t: f64,
    pub mullions: u32,
}

impl Default for WindowDims {
    fn default() -> Self {
        WindowDims {
            outer_w: 1.0,
            outer_h: 1.2,
            frame_t: 0.1,
            mullions: 1,
        }
    }
}

/// Canonical workpiece dimensions, in metres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkpieceDims {
    pub l_shape: LShapeDims,
    pub window: WindowDims,
}

impl WorkpieceDims {
    pub fn build(&self, kind: WorkpieceKind) -> Result<Workpiece> {
        Ok(match kind {
            WorkpieceKind::LShape => {
                let d = self.l_shape;
                make_l_workpiece(d.leg_a, d.leg_b, d.width)?
            }
            WorkpieceKind::Window => {
                let d = self.window;
                make_window_workpiece(d.outer_w, d.outer_h, d.frame_t, d.mullions)?
            }
        })
    }
}

pub fn parse_geometry(s: &str) -> Result<WorkpieceKind, String> {
    match s {
        "l_shape" => Ok(WorkpieceKind::LShape),
        "window" => Ok(WorkpieceKind::Window),
        _ => Err(format!("unknown geometry `{s}` (expected l_shape or window)")),
    }
}

/// Dataset generation settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub geometry: WorkpieceKind,
    pub n: usize,
    pub seed: u64,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub cloud_points: usize,
    /// Activate exactly one rule kind per sample.
    pub single_rule: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            geometry: WorkpieceKind::LShape,
            n: 100,
            seed: 42,
            split: [0.8, 0.1, 0.1],
            cloud_points: 1024,
            single_rule: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub workpieces: WorkpieceDims,
    pub path: PathParams,
    pub segment: SegmentParams,
    pub profile: ProfileParams,
    pub sim: SimConfig,
    pub estimate: EstimateParams,
    pub dataset: DatasetConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<RunConfig> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        let [a, b, c] = self.dataset.split;
        if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) {
            bail!("split ratios must lie in [0, 1], got {a},{b},{c}");
        }
        if ((a + b + c) - 1.0).abs() > 1e-9 {
            bail!("split ratios must sum to 1, got {a}+{b}+{c} = {}", a + b + c);
        }
        Ok(())
    }
}
