//! Tri-plane tracking: plane selection, prompt propagation, turning-point
//! re-seeding and multi-seed fusion.
//!
//! A seed is segmented on the three orthogonal planes through it; the plane
//! with the smallest confident cross-section fixes the tracking axis. Masks
//! are then propagated slice by slice in both directions, each slice prompted
//! with the previous mask's center and enlarged box. Where tracking stops
//! inside the volume, the two other planes through the last prompt are
//! segmented and farthest-point samples of those masks become new seeds.

mod config;
mod fps;
mod prompt;
mod run;
mod track;
mod traverse;
mod visited;

use serde::{Deserialize, Serialize};

use crate::volume::Voxel;

pub use config::{EngineConfig, TraversalOrder, TurningPointMode};
pub use fps::fps;
pub use prompt::{make_prompt, scaled_box};
pub use run::{fuse, run, run_parallel, RunOutput, SegmenterFactory};
pub use track::{
    plane_select, sample_turning_points, select_axis, track, Direction, PlaneChoice, StopReason,
    TerminalPrompt, TrackedSegment,
};
pub use traverse::{traverse, Traversal, TraversalEvent};
pub use visited::VisitedSet;

/// A voxel position to start or resume traversal from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed {
    pub pos: Voxel,
}

impl Seed {
    pub fn new(z: usize, y: usize, x: usize) -> Self {
        Self { pos: [z, y, x] }
    }
}

impl From<Voxel> for Seed {
    fn from(pos: Voxel) -> Self {
        Self { pos }
    }
}
