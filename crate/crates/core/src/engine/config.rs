use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmenter::DEFAULT_MIN_MASK_PX;
use crate::volume::PlaneAxis;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraversalOrder {
    /// Breadth-first.
    #[default]
    #[serde(alias = "FIFO")]
    Fifo,
    /// Depth-first.
    #[serde(alias = "LIFO")]
    Lifo,
}

/// How new seeds are proposed after a branch has been tracked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurningPointMode {
    /// Farthest-point samples of the orthogonal masks at each stop.
    #[default]
    Fps,
    /// No re-seeding: each seed yields a single tracked branch.
    Off,
    /// Every segment voxel on a `dense_stride` lattice becomes a seed.
    Dense,
}

/// Engine parameters. Every field is optional in the JSON form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Masks are accepted only with probability strictly above this.
    pub tau: f64,
    /// Box enlargement factor for propagated prompts.
    pub gamma: f64,
    /// Farthest-point samples per orthogonal plane at a turning point.
    pub k_turning: usize,
    /// Slices tracked per direction before giving up.
    pub max_steps: usize,
    pub traversal_order: TraversalOrder,
    /// Sub-volume shape for chunked execution; `None` runs on the whole
    /// volume at once.
    pub chunk_shape: Option<[usize; 3]>,
    /// Halo added on every side of a chunk so segments from neighbouring
    /// chunks overlap and can be fused.
    pub chunk_overlap: usize,
    pub min_mask_px: usize,
    /// Debug: select planes only among this axis.
    pub restrict_axis: Option<PlaneAxis>,
    pub turning_points: TurningPointMode,
    pub dense_stride: usize,
    /// Seeds popped per traversal before it is cut short.
    pub max_iterations: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            tau: 0.8,
            gamma: 1.2,
            k_turning: 3,
            max_steps: 4096,
            traversal_order: TraversalOrder::Fifo,
            chunk_shape: None,
            chunk_overlap: 8,
            min_mask_px: DEFAULT_MIN_MASK_PX,
            restrict_axis: None,
            turning_points: TurningPointMode::Fps,
            dense_stride: 4,
            max_iterations: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau {} outside [0, 1]", self.tau));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return bad(format!("gamma {} must be >= 1", self.gamma));
        }
        if self.k_turning == 0 {
            return bad("k_turning must be positive".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if self.dense_stride == 0 {
            return bad("dense_stride must be positive".into());
        }
        if let Some(c) = self.chunk_shape {
            if c.contains(&0) {
                return bad(format!("chunk_shape {c:?} has a zero extent"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
