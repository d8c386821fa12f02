//! Zero-shot segmentation of 3D tubular structures (blood vessels in volume
//! EM) by tracking a promptable 2D segmenter along automatically chosen
//! planes.
//!
//! The pipeline: [`seeding`] proposes seeds by global thresholding, the
//! [`engine`] picks a tracking plane per seed, propagates point+box prompts
//! slice by slice, and re-seeds at turning points until the whole connected
//! structure is covered. [`metrics`] scores the result at instance level and
//! [`baselines`] holds the two simple zero-shot comparison methods.

pub mod baselines;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod seeding;
pub mod segmenter;
pub mod synth;
pub mod volume;

pub use engine::{EngineConfig, RunOutput, Seed, TraversalOrder};
pub use error::{Error, Result};
pub use segmenter::{Prompt, SegmentResult2D, Segmenter};
pub use volume::{Image2D, LabelVolume, Mask2D, PlaneAxis, Volume3D};
