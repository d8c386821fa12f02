//! Promptable 2D segmentation backends and the shared mask cleanup applied
//! to every backend's output.

mod external;
mod oracle;
pub mod protocol;
pub mod rle;
mod threshold;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{
    component_at, fill_holes_2d, nearest_component, remove_small_mask_components, Connectivity2,
    Image2D, Mask2D,
};

pub use external::{timeout_from_env, ExternalSegmenter, DEFAULT_TIMEOUT, TIMEOUT_ENV};
pub use oracle::{oracle_segment, OracleSegmenter, ShapePriorOracle};
pub use threshold::{threshold_segment, ThresholdSegmenter};

/// Default minimum component size kept by [`postprocess_mask`].
pub const DEFAULT_MIN_MASK_PX: usize = 10;

/// Box prompt in continuous pixel-edge coordinates: pixel `(r, c)` covers
/// `[r, r + 1) x [c, c + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxPrompt {
    pub row: f64,
    pub col: f64,
    pub height: f64,
    pub width: f64,
}

impl BoxPrompt {
    /// Pixel ranges `(rows, cols)` whose centers fall inside the box, clipped
    /// to the image.
    pub fn pixel_ranges(&self, rows: usize, cols: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let span = |start: f64, len: f64, n: usize| {
            let lo = (start - 0.5).ceil().max(0.0) as usize;
            let hi = ((start + len - 0.5).ceil().max(0.0) as usize).min(n);
            lo.min(hi)..hi
        };
        (span(self.row, self.height, rows), span(self.col, self.width, cols))
    }

    fn intersects(&self, rows: usize, cols: usize) -> bool {
        self.height > 0.0
            && self.width > 0.0
            && self.row < rows as f64
            && self.col < cols as f64
            && self.row + self.height > 0.0
            && self.col + self.width > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    /// `(row, col)` in-plane pixel.
    pub point: (usize, usize),
    #[serde(rename = "box")]
    pub bbox: Option<BoxPrompt>,
}

impl Prompt {
    pub fn point(row: usize, col: usize) -> Self {
        Self {
            point: (row, col),
            bbox: None,
        }
    }

    pub fn validate(&self, image: &Image2D) -> Result<()> {
        if !image.contains(self.point.0, self.point.1) {
            return Err(Error::InvalidPrompt(format!(
                "point {:?} outside {}x{} image",
                self.point,
                image.rows(),
                image.cols()
            )));
        }
        if let Some(b) = &self.bbox {
            if !b.intersects(image.rows(), image.cols()) {
                return Err(Error::InvalidPrompt(format!("box {b:?} misses the image")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentResult2D {
    pub mask: Mask2D,
    pub probability: f64,
}

impl SegmentResult2D {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            mask: Mask2D::empty(rows, cols),
            probability: 0.0,
        }
    }

    /// Non-empty and strictly above `tau`.
    pub fn accepted(&self, tau: f64) -> bool {
        !self.mask.is_empty() && self.probability > tau
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    pub prompted_segmentation: bool,
    pub auto_masks: bool,
}

/// A promptable 2D segmenter.
///
/// Implementations return raw masks; callers go through [`segment`] and
/// [`auto_masks`], which validate inputs and apply [`postprocess_mask`].
/// Backends must be deterministic for identical inputs within a session.
pub trait Segmenter {
    fn capabilities(&self) -> Capabilities;

    fn segment_raw(&mut self, image: &Image2D, prompt: &Prompt) -> Result<SegmentResult2D>;

    fn auto_masks_raw(&mut self, _image: &Image2D) -> Result<Vec<SegmentResult2D>> {
        Err(Error::CapabilityMissing("auto_masks"))
    }
}

impl<S: Segmenter + ?Sized> Segmenter for Box<S> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }

    fn segment_raw(&mut self, image: &Image2D, prompt: &Prompt) -> Result<SegmentResult2D> {
        (**self).segment_raw(image, prompt)
    }

    fn auto_masks_raw(&mut self, image: &Image2D) -> Result<Vec<SegmentResult2D>> {
        (**self).auto_masks_raw(image)
    }
}

/// Fill holes, drop components under `min_px`, then keep the prompted
/// component. When the point misses every surviving component the nearest
/// one is kept.
pub fn postprocess_mask(mask: &Mask2D, min_px: usize, point: Option<(usize, usize)>) -> Mask2D {
    let cleaned = remove_small_mask_components(&fill_holes_2d(mask), min_px);
    match point {
        Some(p) if !cleaned.is_empty() => {
            let hit = component_at(&cleaned, p, Connectivity2::C8);
            if hit.is_empty() {
                nearest_component(&cleaned, p)
            } else {
                hit
            }
        }
        _ => cleaned,
    }
}

fn check_result(image: &Image2D, r: &SegmentResult2D) -> Result<()> {
    if r.mask.shape() != (image.rows(), image.cols()) {
        return Err(Error::Protocol(format!(
            "mask shape {:?} does not match image {}x{}",
            r.mask.shape(),
            image.rows(),
            image.cols()
        )));
    }
    if !(0.0..=1.0).contains(&r.probability) {
        return Err(Error::Protocol(format!("probability {} outside [0, 1]", r.probability)));
    }
    Ok(())
}

/// Prompted segmentation with shared cleanup.
pub fn segment<S: Segmenter + ?Sized>(
    backend: &mut S,
    image: &Image2D,
    prompt: &Prompt,
    min_px: usize,
) -> Result<SegmentResult2D> {
    prompt.validate(image)?;
    let raw = backend.segment_raw(image, prompt)?;
    check_result(image, &raw)?;
    Ok(SegmentResult2D {
        mask: postprocess_mask(&raw.mask, min_px, Some(prompt.point)),
        probability: raw.probability,
    })
}

/// Automatic mask generation with shared cleanup. Masks emptied by cleanup
/// are dropped; the rest are sorted by descending area, ties broken by the
/// topmost-leftmost pixel.
pub fn auto_masks<S: Segmenter + ?Sized>(
    backend: &mut S,
    image: &Image2D,
    min_px: usize,
) -> Result<Vec<SegmentResult2D>> {
    if !backend.capabilities().auto_masks {
        return Err(Error::CapabilityMissing("auto_masks"));
    }
    let mut out = Vec::new();
    for raw in backend.auto_masks_raw(image)? {
        check_result(image, &raw)?;
        let mask = postprocess_mask(&raw.mask, min_px, None);
        if !mask.is_empty() {
            out.push(SegmentResult2D {
                mask,
                probability: raw.probability,
            });
        }
    }
    out.sort_by_key(|r| {
        let first = r.mask.pixels().next().unwrap_or((usize::MAX, usize::MAX));
        (std::cmp::Reverse(r.mask.area()), first)
    });
    Ok(out)
}
