//! Ground-truth backed segmenters.

use std::sync::Arc;

use super::{BoxPrompt, Capabilities, Prompt, SegmentResult2D, Segmenter};
use crate::error::{Error, Result};
use crate::volume::{
    component_at, connected_components_2d, Connectivity2, Image2D, LabelVolume, Mask2D, PlaneAxis,
    PlaneOrigin,
};

fn nonzero_mask(labels: &[u32], rows: usize, cols: usize) -> Mask2D {
    Mask2D::from_bits(rows, cols, labels.iter().map(|&l| l != 0).collect()).expect("sized by caller")
}

fn require_origin(image: &Image2D) -> Result<PlaneOrigin> {
    image
        .origin()
        .ok_or_else(|| Error::Backend("oracle backend needs images cut from a volume".into()))
}

fn gt_window(gt: &LabelVolume, image: &Image2D) -> Result<Mask2D> {
    let o = require_origin(image)?;
    let labels = gt.plane_window(o.axis, o.index, o.corner, image.rows(), image.cols());
    Ok(nonzero_mask(&labels, image.rows(), image.cols()))
}

/// The 8-connected component of nonzero ground truth containing the prompt
/// point on plane `(axis, index)`; probability 1 when non-empty.
pub fn oracle_segment(gt: &LabelVolume, axis: PlaneAxis, index: usize, prompt: &Prompt) -> Result<SegmentResult2D> {
    let shape = gt.shape();
    if index >= shape[axis.dim()] {
        return Err(Error::IndexOutOfRange {
            index,
            extent: shape[axis.dim()],
        });
    }
    let (rd, cd) = axis.plane_dims();
    let (rows, cols) = (shape[rd], shape[cd]);
    let labels = gt.plane_window(axis, index, (0, 0), rows, cols);
    Ok(oracle_from_mask(&nonzero_mask(&labels, rows, cols), prompt.point))
}

fn oracle_from_mask(fg: &Mask2D, point: (usize, usize)) -> SegmentResult2D {
    let mask = component_at(fg, point, Connectivity2::C8);
    let probability = if mask.is_empty() { 0.0 } else { 1.0 };
    SegmentResult2D { mask, probability }
}

fn component_masks(fg: &Mask2D) -> Vec<Mask2D> {
    let cc = connected_components_2d(fg, Connectivity2::C8);
    (1..=cc.len() as u32).map(|l| cc.mask_of(l)).collect()
}

/// Perfect 2D segmenter: returns the ground-truth component under the prompt.
#[derive(Clone, Debug)]
pub struct OracleSegmenter {
    gt: Arc<LabelVolume>,
}

impl OracleSegmenter {
    pub fn new(gt: impl Into<Arc<LabelVolume>>) -> Self {
        Self { gt: gt.into() }
    }
}

impl Segmenter for OracleSegmenter {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            prompted_segmentation: true,
            auto_masks: true,
        }
    }

    fn segment_raw(&mut self, image: &Image2D, prompt: &Prompt) -> Result<SegmentResult2D> {
        Ok(oracle_from_mask(&gt_window(&self.gt, image)?, prompt.point))
    }

    fn auto_masks_raw(&mut self, image: &Image2D) -> Result<Vec<SegmentResult2D>> {
        let fg = gt_window(&self.gt, image)?;
        Ok(component_masks(&fg)
            .into_iter()
            .map(|mask| SegmentResult2D { mask, probability: 1.0 })
            .collect())
    }
}

/// Ground-truth masks seen through a limited field of view, scored by shape.
///
/// The mask is the ground-truth component under the prompt point, restricted
/// to the prompt box (or to a `fov_px` square around the point when no box
/// is given). Box prompts are scored by the minor/major axis ratio of the
/// mask's second moments in physical units: propagating a round
/// cross-section scores near 1, while a box that slides along a vessel
/// lying in the plane scores low. Point-only prompts score 1 for any
/// non-empty mask. This stands in for a learned model that is confident on
/// isolated clicks but loses confidence when asked to follow an
/// elongated cut.
#[derive(Clone, Debug)]
pub struct ShapePriorOracle {
    gt: Arc<LabelVolume>,
    fov_px: usize,
}

impl ShapePriorOracle {
    pub const DEFAULT_FOV_PX: usize = 32;

    pub fn new(gt: impl Into<Arc<LabelVolume>>) -> Self {
        Self {
            gt: gt.into(),
            fov_px: Self::DEFAULT_FOV_PX,
        }
    }

    pub fn with_fov(mut self, fov_px: usize) -> Self {
        self.fov_px = fov_px.max(1);
        self
    }

    fn window(&self, prompt: &Prompt, rows: usize, cols: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let b = prompt.bbox.unwrap_or_else(|| {
            let half = self.fov_px as f64 / 2.0;
            BoxPrompt {
                row: prompt.point.0 as f64 + 0.5 - half,
                col: prompt.point.1 as f64 + 0.5 - half,
                height: self.fov_px as f64,
                width: self.fov_px as f64,
            }
        });
        b.pixel_ranges(rows, cols)
    }
}

/// Minor/major axis ratio from second moments, each pixel counted as a
/// uniform square of the given physical size.
pub(crate) fn axis_ratio(mask: &Mask2D, pixel_size: [f64; 2]) -> f64 {
    let n = mask.area();
    if n == 0 {
        return 0.0;
    }
    let [dr, dc] = pixel_size;
    let (mut sr, mut sc) = (0.0, 0.0);
    for (r, c) in mask.pixels() {
        sr += r as f64 * dr;
        sc += c as f64 * dc;
    }
    let (mr, mc) = (sr / n as f64, sc / n as f64);
    let (mut vrr, mut vcc, mut vrc) = (0.0, 0.0, 0.0);
    for (r, c) in mask.pixels() {
        let (a, b) = (r as f64 * dr - mr, c as f64 * dc - mc);
        vrr += a * a;
        vcc += b * b;
        vrc += a * b;
    }
    let n = n as f64;
    let vrr = vrr / n + dr * dr / 12.0;
    let vcc = vcc / n + dc * dc / 12.0;
    let vrc = vrc / n;
    let mean = (vrr + vcc) / 2.0;
    let spread = (((vrr - vcc) / 2.0).powi(2) + vrc * vrc).sqrt();
    let (major, minor) = (mean + spread, (mean - spread).max(0.0));
    (minor / major).sqrt()
}

impl Segmenter for ShapePriorOracle {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            prompted_segmentation: true,
            auto_masks: true,
        }
    }

    fn segment_raw(&mut self, image: &Image2D, prompt: &Prompt) -> Result<SegmentResult2D> {
        let fg = gt_window(&self.gt, image)?;
        let (rr, cr) = self.window(prompt, image.rows(), image.cols());
        let visible = Mask2D::from_fn(image.rows(), image.cols(), |r, c| {
            rr.contains(&r) && cr.contains(&c) && fg.get(r, c)
        });
        let mask = component_at(&visible, prompt.point, Connectivity2::C8);
        let probability = match (mask.is_empty(), prompt.bbox) {
            (true, _) => 0.0,
            (false, Some(_)) => axis_ratio(&mask, image.pixel_size()),
            (false, None) => 1.0,
        };
        Ok(SegmentResult2D { mask, probability })
    }

    fn auto_masks_raw(&mut self, image: &Image2D) -> Result<Vec<SegmentResult2D>> {
        let fg = gt_window(&self.gt, image)?;
        Ok(component_masks(&fg)
            .into_iter()
            .map(|mask| {
                let probability = axis_ratio(&mask, image.pixel_size());
                SegmentResult2D { mask, probability }
            })
            .collect())
    }
}
