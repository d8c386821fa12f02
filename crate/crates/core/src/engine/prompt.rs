use crate::error::{Error, Result};
use crate::segmenter::{BoxPrompt, Prompt};
use crate::volume::Mask2D;

/// Tight bounding box of `mask` scaled about its center by `gamma`, in
/// pixel-edge coordinates and not yet clipped.
pub fn scaled_box(mask: &Mask2D, gamma: f64) -> Result<BoxPrompt> {
    let (r0, c0, h, w) = mask.bbox().ok_or(Error::EmptyMask)?;
    let (cr, cc) = (r0 as f64 + h as f64 / 2.0, c0 as f64 + w as f64 / 2.0);
    let (sh, sw) = (gamma * h as f64, gamma * w as f64);
    Ok(BoxPrompt {
        row: cr - sh / 2.0,
        col: cc - sw / 2.0,
        height: sh,
        width: sw,
    })
}

fn clip(b: BoxPrompt, rows: usize, cols: usize) -> BoxPrompt {
    let r0 = b.row.max(0.0);
    let c0 = b.col.max(0.0);
    let r1 = (b.row + b.height).min(rows as f64);
    let c1 = (b.col + b.width).min(cols as f64);
    BoxPrompt {
        row: r0,
        col: c0,
        height: r1 - r0,
        width: c1 - c0,
    }
}

/// Point + enlarged-box prompt for the next slice.
///
/// The point is the rounded centroid when it lies on the mask, otherwise the
/// mask pixel nearest the centroid (ties: smallest row, then column).
pub fn make_prompt(mask: &Mask2D, gamma: f64) -> Result<Prompt> {
    let (mr, mc) = mask.centroid().ok_or(Error::EmptyMask)?;
    let (rr, rc) = (mr.round() as usize, mc.round() as usize);
    let point = if rr < mask.rows() && rc < mask.cols() && mask.get(rr, rc) {
        (rr, rc)
    } else {
        let mut best = (f64::INFINITY, (0, 0));
        for (r, c) in mask.pixels() {
            let d = (r as f64 - mr).powi(2) + (c as f64 - mc).powi(2);
            if d < best.0 {
                best = (d, (r, c));
            }
        }
        best.1
    };
    let bbox = clip(scaled_box(mask, gamma)?, mask.rows(), mask.cols());
    Ok(Prompt {
        point,
        bbox: Some(bbox),
    })
}
