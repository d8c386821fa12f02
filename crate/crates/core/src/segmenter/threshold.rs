//! Intensity thresholding backend: no model, no dependencies.

use super::{Capabilities, Prompt, SegmentResult2D, Segmenter};
use crate::error::Result;
use crate::volume::{component_at, connected_components_2d, mean_std, Connectivity2, Image2D, Mask2D};

const EPS: f64 = 1e-9;

/// Foreground is every pixel strictly above `mean + k_sigma * std` of the
/// image. Confidence is the boundary contrast
/// `(mean inside - mean of the 1-px outer ring) / (std + eps)` clamped to
/// `[0, 1]`. Box prompts are ignored.
#[derive(Clone, Copy, Debug)]
pub struct ThresholdSegmenter {
    pub k_sigma: f64,
}

impl Default for ThresholdSegmenter {
    fn default() -> Self {
        Self { k_sigma: 1.5 }
    }
}

fn foreground(image: &Image2D, k_sigma: f64) -> (Mask2D, f64) {
    let (mean, std) = mean_std(image.data().iter().map(|&v| v as f64));
    let t = mean + k_sigma * std;
    let fg = Mask2D::from_fn(image.rows(), image.cols(), |r, c| image.get(r, c) as f64 > t);
    (fg, std)
}

fn contrast(image: &Image2D, mask: &Mask2D, std: f64) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    let (rows, cols) = mask.shape();
    let inside = mask.pixels().map(|(r, c)| image.get(r, c) as f64).sum::<f64>() / mask.area() as f64;
    let mut ring = Mask2D::empty(rows, cols);
    for (r, c) in mask.pixels() {
        for nr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
            for nc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                if !mask.get(nr, nc) {
                    ring.set(nr, nc, true);
                }
            }
        }
    }
    if ring.is_empty() {
        return 0.0;
    }
    let outside = ring.pixels().map(|(r, c)| image.get(r, c) as f64).sum::<f64>() / ring.area() as f64;
    ((inside - outside) / (std + EPS)).clamp(0.0, 1.0)
}

pub fn threshold_segment(image: &Image2D, prompt: &Prompt, k_sigma: f64) -> SegmentResult2D {
    let (fg, std) = foreground(image, k_sigma);
    let mask = component_at(&fg, prompt.point, Connectivity2::C8);
    let probability = contrast(image, &mask, std);
    SegmentResult2D { mask, probability }
}

impl Segmenter for ThresholdSegmenter {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            prompted_segmentation: true,
            auto_masks: true,
        }
    }

    fn segment_raw(&mut self, image: &Image2D, prompt: &Prompt) -> Result<SegmentResult2D> {
        Ok(threshold_segment(image, prompt, self.k_sigma))
    }

    fn auto_masks_raw(&mut self, image: &Image2D) -> Result<Vec<SegmentResult2D>> {
        let (fg, std) = foreground(image, self.k_sigma);
        let cc = connected_components_2d(&fg, Connectivity2::C8);
        Ok((1..=cc.len() as u32)
            .map(|l| {
                let mask = cc.mask_of(l);
                let probability = contrast(image, &mask, std);
                SegmentResult2D { mask, probability }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::{auto_masks, segment};

    fn square_image() -> Image2D {
        let data = (0..20 * 20)
            .map(|i| {
                let (r, c) = (i / 20, i % 20);
                if (6..11).contains(&r) && (8..13).contains(&c) { 200 } else { 10 }
            })
            .collect();
        Image2D::new(20, 20, data).unwrap()
    }

    #[test]
    fn constant_image_gives_nothing() {
        let img = Image2D::new(5, 5, vec![40; 25]).unwrap();
        let r = threshold_segment(&img, &Prompt::point(2, 2), 1.5);
        assert!(r.mask.is_empty());
        assert_eq!(r.probability, 0.0);
    }

    #[test]
    fn bright_square_found_with_clamped_score() {
        let img = square_image();
        // mean = (25*200 + 375*10)/400, std from the two-level mixture
        let mean = (25.0 * 200.0 + 375.0 * 10.0) / 400.0;
        let var = (25.0 * (200.0f64 - mean).powi(2) + 375.0 * (10.0f64 - mean).powi(2)) / 400.0;
        let raw_score = (200.0 - 10.0) / var.sqrt();
        assert!(raw_score > 1.0);
        let r = segment(&mut ThresholdSegmenter::default(), &img, &Prompt::point(8, 10), 10).unwrap();
        let want = Mask2D::from_fn(20, 20, |r, c| (6..11).contains(&r) && (8..13).contains(&c));
        assert_eq!(r.mask, want);
        assert_eq!(r.probability, 1.0);
        let bg = threshold_segment(&img, &Prompt::point(0, 0), 1.5);
        assert!(bg.mask.is_empty());
        assert_eq!(bg.probability, 0.0);
    }

    #[test]
    fn two_blobs_sorted_by_area() {
        let data = (0..30 * 30)
            .map(|i| {
                let (r, c) = (i / 30, i % 30);
                let small = (2..5).contains(&r) && (2..5).contains(&c);
                let big = (15..21).contains(&r) && (15..21).contains(&c);
                if small || big { 220 } else { 5 }
            })
            .collect();
        let img = Image2D::new(30, 30, data).unwrap();
        let masks = auto_masks(&mut ThresholdSegmenter::default(), &img, 0).unwrap();
        let areas: Vec<usize> = masks.iter().map(|m| m.mask.area()).collect();
        assert_eq!(areas, vec![36, 9]);
        let blank = Image2D::new(4, 4, vec![0; 16]).unwrap();
        assert!(auto_masks(&mut ThresholdSegmenter::default(), &blank, 0).unwrap().is_empty());
    }
}
