use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{fps, make_prompt, EngineConfig, Seed, TurningPointMode};
use crate::error::{Error, Result};
use crate::segmenter::{segment, Prompt, SegmentResult2D, Segmenter};
use crate::volume::{extract_plane, Mask2D, PlaneAxis, Volume3D, Voxel};

/// Outcome of segmenting the three planes through a seed.
#[derive(Clone, Debug)]
pub struct PlaneChoice {
    pub axis: PlaneAxis,
    pub result: SegmentResult2D,
    /// Physical area of each accepted candidate, indexed by axis dim.
    pub areas: [Option<f64>; 3],
}

/// Argmin of physical area over the accepted candidates. Ties go to the
/// earlier axis in z, y, x order.
pub fn select_axis(areas: &[Option<f64>; 3]) -> Option<PlaneAxis> {
    let mut best: Option<(PlaneAxis, f64)> = None;
    for axis in PlaneAxis::ALL {
        if let Some(a) = areas[axis.dim()] {
            if best.is_none_or(|(_, b)| a < b) {
                best = Some((axis, a));
            }
        }
    }
    best.map(|(axis, _)| axis)
}

/// Segments the planes through `seed` and picks the tracking axis, or `None`
/// when no plane yields an accepted mask.
pub fn plane_select<S: Segmenter + ?Sized>(
    vol: &Volume3D,
    seed: Seed,
    backend: &mut S,
    cfg: &EngineConfig,
) -> Result<Option<PlaneChoice>> {
    if !vol.contains(seed.pos) {
        return Err(Error::SeedOutOfBounds { seed: seed.pos, shape: vol.shape() });
    }
    let mut areas = [None; 3];
    let mut results: [Option<SegmentResult2D>; 3] = [None, None, None];
    for axis in PlaneAxis::ALL {
        if cfg.restrict_axis.is_some_and(|only| only != axis) {
            continue;
        }
        let (index, row, col) = axis.project(seed.pos);
        let image = extract_plane(vol, axis, index)?;
        let res = segment(backend, &image, &Prompt::point(row, col), cfg.min_mask_px)?;
        if res.accepted(cfg.tau) {
            areas[axis.dim()] = Some(res.mask.area() as f64 * image.pixel_area());
            results[axis.dim()] = Some(res);
        }
    }
    Ok(select_axis(&areas).map(|axis| PlaneChoice {
        axis,
        result: results[axis.dim()].take().expect("selected axis has a result"),
        areas,
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn step(self, index: usize, len: usize) -> Option<usize> {
        match self {
            Direction::Forward => (index + 1 < len).then_some(index + 1),
            Direction::Backward => index.checked_sub(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Reached the first or last slice.
    Boundary,
    /// The backend returned a mask below the confidence threshold.
    LowConfidence,
    /// The backend returned nothing after cleanup.
    EmptyMask,
    /// `max_steps` slices were tracked.
    StepBudget,
}

/// Where a tracked direction stopped inside the volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalPrompt {
    /// Prompt point of the last accepted slice, lifted to 3D.
    pub pos: Voxel,
    pub direction: Direction,
    pub reason: StopReason,
}

/// A branch followed through consecutive slices along one axis.
#[derive(Clone, Debug)]
pub struct TrackedSegment {
    pub axis: PlaneAxis,
    /// Accepted slice masks keyed by slice index.
    pub slices: BTreeMap<usize, Mask2D>,
    /// Stop reasons for forward then backward tracking.
    pub stops: [StopReason; 2],
    /// Interior stops, which seed turning-point sampling.
    pub terminals: Vec<TerminalPrompt>,
    pub steps: usize,
}

impl TrackedSegment {
    pub fn voxels(&self) -> Vec<Voxel> {
        let mut out = Vec::new();
        for (&index, mask) in &self.slices {
            out.extend(mask.pixels().map(|(r, c)| self.axis.lift(index, r, c)));
        }
        out
    }
}

/// Propagates `initial` from the seed slice in both directions along `axis`.
pub fn track<S: Segmenter + ?Sized>(
    vol: &Volume3D,
    seed: Seed,
    axis: PlaneAxis,
    initial: Mask2D,
    backend: &mut S,
    cfg: &EngineConfig,
) -> Result<TrackedSegment> {
    let len = vol.shape()[axis.dim()];
    let (start, _, _) = axis.project(seed.pos);
    let mut slices = BTreeMap::new();
    slices.insert(start, initial);
    let mut stops = [StopReason::Boundary; 2];
    let mut terminals = Vec::new();
    let mut steps = 0;
    for (d, direction) in [Direction::Forward, Direction::Backward].into_iter().enumerate() {
        let mut index = start;
        let mut taken = 0;
        let reason = loop {
            let prompt = make_prompt(&slices[&index], cfg.gamma)?;
            let Some(next) = direction.step(index, len) else {
                break StopReason::Boundary;
            };
            if taken >= cfg.max_steps {
                terminals.push(terminal(axis, index, &prompt, direction, StopReason::StepBudget));
                break StopReason::StepBudget;
            }
            let image = extract_plane(vol, axis, next)?;
            let res = segment(backend, &image, &prompt, cfg.min_mask_px)?;
            taken += 1;
            if !res.accepted(cfg.tau) {
                let why = if res.mask.is_empty() { StopReason::EmptyMask } else { StopReason::LowConfidence };
                terminals.push(terminal(axis, index, &prompt, direction, why));
                break why;
            }
            slices.insert(next, res.mask);
            index = next;
        };
        stops[d] = reason;
        steps += taken;
    }
    Ok(TrackedSegment { axis, slices, stops, terminals, steps })
}

fn terminal(axis: PlaneAxis, index: usize, prompt: &Prompt, direction: Direction, reason: StopReason) -> TerminalPrompt {
    TerminalPrompt {
        pos: axis.lift(index, prompt.point.0, prompt.point.1),
        direction,
        reason,
    }
}

/// New seeds around a tracked segment.
///
/// In the default mode both planes orthogonal to `axis` through each terminal
/// point are segmented and `k_turning` farthest-point samples of each
/// accepted mask are returned. Order is deterministic and duplicates are
/// dropped.
pub fn sample_turning_points<S: Segmenter + ?Sized>(
    vol: &Volume3D,
    seg: &TrackedSegment,
    backend: &mut S,
    cfg: &EngineConfig,
) -> Result<Vec<Seed>> {
    let mut out: Vec<Seed> = Vec::new();
    match cfg.turning_points {
        TurningPointMode::Off => {}
        TurningPointMode::Dense => {
            let s = cfg.dense_stride;
            out.extend(
                seg.voxels()
                    .into_iter()
                    .filter(|v| v.iter().all(|c| c % s == 0))
                    .map(Seed::from),
            );
        }
        TurningPointMode::Fps => {
            for term in &seg.terminals {
                for plane in seg.axis.others() {
                    let (index, row, col) = plane.project(term.pos);
                    let image = extract_plane(vol, plane, index)?;
                    let res = segment(backend, &image, &Prompt::point(row, col), cfg.min_mask_px)?;
                    if !res.accepted(cfg.tau) {
                        continue;
                    }
                    let pixels: Vec<_> = res.mask.pixels().collect();
                    for (r, c) in fps(&pixels, cfg.k_turning)? {
                        out.push(Seed::from(plane.lift(index, r, c)));
                    }
                }
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|s| seen.insert(*s));
    Ok(out)
}
