use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use super::{plane_select, sample_turning_points, track, EngineConfig, Seed, StopReason, TraversalOrder, VisitedSet};
use crate::error::Result;
use crate::segmenter::Segmenter;
use crate::volume::{linear_index, unravel, PlaneAxis, Volume3D, Voxel};

/// One popped seed, for structured logs.
#[derive(Clone, Debug, Serialize)]
pub struct TraversalEvent {
    pub seed: Voxel,
    pub axis: Option<PlaneAxis>,
    pub already_visited: bool,
    pub steps: usize,
    pub stops: Option<[StopReason; 2]>,
    pub new_pairs: usize,
    pub new_seeds: usize,
}

/// Result of exploring one tree from a seed, in the volume's local
/// coordinates.
#[derive(Clone, Debug, Default)]
pub struct Traversal {
    /// Sorted, distinct segmented voxels.
    pub voxels: Vec<Voxel>,
    pub events: Vec<TraversalEvent>,
    /// Segments that marked at least one new (voxel, axis) pair.
    pub productive: usize,
    /// Stopped by `max_iterations` with seeds still pending.
    pub truncated: bool,
}

/// Explores the structure containing `seed`.
///
/// Each tracked segment marks its voxels under the tracking axis in
/// `visited`; a popped seed whose chosen axis is already marked there is
/// skipped. Turning-point seeds are only added for segments that marked at
/// least one new pair, and a seed is enqueued at most once, so the loop ends
/// after at most `3 * voxels` productive segments.
pub fn traverse<S: Segmenter + ?Sized>(
    vol: &Volume3D,
    seed: Seed,
    backend: &mut S,
    cfg: &EngineConfig,
    visited: &VisitedSet,
) -> Result<Traversal> {
    let shape = vol.shape();
    let mut pending = VecDeque::from([seed]);
    let mut queued = HashSet::from([seed]);
    let mut hit = HashSet::new();
    let mut out = Traversal::default();
    let mut popped = 0usize;
    loop {
        let next = match cfg.traversal_order {
            TraversalOrder::Fifo => pending.pop_front(),
            TraversalOrder::Lifo => pending.pop_back(),
        };
        let Some(s) = next else { break };
        if cfg.max_iterations.is_some_and(|cap| popped >= cap) {
            out.truncated = true;
            break;
        }
        popped += 1;
        let mut event = TraversalEvent {
            seed: s.pos,
            axis: None,
            already_visited: false,
            steps: 0,
            stops: None,
            new_pairs: 0,
            new_seeds: 0,
        };
        if let Some(choice) = plane_select(vol, s, backend, cfg)? {
            event.axis = Some(choice.axis);
            if visited.is_visited(choice.axis, s.pos) {
                event.already_visited = true;
            } else {
                let seg = track(vol, s, choice.axis, choice.result.mask, backend, cfg)?;
                let voxels = seg.voxels();
                event.steps = seg.steps;
                event.stops = Some(seg.stops);
                event.new_pairs = visited.mark(choice.axis, &voxels);
                hit.extend(voxels.iter().map(|&v| linear_index(shape, v)));
                if event.new_pairs > 0 {
                    out.productive += 1;
                    for t in sample_turning_points(vol, &seg, backend, cfg)? {
                        if queued.insert(t) {
                            pending.push_back(t);
                            event.new_seeds += 1;
                        }
                    }
                }
            }
        }
        log::debug!(
            "seed {:?} axis {:?} steps {} new {} seeds {}",
            event.seed,
            event.axis,
            event.steps,
            event.new_pairs,
            event.new_seeds
        );
        out.events.push(event);
    }
    let mut idx: Vec<usize> = hit.into_iter().collect();
    idx.sort_unstable();
    out.voxels = idx.into_iter().map(|i| unravel(shape, i)).collect();
    Ok(out)
}
