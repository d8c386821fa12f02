use std::sync::atomic::{AtomicU8, Ordering};

use crate::volume::{linear_index, PlaneAxis, Voxel};

/// Which voxels have been covered by tracking along each axis.
///
/// One byte per voxel holds a bit per axis. Marking is an atomic
/// test-and-set, so concurrent traversals may share one set.
#[derive(Debug)]
pub struct VisitedSet {
    shape: [usize; 3],
    bits: Vec<AtomicU8>,
}

impl VisitedSet {
    pub fn new(shape: [usize; 3]) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            bits: (0..n).map(|_| AtomicU8::new(0)).collect(),
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    fn bit(axis: PlaneAxis) -> u8 {
        1 << axis.dim()
    }

    pub fn is_visited(&self, axis: PlaneAxis, v: Voxel) -> bool {
        self.bits[linear_index(self.shape, v)].load(Ordering::Relaxed) & Self::bit(axis) != 0
    }

    /// Marks `voxels` under `axis`; returns how many were not marked before.
    pub fn mark(&self, axis: PlaneAxis, voxels: &[Voxel]) -> usize {
        let bit = Self::bit(axis);
        voxels
            .iter()
            .filter(|&&v| self.bits[linear_index(self.shape, v)].fetch_or(bit, Ordering::Relaxed) & bit == 0)
            .count()
    }

    /// Total marked `(voxel, axis)` pairs.
    pub fn marked_pairs(&self) -> usize {
        self.bits
            .iter()
            .map(|b| b.load(Ordering::Relaxed).count_ones() as usize)
            .sum()
    }
}
