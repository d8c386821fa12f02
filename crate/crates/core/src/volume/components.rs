use std::collections::VecDeque;

use super::{linear_index, unravel, LabelVolume, Mask2D, Voxel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Connectivity3 {
    C6,
    #[default]
    C26,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Connectivity2 {
    C4,
    #[default]
    C8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentStats {
    pub voxel_count: usize,
    /// Mean `[z, y, x]` of the member voxels.
    pub centroid: [f64; 3],
    /// First member in scan order.
    pub first: Voxel,
}

/// Result of a labeling pass. Labels run `1..=stats.len()` in first-encounter
/// scan order; `stats[i]` describes label `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Components {
    pub shape: [usize; 3],
    pub labels: Vec<u32>,
    pub stats: Vec<ComponentStats>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn into_label_volume(self) -> LabelVolume {
        LabelVolume::new(self.shape, self.labels).expect("shape checked at construction")
    }

    /// Mask of one label for 2D (`nz == 1`) results.
    pub fn mask_of(&self, label: u32) -> Mask2D {
        debug_assert_eq!(self.shape[0], 1);
        let bits = self.labels.iter().map(|&l| l == label).collect();
        Mask2D::from_bits(self.shape[1], self.shape[2], bits).expect("sized by construction")
    }
}

fn offsets(full: bool) -> Vec<[isize; 3]> {
    let mut out = Vec::new();
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let nonzero = (dz != 0) as u8 + (dy != 0) as u8 + (dx != 0) as u8;
                if nonzero == 0 {
                    continue;
                }
                if full || nonzero == 1 {
                    out.push([dz, dy, dx]);
                }
            }
        }
    }
    out
}

fn label(bin: &[bool], shape: [usize; 3], full: bool) -> Components {
    let n: usize = shape.iter().product();
    assert_eq!(bin.len(), n, "binary input must match shape");
    let offs = offsets(full);
    let mut labels = vec![0u32; n];
    let mut stats = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !bin[start] || labels[start] != 0 {
            continue;
        }
        let id = stats.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut count = 0usize;
        let mut sum = [0f64; 3];
        while let Some(i) = queue.pop_front() {
            let v = unravel(shape, i);
            count += 1;
            for d in 0..3 {
                sum[d] += v[d] as f64;
            }
            for o in &offs {
                let mut w = [0usize; 3];
                let mut inside = true;
                for d in 0..3 {
                    let c = v[d] as isize + o[d];
                    if c < 0 || c >= shape[d] as isize {
                        inside = false;
                        break;
                    }
                    w[d] = c as usize;
                }
                if !inside {
                    continue;
                }
                let j = linear_index(shape, w);
                if bin[j] && labels[j] == 0 {
                    labels[j] = id;
                    queue.push_back(j);
                }
            }
        }
        let c = count as f64;
        stats.push(ComponentStats {
            voxel_count: count,
            centroid: [sum[0] / c, sum[1] / c, sum[2] / c],
            first: unravel(shape, start),
        });
    }
    Components {
        shape,
        labels,
        stats,
    }
}

pub fn connected_components_3d(bin: &[bool], shape: [usize; 3], conn: Connectivity3) -> Components {
    label(bin, shape, conn == Connectivity3::C26)
}

/// 2D labeling; the result has shape `[1, rows, cols]` and centroids carry a
/// zero z component.
pub fn connected_components_2d(mask: &Mask2D, conn: Connectivity2) -> Components {
    label(mask.bits(), [1, mask.rows(), mask.cols()], conn == Connectivity2::C8)
}
