//! Zero-shot comparison methods: per-chunk intensity thresholding and
//! slice-to-slice IoU tracking of automatic masks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmenter::{auto_masks, Segmenter, DEFAULT_MIN_MASK_PX};
use crate::volume::{
    connected_components_3d, extract_plane, gaussian_blur3d_f64, linear_index, mean_std, remove_small_components,
    Connectivity3, LabelVolume, Mask2D, PlaneAxis, Volume3D,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColorThresholdConfig {
    pub chunk_shape: [usize; 3],
    pub sigma: f64,
    /// Foreground is brighter than chunk mean plus this many std devs.
    pub k_std: f64,
    pub min_voxels: usize,
}

impl Default for ColorThresholdConfig {
    fn default() -> Self {
        Self {
            chunk_shape: [10, 512, 512],
            sigma: 1.0,
            k_std: 3.0,
            min_voxels: 1000,
        }
    }
}

/// Blurs and thresholds each chunk on its own statistics, then labels
/// 26-connected components and drops small ones. Ids are compact, in scan
/// order.
pub fn color_threshold_baseline(vol: &Volume3D, cfg: &ColorThresholdConfig) -> Result<LabelVolume> {
    if cfg.chunk_shape.contains(&0) {
        return Err(Error::InvalidConfig(format!("chunk_shape {:?} has a zero extent", cfg.chunk_shape)));
    }
    let shape = vol.shape();
    let mut fg = vec![false; vol.len()];
    for z0 in (0..shape[0]).step_by(cfg.chunk_shape[0]) {
        for y0 in (0..shape[1]).step_by(cfg.chunk_shape[1]) {
            for x0 in (0..shape[2]).step_by(cfg.chunk_shape[2]) {
                let start = [z0, y0, x0];
                let extent = [0, 1, 2].map(|d| cfg.chunk_shape[d].min(shape[d] - start[d]));
                let chunk = vol.crop(start, extent)?;
                let blurred = gaussian_blur3d_f64(&chunk, cfg.sigma);
                let (mean, std) = mean_std(blurred.iter().copied());
                let t = mean + cfg.k_std * std;
                let mut i = 0;
                for z in 0..extent[0] {
                    for y in 0..extent[1] {
                        for x in 0..extent[2] {
                            if blurred[i] > t {
                                fg[linear_index(shape, [z0 + z, y0 + y, x0 + x])] = true;
                            }
                            i += 1;
                        }
                    }
                }
            }
        }
    }
    let labels = connected_components_3d(&fg, shape, Connectivity3::C26).into_label_volume();
    let kept = remove_small_components(&labels, cfg.min_voxels);
    compact(kept).with_voxel_size(vol.voxel_size_nm())
}

/// Renumbers ids to 1..k in order of first appearance.
fn compact(mut labels: LabelVolume) -> LabelVolume {
    let mut map = std::collections::HashMap::new();
    for l in labels.labels_mut() {
        if *l != 0 {
            let next = map.len() as u32 + 1;
            *l = *map.entry(*l).or_insert(next);
        }
    }
    labels
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IouTrackingConfig {
    pub iou_threshold: f64,
    pub min_mask_px: usize,
}

impl Default for IouTrackingConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            min_mask_px: DEFAULT_MIN_MASK_PX,
        }
    }
}

/// Links automatic z-slice masks into 3D instances.
///
/// Every mask not yet claimed starts a new track, which then repeatedly
/// claims the unclaimed mask of maximum IoU in the next slice while that IoU
/// exceeds the threshold. Ids are assigned in track creation order.
pub fn iou_tracking_baseline<S: Segmenter + ?Sized>(
    vol: &Volume3D,
    backend: &mut S,
    cfg: &IouTrackingConfig,
) -> Result<LabelVolume> {
    if !backend.capabilities().auto_masks {
        return Err(Error::CapabilityMissing("auto"));
    }
    let nz = vol.shape()[0];
    let mut slices: Vec<Vec<Mask2D>> = Vec::with_capacity(nz);
    for z in 0..nz {
        let image = extract_plane(vol, PlaneAxis::Z, z)?;
        slices.push(auto_masks(backend, &image, cfg.min_mask_px)?.into_iter().map(|r| r.mask).collect());
    }
    let mut claimed: Vec<Vec<bool>> = slices.iter().map(|s| vec![false; s.len()]).collect();
    let mut labels = LabelVolume::zeros(vol.shape()).with_voxel_size(vol.voxel_size_nm())?;
    let mut next_id = 0u32;
    for z in 0..nz {
        for k in 0..slices[z].len() {
            if claimed[z][k] {
                continue;
            }
            next_id += 1;
            claimed[z][k] = true;
            let (mut cz, mut ck) = (z, k);
            loop {
                for (r, c) in slices[cz][ck].pixels() {
                    labels.set(PlaneAxis::Z.lift(cz, r, c), next_id);
                }
                if cz + 1 >= nz {
                    break;
                }
                let mut best: Option<(usize, f64)> = None;
                for (j, m) in slices[cz + 1].iter().enumerate() {
                    if claimed[cz + 1][j] {
                        continue;
                    }
                    let iou = slices[cz][ck].iou(m);
                    if best.is_none_or(|(_, b)| iou > b) {
                        best = Some((j, iou));
                    }
                }
                match best {
                    Some((j, iou)) if iou > cfg.iou_threshold => {
                        claimed[cz + 1][j] = true;
                        cz += 1;
                        ck = j;
                    }
                    _ => break,
                }
            }
        }
    }
    Ok(labels)
}
