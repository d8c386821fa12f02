//! Initial seeds from a global brightness threshold.

use serde::{Deserialize, Serialize};

use crate::engine::Seed;
use crate::error::{Error, Result};
use crate::volume::{connected_components_3d, linear_index, percentile_threshold, unravel, Connectivity3, Volume3D};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedingConfig {
    /// Voxels strictly brighter than this intensity percentile are foreground.
    pub eta_percentile: f64,
    /// Components smaller than this are treated as noise; 0 keeps all.
    pub min_component_voxels: usize,
}

impl Default for SeedingConfig {
    fn default() -> Self {
        Self {
            eta_percentile: 98.0,
            min_component_voxels: 50,
        }
    }
}

impl SeedingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.eta_percentile) {
            return Err(Error::InvalidConfig(format!(
                "eta_percentile {} outside [0, 100]",
                self.eta_percentile
            )));
        }
        Ok(())
    }
}

/// One seed per bright 26-connected component, largest component first.
///
/// The seed is the rounded centroid, or the member voxel nearest the
/// centroid when rounding lands outside the component.
pub fn generate_seeds(vol: &Volume3D, cfg: &SeedingConfig) -> Vec<Seed> {
    if vol.is_empty() {
        return Vec::new();
    }
    let shape = vol.shape();
    let t = percentile_threshold(vol, cfg.eta_percentile);
    let fg: Vec<bool> = vol.data().iter().map(|&v| v > t).collect();
    let comps = connected_components_3d(&fg, shape, Connectivity3::C26);
    let mut order: Vec<usize> = (0..comps.len())
        .filter(|&i| comps.stats[i].voxel_count >= cfg.min_component_voxels)
        .collect();
    // stable: equal sizes keep scan order
    order.sort_by_key(|&i| std::cmp::Reverse(comps.stats[i].voxel_count));
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); comps.len()];
    for (i, &l) in comps.labels.iter().enumerate() {
        if l > 0 {
            members[l as usize - 1].push(i);
        }
    }
    order
        .into_iter()
        .map(|i| {
            let stats = &comps.stats[i];
            let label = i as u32 + 1;
            let c = stats.centroid;
            let rounded = [0, 1, 2].map(|d| (c[d].round() as usize).min(shape[d] - 1));
            if comps.labels[linear_index(shape, rounded)] == label {
                return Seed::from(rounded);
            }
            let mut best = (f64::INFINITY, stats.first);
            for &j in &members[i] {
                let v = unravel(shape, j);
                let d: f64 = (0..3).map(|k| (v[k] as f64 - c[k]).powi(2)).sum();
                if d < best.0 {
                    best = (d, v);
                }
            }
            Seed::from(best.1)
        })
        .collect()
}

pub fn seeds_to_json(seeds: &[Seed]) -> String {
    serde_json::to_string(seeds).expect("seeds always serialize")
}

pub fn seeds_from_json(text: &str) -> Result<Vec<Seed>> {
    Ok(serde_json::from_str(text)?)
}
