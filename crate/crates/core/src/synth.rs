//! Synthetic vessel trees: piecewise-linear centerlines rasterized as
//! capsules, bright on a dark noisy background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::engine::Seed;
use crate::error::{Error, Result};
use crate::volume::{Dtype, LabelVolume, Volume3D, Voxel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub shape: [usize; 3],
    pub voxel_size_nm: [f64; 3],
    pub n_trees: usize,
    /// Trunk radius range in voxels of the finest axis.
    pub radius_range: (f64, f64),
    /// Chance of a side branch at each segment end, used when `bifurcations`
    /// is unset.
    pub branch_prob: f64,
    /// Exact number of side branches per tree, drawn from this range.
    pub bifurcations: Option<(usize, usize)>,
    pub segment_len_range: (f64, f64),
    pub segments_per_branch: (usize, usize),
    pub turn_angle_max: f64,
    pub fg_intensity: u8,
    pub bg_intensity: u8,
    pub noise_sigma: f64,
    /// Per-slice additive offset drawn from `[-flicker_amp, flicker_amp]`.
    pub flicker_amp: f64,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            shape: [128, 128, 128],
            voxel_size_nm: [1.0; 3],
            n_trees: 1,
            radius_range: (2.0, 6.0),
            branch_prob: 0.3,
            bifurcations: None,
            segment_len_range: (15.0, 30.0),
            segments_per_branch: (2, 4),
            turn_angle_max: 30.0,
            fg_intensity: 200,
            bg_intensity: 50,
            noise_sigma: 10.0,
            flicker_amp: 0.0,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::DegenerateSpec(m));
        let (r0, r1) = self.radius_range;
        if !(r0 >= 1.0 && r1 >= r0) {
            return bad(format!("radius_range {:?} needs 1 <= r_min <= r_max", self.radius_range));
        }
        if self.shape.iter().any(|&n| (n as f64) < 2.0 * r1 + 1.0) {
            return bad(format!("radius {r1} does not fit in shape {:?}", self.shape));
        }
        if self.voxel_size_nm.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return bad(format!("voxel size {:?} must be positive", self.voxel_size_nm));
        }
        let (l0, l1) = self.segment_len_range;
        if !(l0 > 0.0 && l1 >= l0) {
            return bad(format!("segment_len_range {:?}", self.segment_len_range));
        }
        let (s0, s1) = self.segments_per_branch;
        if !(s0 >= 1 && s1 >= s0) {
            return bad(format!("segments_per_branch {:?}", self.segments_per_branch));
        }
        if let Some((b0, b1)) = self.bifurcations {
            if b1 < b0 {
                return bad(format!("bifurcations {:?}", self.bifurcations));
            }
        }
        if !(0.0..=1.0).contains(&self.branch_prob) {
            return bad(format!("branch_prob {}", self.branch_prob));
        }
        if self.fg_intensity as f64 <= self.bg_intensity as f64 + 3.0 * self.noise_sigma {
            return bad(format!(
                "fg {} must exceed bg {} by more than 3 noise sigma {}",
                self.fg_intensity, self.bg_intensity, self.noise_sigma
            ));
        }
        Ok(())
    }
}

/// A line segment swept by a ball, in voxel-index coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: [f64; 3],
    pub b: [f64; 3],
    /// Radius in voxels of the finest axis.
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: [f64; 3], b: [f64; 3], radius: f64) -> Self {
        Self { a, b, radius }
    }
}

/// Polyline through `points` as consecutive capsules of one radius.
pub fn polyline(points: &[[f64; 3]], radius: f64) -> Vec<Capsule> {
    points.windows(2).map(|w| Capsule::new(w[0], w[1], radius)).collect()
}

fn dist2_to_segment(p: [f64; 3], c: &Capsule, scale: [f64; 3]) -> f64 {
    let ab = [0, 1, 2].map(|d| (c.b[d] - c.a[d]) * scale[d]);
    let ap = [0, 1, 2].map(|d| (p[d] - c.a[d]) * scale[d]);
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((0..3).map(|d| ab[d] * ap[d]).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    (0..3).map(|d| (ap[d] - t * ab[d]).powi(2)).sum()
}

/// Labels every voxel whose center lies within a capsule of tree `i` with
/// id `i + 1`. Voxels already taken by an earlier tree are left alone.
pub fn rasterize(shape: [usize; 3], voxel_size_nm: [f64; 3], trees: &[Vec<Capsule>]) -> LabelVolume {
    let mut labels = LabelVolume::zeros(shape);
    let finest = voxel_size_nm.iter().copied().fold(f64::INFINITY, f64::min);
    for (t, capsules) in trees.iter().enumerate() {
        let id = t as u32 + 1;
        for c in capsules {
            let r_phys = c.radius * finest;
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            let mut empty = false;
            for d in 0..3 {
                let reach = r_phys / voxel_size_nm[d];
                let min = c.a[d].min(c.b[d]) - reach;
                let max = c.a[d].max(c.b[d]) + reach;
                if max < 0.0 || min > (shape[d] - 1) as f64 {
                    empty = true;
                }
                lo[d] = min.ceil().max(0.0) as usize;
                hi[d] = (max.floor().max(0.0) as usize).min(shape[d] - 1);
            }
            if empty {
                continue;
            }
            for z in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for x in lo[2]..=hi[2] {
                        let v = [z, y, x];
                        if labels.get(v) == 0 && dist2_to_segment(v.map(|i| i as f64), c, voxel_size_nm) <= r_phys * r_phys {
                            labels.set(v, id);
                        }
                    }
                }
            }
        }
    }
    labels.with_voxel_size(voxel_size_nm).expect("voxel size validated")
}

/// Intensities from labels: `fg` on labeled voxels, `bg` elsewhere, plus
/// Gaussian noise and optional per-slice flicker.
pub fn render(labels: &LabelVolume, spec: &SynthSpec, rng: &mut impl Rng) -> Volume3D {
    let [nz, ny, nx] = labels.shape();
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("finite sigma");
    let flicker: Vec<f64> = (0..nz)
        .map(|_| if spec.flicker_amp > 0.0 { rng.random_range(-spec.flicker_amp..=spec.flicker_amp) } else { 0.0 })
        .collect();
    let mut data = Vec::with_capacity(nz * ny * nx);
    for (i, &l) in labels.labels().iter().enumerate() {
        let base = if l > 0 { spec.fg_intensity } else { spec.bg_intensity } as f64;
        let n = if spec.noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
        data.push((base + n + flicker[i / (ny * nx)]).round().clamp(0.0, 255.0) as u16);
    }
    Volume3D::new(labels.shape(), Dtype::U8, spec.voxel_size_nm, data).expect("sized by construction")
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / n)
}

/// Rotates unit vector `d` by `angle` radians toward a random perpendicular.
fn turn(d: [f64; 3], angle: f64, rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let w: [f64; 3] = UnitSphere.sample(rng);
        let dot = w[0] * d[0] + w[1] * d[1] + w[2] * d[2];
        let u = [0, 1, 2].map(|k| w[k] - dot * d[k]);
        let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        if n > 1e-6 {
            let u = u.map(|c| c / n);
            return normalize([0, 1, 2].map(|k| angle.cos() * d[k] + angle.sin() * u[k]));
        }
    }
}

fn inside(p: [f64; 3], shape: [usize; 3]) -> bool {
    (0..3).all(|d| p[d] >= 0.0 && p[d] <= (shape[d] - 1) as f64)
}

struct Branch {
    nodes: Vec<[f64; 3]>,
    dir: [f64; 3],
    radius: f64,
}

/// Grows one branch until its segment budget runs out or it leaves the
/// volume; the last node may lie outside and is clipped at rasterization.
fn grow(start: [f64; 3], dir: [f64; 3], radius: f64, spec: &SynthSpec, rng: &mut impl Rng) -> Branch {
    let n_seg = rng.random_range(spec.segments_per_branch.0..=spec.segments_per_branch.1);
    let max_turn = spec.turn_angle_max.to_radians();
    let mut nodes = vec![start];
    let mut dir = dir;
    for s in 0..n_seg {
        if s > 0 && max_turn > 0.0 {
            dir = turn(dir, rng.random_range(0.0..=max_turn), rng);
        }
        let (l0, l1) = spec.segment_len_range;
        let len = rng.random_range(l0..=l1);
        let last = *nodes.last().expect("starts non-empty");
        let next = [0, 1, 2].map(|d| last[d] + len * dir[d]);
        nodes.push(next);
        if !inside(next, spec.shape) {
            break;
        }
    }
    Branch { nodes, dir, radius }
}

/// Centerline capsules of one tree and its trunk seed position.
fn grow_tree(spec: &SynthSpec, rng: &mut impl Rng) -> (Vec<Capsule>, [f64; 3]) {
    let (r0, r1) = spec.radius_range;
    let radius = rng.random_range(r0..=r1);
    // start in the central half so the trunk has room to grow
    let start = [0, 1, 2].map(|d| {
        let n = spec.shape[d] as f64;
        rng.random_range(n * 0.25..=n * 0.75)
    });
    let dir: [f64; 3] = UnitSphere.sample(rng);
    let trunk = grow(start, dir, radius, spec, rng);
    let first_mid = [0, 1, 2].map(|d| (trunk.nodes[0][d] + trunk.nodes[1][d]) / 2.0);
    let seed = if inside(first_mid, spec.shape) { first_mid } else { start };
    let mut branches = vec![trunk];
    let spawn = |parent: &Branch, rng: &mut ChaCha8Rng| -> Option<Branch> {
        // interior nodes only: the last node may be outside the volume
        let candidates: Vec<usize> = (1..parent.nodes.len()).filter(|&i| inside(parent.nodes[i], spec.shape)).collect();
        if candidates.is_empty() {
            return None;
        }
        let at = parent.nodes[candidates[rng.random_range(0..candidates.len())]];
        let angle = rng.random_range(30f64..=70.0).to_radians();
        let dir = turn(parent.dir, angle, rng);
        let radius = (parent.radius * rng.random_range(0.6..=0.9)).max(r0);
        Some(grow(at, dir, radius, spec, rng))
    };
    let mut local = ChaCha8Rng::from_rng(rng);
    match spec.bifurcations {
        Some((b0, b1)) => {
            let want = local.random_range(b0..=b1);
            let mut tries = 0;
            while branches.len() < want + 1 && tries < 50 * (want + 1) {
                tries += 1;
                let parent = local.random_range(0..branches.len());
                if let Some(b) = spawn(&branches[parent], &mut local) {
                    branches.push(b);
                }
            }
        }
        None => {
            let mut i = 0;
            while i < branches.len() && branches.len() < 16 {
                let segs = branches[i].nodes.len() - 1;
                for _ in 0..segs {
                    if local.random::<f64>() < spec.branch_prob {
                        if let Some(b) = spawn(&branches[i], &mut local) {
                            branches.push(b);
                        }
                    }
                }
                i += 1;
            }
        }
    }
    let capsules = branches.iter().flat_map(|b| polyline(&b.nodes, b.radius)).collect();
    (capsules, seed)
}

/// Nearest voxel labeled `id` to `p`, ties to the smallest voxel.
fn nearest_labeled(labels: &LabelVolume, id: u32, p: [f64; 3]) -> Option<Voxel> {
    let rounded = [0, 1, 2].map(|d| (p[d].round().max(0.0) as usize).min(labels.shape()[d] - 1));
    if labels.get(rounded) == id {
        return Some(rounded);
    }
    let mut best: Option<(f64, Voxel)> = None;
    for v in labels.voxels_of(id) {
        let d: f64 = (0..3).map(|k| (v[k] as f64 - p[k]).powi(2)).sum();
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, v));
        }
    }
    best.map(|b| b.1)
}

/// Generated intensities, ground-truth labels (one id per tree) and one
/// trunk seed per tree that kept at least one voxel.
pub fn generate(spec: &SynthSpec) -> Result<(Volume3D, LabelVolume, Vec<Seed>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut trees = Vec::with_capacity(spec.n_trees);
    let mut seed_points = Vec::with_capacity(spec.n_trees);
    for _ in 0..spec.n_trees {
        let (capsules, seed) = grow_tree(spec, &mut rng);
        trees.push(capsules);
        seed_points.push(seed);
    }
    let labels = rasterize(spec.shape, spec.voxel_size_nm, &trees);
    let seeds = seed_points
        .iter()
        .enumerate()
        .filter_map(|(t, &p)| nearest_labeled(&labels, t as u32 + 1, p).map(Seed::from))
        .collect();
    let vol = render(&labels, spec, &mut rng);
    Ok((vol, labels, seeds))
}
