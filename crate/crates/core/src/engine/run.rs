use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{traverse, EngineConfig, Seed, TraversalEvent, VisitedSet};
use crate::error::{Error, Result};
use crate::segmenter::Segmenter;
use crate::volume::{linear_index, LabelVolume, Volume3D, Voxel};

/// Builds one backend per worker thread.
pub type SegmenterFactory<'a> = dyn Fn() -> Result<Box<dyn Segmenter + Send>> + Sync + 'a;

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// One id per fused structure, numbered from 1 in traversal order.
    pub labels: LabelVolume,
    pub events: Vec<TraversalEvent>,
    pub traversals: usize,
    pub truncated: bool,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index as root keeps results reproducible
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Merges voxel sets that share any voxel into one instance each.
///
/// Ids are assigned 1, 2, ... in order of each group's first non-empty set.
pub fn fuse(shape: [usize; 3], sets: &[Vec<Voxel>]) -> LabelVolume {
    let mut owner = vec![u32::MAX; shape.iter().product()];
    let mut uf = UnionFind::new(sets.len());
    for (t, set) in sets.iter().enumerate() {
        for &v in set {
            let i = linear_index(shape, v);
            match owner[i] {
                u32::MAX => owner[i] = t as u32,
                o => uf.union(o as usize, t),
            }
        }
    }
    let mut ids = vec![0u32; sets.len()];
    let mut next = 0;
    for t in (0..sets.len()).filter(|&t| !sets[t].is_empty()) {
        let root = uf.find(t);
        if ids[root] == 0 {
            next += 1;
            ids[root] = next;
        }
    }
    let mut labels = LabelVolume::zeros(shape);
    for (i, o) in owner.into_iter().enumerate() {
        if o != u32::MAX {
            labels.labels_mut()[i] = ids[uf.find(o as usize)];
        }
    }
    labels
}

fn finish(vol: &Volume3D, sets: &[Vec<Voxel>], events: Vec<TraversalEvent>, truncated: bool) -> Result<RunOutput> {
    let labels = fuse(vol.shape(), sets).with_voxel_size(vol.voxel_size_nm())?;
    Ok(RunOutput { labels, events, traversals: sets.len(), truncated })
}

fn check_seeds(vol: &Volume3D, seeds: &[Seed]) -> Result<()> {
    match seeds.iter().find(|s| !vol.contains(s.pos)) {
        Some(s) => Err(Error::SeedOutOfBounds { seed: s.pos, shape: vol.shape() }),
        None => Ok(()),
    }
}

/// Segments every structure reachable from `seeds` and fuses the results.
pub fn run<S: Segmenter + ?Sized>(vol: &Volume3D, seeds: &[Seed], backend: &mut S, cfg: &EngineConfig) -> Result<RunOutput> {
    cfg.validate()?;
    check_seeds(vol, seeds)?;
    if let Some(chunk) = cfg.chunk_shape {
        return run_chunked(vol, seeds, backend, cfg, chunk);
    }
    let visited = VisitedSet::new(vol.shape());
    let mut sets = Vec::with_capacity(seeds.len());
    let mut events = Vec::new();
    let mut truncated = false;
    for &seed in seeds {
        let t = traverse(vol, seed, backend, cfg, &visited)?;
        truncated |= t.truncated;
        events.extend(t.events);
        sets.push(t.voxels);
    }
    finish(vol, &sets, events, truncated)
}

/// Like [`run`] with seeds distributed over `workers` threads.
///
/// Each seed gets a private visited set so results do not depend on thread
/// scheduling; fusion merges the duplicated work. Chunked configs run on a
/// single backend.
pub fn run_parallel(
    vol: &Volume3D,
    seeds: &[Seed],
    factory: &SegmenterFactory<'_>,
    cfg: &EngineConfig,
    workers: usize,
) -> Result<RunOutput> {
    if workers <= 1 || cfg.chunk_shape.is_some() {
        let mut backend = factory()?;
        return run(vol, seeds, &mut backend, cfg);
    }
    cfg.validate()?;
    check_seeds(vol, seeds)?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<super::Traversal>>> = Mutex::new(vec![None; seeds.len()]);
    std::thread::scope(|scope| -> Result<()> {
        let handles: Vec<_> = (0..workers.min(seeds.len().max(1)))
            .map(|_| {
                scope.spawn(|| -> Result<()> {
                    let mut backend = factory()?;
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= seeds.len() {
                            return Ok(());
                        }
                        let visited = VisitedSet::new(vol.shape());
                        let t = traverse(vol, seeds[i], &mut backend, cfg, &visited)?;
                        slots.lock().expect("worker panicked")[i] = Some(t);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().map_err(|_| Error::Backend("worker thread panicked".into()))??;
        }
        Ok(())
    })?;
    let mut sets = Vec::with_capacity(seeds.len());
    let mut events = Vec::new();
    let mut truncated = false;
    for t in slots.into_inner().expect("worker panicked").into_iter().flatten() {
        truncated |= t.truncated;
        events.extend(t.events);
        sets.push(t.voxels);
    }
    finish(vol, &sets, events, truncated)
}

struct Grid {
    shape: [usize; 3],
    chunk: [usize; 3],
    overlap: usize,
    counts: [usize; 3],
}

impl Grid {
    fn new(shape: [usize; 3], chunk: [usize; 3], overlap: usize) -> Self {
        let counts = [0, 1, 2].map(|d| shape[d].div_ceil(chunk[d]));
        Self { shape, chunk, overlap, counts }
    }

    fn owner(&self, v: Voxel) -> usize {
        let c = [0, 1, 2].map(|d| v[d] / self.chunk[d]);
        (c[0] * self.counts[1] + c[1]) * self.counts[2] + c[2]
    }

    /// Halo-extended box of chunk `id`: (start, extent).
    fn extended(&self, id: usize) -> (Voxel, [usize; 3]) {
        let c = [id / (self.counts[1] * self.counts[2]), id / self.counts[2] % self.counts[1], id % self.counts[2]];
        let mut start = [0; 3];
        let mut extent = [0; 3];
        for d in 0..3 {
            let core0 = c[d] * self.chunk[d];
            let core1 = (core0 + self.chunk[d]).min(self.shape[d]);
            start[d] = core0.saturating_sub(self.overlap);
            extent[d] = (core1 + self.overlap).min(self.shape[d]) - start[d];
        }
        (start, extent)
    }
}

/// Representative seed per 26-connected component of `voxels`: the member
/// nearest the component centroid, ties to the smallest voxel.
fn component_seeds(mut voxels: Vec<Voxel>) -> Vec<Seed> {
    voxels.sort_unstable();
    let set: HashSet<Voxel> = voxels.iter().copied().collect();
    let mut done = HashSet::new();
    let mut out = Vec::new();
    for &start in &voxels {
        if !done.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let n = [v[0] as i64 + dz, v[1] as i64 + dy, v[2] as i64 + dx];
                        if n.iter().any(|&c| c < 0) {
                            continue;
                        }
                        let n = n.map(|c| c as usize);
                        if set.contains(&n) && done.insert(n) {
                            comp.push(n);
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        let k = comp.len() as f64;
        let mean = [0, 1, 2].map(|d| comp.iter().map(|v| v[d] as f64).sum::<f64>() / k);
        let dist = |v: &Voxel| (0..3).map(|d| (v[d] as f64 - mean[d]).powi(2)).sum::<f64>();
        comp.sort_unstable();
        let mut best = comp[0];
        for v in &comp {
            if dist(v) < dist(&best) {
                best = *v;
            }
        }
        out.push(Seed::from(best));
    }
    out
}

/// Chunked execution: each chunk plus a halo is processed as an independent
/// sub-volume. Segment voxels that land in a neighbour's core are handed to
/// that neighbour as seeds, and overlapping results are fused.
fn run_chunked<S: Segmenter + ?Sized>(
    vol: &Volume3D,
    seeds: &[Seed],
    backend: &mut S,
    cfg: &EngineConfig,
    chunk: [usize; 3],
) -> Result<RunOutput> {
    let grid = Grid::new(vol.shape(), chunk, cfg.chunk_overlap);
    let mut cache: HashMap<usize, (Volume3D, VisitedSet, Voxel)> = HashMap::new();
    let mut pending: VecDeque<(usize, Seed)> = VecDeque::new();
    let mut submitted = HashSet::new();
    for &s in seeds {
        let job = (grid.owner(s.pos), s);
        if submitted.insert(job) {
            pending.push_back(job);
        }
    }
    let mut sets = Vec::new();
    let mut events = Vec::new();
    let mut truncated = false;
    while let Some((id, seed)) = pending.pop_front() {
        let (sub, visited, start) = match cache.entry(id) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let (start, extent) = grid.extended(id);
                e.insert((vol.crop(start, extent)?, VisitedSet::new(extent), start))
            }
        };
        let (sub, visited, start) = (&*sub, &*visited, *start);
        let local = Seed::from([0, 1, 2].map(|d| seed.pos[d] - start[d]));
        let t = traverse(sub, local, backend, cfg, visited)?;
        truncated |= t.truncated;
        let global: Vec<Voxel> = t
            .voxels
            .iter()
            .map(|v| [v[0] + start[0], v[1] + start[1], v[2] + start[2]])
            .collect();
        let mut handoff: BTreeMap<usize, Vec<Voxel>> = BTreeMap::new();
        for &v in &global {
            let owner = grid.owner(v);
            if owner != id {
                handoff.entry(owner).or_default().push(v);
            }
        }
        for (owner, vs) in handoff {
            for s in component_seeds(vs) {
                if submitted.insert((owner, s)) {
                    pending.push_back((owner, s));
                }
            }
        }
        events.extend(t.events.into_iter().map(|mut e| {
            e.seed = [0, 1, 2].map(|d| e.seed[d] + start[d]);
            e
        }));
        sets.push(global);
    }
    finish(vol, &sets, events, truncated)
}
