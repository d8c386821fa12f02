use crate::error::{Error, Result};

fn d2(a: (usize, usize), b: (usize, usize)) -> u64 {
    let dr = a.0.abs_diff(b.0) as u64;
    let dc = a.1.abs_diff(b.1) as u64;
    dr * dr + dc * dc
}

/// Greedy farthest-point sampling of `min(k, len)` pixels.
///
/// Starts at the point nearest the centroid, then repeatedly adds the point
/// maximizing the distance to the chosen set. Ties always go to the smallest
/// `(row, col)`.
pub fn fps(points: &[(usize, usize)], k: usize) -> Result<Vec<(usize, usize)>> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = points.len() as f64;
    let mr = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let mc = points.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let mut first = 0;
    let mut first_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (p.0 as f64 - mr).powi(2) + (p.1 as f64 - mc).powi(2);
        if d < first_d || (d == first_d && *p < points[first]) {
            first = i;
            first_d = d;
        }
    }
    let want = k.min(points.len());
    let mut chosen = Vec::with_capacity(want);
    let mut taken = vec![false; points.len()];
    let mut min_d: Vec<u64> = points.iter().map(|&p| d2(p, points[first])).collect();
    chosen.push(points[first]);
    taken[first] = true;
    while chosen.len() < want {
        let mut best: Option<usize> = None;
        for i in 0..points.len() {
            if taken[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if min_d[i] > min_d[b] || (min_d[i] == min_d[b] && points[i] < points[b]) => Some(i),
                keep => keep,
            };
        }
        let Some(b) = best else { break };
        taken[b] = true;
        chosen.push(points[b]);
        for i in 0..points.len() {
            min_d[i] = min_d[i].min(d2(points[i], points[b]));
        }
    }
    Ok(chosen)
}
