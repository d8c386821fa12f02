use super::{linear_index, Volume3D};

/// Reflect-pads an index into `[0, n)`, duplicating the edge sample
/// (`d c b a | a b c d`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

fn kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

fn convolve_axis(data: &[f64], shape: [usize; 3], axis: usize, k: &[f64]) -> Vec<f64> {
    let radius = (k.len() / 2) as isize;
    let n = shape[axis];
    let mut out = vec![0.0; data.len()];
    for z in 0..shape[0] {
        for y in 0..shape[1] {
            for x in 0..shape[2] {
                let v = [z, y, x];
                let pos = v[axis] as isize;
                let mut acc = 0.0;
                for (j, w) in k.iter().enumerate() {
                    let mut u = v;
                    u[axis] = reflect(pos + j as isize - radius, n);
                    acc += w * data[linear_index(shape, u)];
                }
                out[linear_index(shape, v)] = acc;
            }
        }
    }
    out
}

/// Separable Gaussian blur at full precision, truncated at `ceil(3 sigma)`.
pub fn gaussian_blur3d_f64(vol: &Volume3D, sigma: f64) -> Vec<f64> {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    let mut data: Vec<f64> = vol.data().iter().map(|&v| v as f64).collect();
    if sigma == 0.0 {
        return data;
    }
    let k = kernel(sigma);
    for axis in 0..3 {
        data = convolve_axis(&data, vol.shape(), axis, &k);
    }
    data
}

/// Gaussian blur re-quantized by rounding to the input dtype.
pub fn gaussian_blur3d(vol: &Volume3D, sigma: f64) -> Volume3D {
    if sigma == 0.0 {
        return vol.clone();
    }
    let max = vol.dtype().max_value() as f64;
    let data = gaussian_blur3d_f64(vol, sigma)
        .into_iter()
        .map(|v| v.round().clamp(0.0, max) as u16)
        .collect();
    Volume3D::from_parts(vol.shape(), vol.dtype(), vol.voxel_size_nm(), vol.offset(), data)
}

/// Nearest-rank percentile: the smallest intensity `t` with at least `q`% of
/// voxels `<= t`.
pub fn percentile_threshold(vol: &Volume3D, q: f64) -> u16 {
    assert!(!vol.is_empty(), "percentile of an empty volume");
    let q = q.clamp(0.0, 100.0);
    let n = vol.len();
    let rank = ((q * n as f64) / 100.0).ceil().max(1.0) as usize;
    let mut hist = vec![0usize; vol.dtype().max_value() as usize + 1];
    for &v in vol.data() {
        hist[v as usize] += 1;
    }
    let mut seen = 0;
    for (value, &count) in hist.iter().enumerate() {
        seen += count;
        if seen >= rank {
            return value as u16;
        }
    }
    unreachable!("rank never exceeds voxel count")
}

pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        sum += v;
        sq += v * v;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0);
    (mean, var.sqrt())
}

/// Shifts every z-slice additively so its mean matches the moving average of
/// slice means over a centered `window` (truncated at the volume ends).
pub fn deflicker_z(vol: &Volume3D, window: usize) -> Volume3D {
    assert!(window >= 1 && window % 2 == 1, "window must be odd and positive");
    if window == 1 {
        return vol.clone();
    }
    let [nz, ny, nx] = vol.shape();
    let plane = ny * nx;
    let means: Vec<f64> = vol
        .data()
        .chunks_exact(plane)
        .map(|s| s.iter().map(|&v| v as f64).sum::<f64>() / plane as f64)
        .collect();
    let half = window / 2;
    let max = vol.dtype().max_value() as f64;
    let mut data = Vec::with_capacity(vol.len());
    for z in 0..nz {
        let lo = z.saturating_sub(half);
        let hi = (z + half).min(nz - 1);
        let target = means[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
        let shift = target - means[z];
        data.extend(
            vol.data()[z * plane..(z + 1) * plane]
                .iter()
                .map(|&v| (v as f64 + shift).round().clamp(0.0, max) as u16),
        );
    }
    Volume3D::from_parts(vol.shape(), vol.dtype(), vol.voxel_size_nm(), vol.offset(), data)
}
