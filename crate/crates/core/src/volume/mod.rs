//! Volume data model and the image-processing primitives shared by the rest
//! of the crate.
//!
//! Volumes are stored z-major, then y, then x. Every coordinate triple in the
//! crate is ordered `[z, y, x]`.

mod components;
mod filters;
mod io;
mod morph;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use components::{
    connected_components_2d, connected_components_3d, ComponentStats, Components, Connectivity2,
    Connectivity3,
};
pub use filters::{deflicker_z, gaussian_blur3d, gaussian_blur3d_f64, mean_std, percentile_threshold};
pub use io::{load_labels, load_volume, save_labels, save_volume};
pub use morph::{
    component_at, fill_holes_2d, largest_component, nearest_component, remove_small_components,
    remove_small_mask_components,
};

pub type Voxel = [usize; 3];

/// Tracking axis. Declaration order gives the tie-break order `z < y < x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneAxis {
    Z,
    Y,
    X,
}

impl PlaneAxis {
    pub const ALL: [PlaneAxis; 3] = [PlaneAxis::Z, PlaneAxis::Y, PlaneAxis::X];

    /// Position of this axis in a `[z, y, x]` triple.
    pub fn dim(self) -> usize {
        match self {
            PlaneAxis::Z => 0,
            PlaneAxis::Y => 1,
            PlaneAxis::X => 2,
        }
    }

    /// The `(row, col)` dimensions of the plane orthogonal to this axis.
    pub fn plane_dims(self) -> (usize, usize) {
        match self {
            PlaneAxis::Z => (1, 2),
            PlaneAxis::Y => (0, 2),
            PlaneAxis::X => (0, 1),
        }
    }

    pub fn others(self) -> [PlaneAxis; 2] {
        match self {
            PlaneAxis::Z => [PlaneAxis::Y, PlaneAxis::X],
            PlaneAxis::Y => [PlaneAxis::Z, PlaneAxis::X],
            PlaneAxis::X => [PlaneAxis::Z, PlaneAxis::Y],
        }
    }

    /// Voxel coordinate of in-plane pixel `(row, col)` on slice `index`.
    pub fn lift(self, index: usize, row: usize, col: usize) -> Voxel {
        let mut v = [0; 3];
        let (rd, cd) = self.plane_dims();
        v[self.dim()] = index;
        v[rd] = row;
        v[cd] = col;
        v
    }

    /// Inverse of [`PlaneAxis::lift`]: `(index, row, col)`.
    pub fn project(self, v: Voxel) -> (usize, usize, usize) {
        let (rd, cd) = self.plane_dims();
        (v[self.dim()], v[rd], v[cd])
    }

    pub fn name(self) -> &'static str {
        match self {
            PlaneAxis::Z => "z",
            PlaneAxis::Y => "y",
            PlaneAxis::X => "x",
        }
    }
}

impl std::fmt::Display for PlaneAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PlaneAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z" | "Z" => Ok(PlaneAxis::Z),
            "y" | "Y" => Ok(PlaneAxis::Y),
            "x" | "X" => Ok(PlaneAxis::X),
            other => Err(Error::InvalidConfig(format!("unknown axis {other:?}"))),
        }
    }
}

/// Storage type of intensity volumes. Values are held widened to `u16`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U8,
    U16,
}

impl Dtype {
    pub fn max_value(self) -> u16 {
        match self {
            Dtype::U8 => u8::MAX as u16,
            Dtype::U16 => u16::MAX,
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::U16 => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::U8 => "u8",
            Dtype::U16 => "u16",
        }
    }
}

fn check_shape(shape: [usize; 3], len: usize) -> Result<()> {
    if shape.contains(&0) {
        return Err(Error::InvalidVolume(format!("shape {shape:?} has a zero extent")));
    }
    let want = shape[0] * shape[1] * shape[2];
    if want != len {
        return Err(Error::InvalidVolume(format!(
            "shape {shape:?} needs {want} voxels, got {len}"
        )));
    }
    Ok(())
}

fn check_voxel_size(voxel_size_nm: [f64; 3]) -> Result<()> {
    if voxel_size_nm.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidVolume(format!(
            "voxel size {voxel_size_nm:?} must be positive"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn linear_index(shape: [usize; 3], v: Voxel) -> usize {
    (v[0] * shape[1] + v[1]) * shape[2] + v[2]
}

#[inline]
pub(crate) fn unravel(shape: [usize; 3], i: usize) -> Voxel {
    let x = i % shape[2];
    let y = (i / shape[2]) % shape[1];
    let z = i / (shape[1] * shape[2]);
    [z, y, x]
}

/// Scalar intensity volume.
///
/// `offset` locates this volume inside a larger parent volume; it is zero for
/// volumes loaded from disk and set by [`Volume3D::crop`].
#[derive(Clone, Debug, PartialEq)]
pub struct Volume3D {
    shape: [usize; 3],
    dtype: Dtype,
    voxel_size_nm: [f64; 3],
    offset: Voxel,
    data: Vec<u16>,
}

impl Volume3D {
    pub fn new(shape: [usize; 3], dtype: Dtype, voxel_size_nm: [f64; 3], data: Vec<u16>) -> Result<Self> {
        check_shape(shape, data.len())?;
        check_voxel_size(voxel_size_nm)?;
        let max = dtype.max_value();
        if data.iter().any(|&v| v > max) {
            return Err(Error::InvalidVolume(format!(
                "value exceeds {} range",
                dtype.as_str()
            )));
        }
        Ok(Self {
            shape,
            dtype,
            voxel_size_nm,
            offset: [0; 3],
            data,
        })
    }

    pub fn filled(shape: [usize; 3], dtype: Dtype, value: u16) -> Self {
        Self::new(shape, dtype, [1.0; 3], vec![value; shape.iter().product()])
            .expect("filled volume must be well formed")
    }

    /// Builds a volume by evaluating `f` at every voxel.
    pub fn from_fn(shape: [usize; 3], dtype: Dtype, mut f: impl FnMut(Voxel) -> u16) -> Self {
        let n: usize = shape.iter().product();
        let max = dtype.max_value();
        let data = (0..n).map(|i| f(unravel(shape, i)).min(max)).collect();
        Self::new(shape, dtype, [1.0; 3], data).expect("from_fn volume must be well formed")
    }

    pub fn with_voxel_size(mut self, voxel_size_nm: [f64; 3]) -> Result<Self> {
        check_voxel_size(voxel_size_nm)?;
        self.voxel_size_nm = voxel_size_nm;
        Ok(self)
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn voxel_size_nm(&self) -> [f64; 3] {
        self.voxel_size_nm
    }

    pub fn offset(&self) -> Voxel {
        self.offset
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn contains(&self, v: Voxel) -> bool {
        v[0] < self.shape[0] && v[1] < self.shape[1] && v[2] < self.shape[2]
    }

    #[inline]
    pub fn get(&self, v: Voxel) -> u16 {
        self.data[linear_index(self.shape, v)]
    }

    pub fn set(&mut self, v: Voxel, value: u16) {
        let i = linear_index(self.shape, v);
        self.data[i] = value.min(self.dtype.max_value());
    }

    /// Copies the box `[start, start + extent)` into a new volume whose
    /// offset records where it came from.
    pub fn crop(&self, start: Voxel, extent: [usize; 3]) -> Result<Self> {
        for d in 0..3 {
            if extent[d] == 0 || start[d] + extent[d] > self.shape[d] {
                return Err(Error::IndexOutOfRange {
                    index: start[d] + extent[d],
                    extent: self.shape[d],
                });
            }
        }
        let mut data = Vec::with_capacity(extent.iter().product());
        for z in start[0]..start[0] + extent[0] {
            for y in start[1]..start[1] + extent[1] {
                let row = linear_index(self.shape, [z, y, start[2]]);
                data.extend_from_slice(&self.data[row..row + extent[2]]);
            }
        }
        Ok(Self {
            shape: extent,
            dtype: self.dtype,
            voxel_size_nm: self.voxel_size_nm,
            offset: [
                self.offset[0] + start[0],
                self.offset[1] + start[1],
                self.offset[2] + start[2],
            ],
            data,
        })
    }

    pub(crate) fn from_parts(
        shape: [usize; 3],
        dtype: Dtype,
        voxel_size_nm: [f64; 3],
        offset: Voxel,
        data: Vec<u16>,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape,
            dtype,
            voxel_size_nm,
            offset,
            data,
        }
    }
}

/// Instance-labeled volume, 0 = background.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    shape: [usize; 3],
    voxel_size_nm: [f64; 3],
    offset: Voxel,
    labels: Vec<u32>,
}

impl LabelVolume {
    pub fn new(shape: [usize; 3], labels: Vec<u32>) -> Result<Self> {
        check_shape(shape, labels.len())?;
        Ok(Self {
            shape,
            voxel_size_nm: [1.0; 3],
            offset: [0; 3],
            labels,
        })
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        Self::new(shape, vec![0; shape.iter().product()]).expect("zero volume must be well formed")
    }

    pub fn with_voxel_size(mut self, voxel_size_nm: [f64; 3]) -> Result<Self> {
        check_voxel_size(voxel_size_nm)?;
        self.voxel_size_nm = voxel_size_nm;
        Ok(self)
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn voxel_size_nm(&self) -> [f64; 3] {
        self.voxel_size_nm
    }

    pub fn offset(&self) -> Voxel {
        self.offset
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub fn contains(&self, v: Voxel) -> bool {
        v[0] < self.shape[0] && v[1] < self.shape[1] && v[2] < self.shape[2]
    }

    #[inline]
    pub fn get(&self, v: Voxel) -> u32 {
        self.labels[linear_index(self.shape, v)]
    }

    #[inline]
    pub fn set(&mut self, v: Voxel, label: u32) {
        let i = linear_index(self.shape, v);
        self.labels[i] = label;
    }

    /// Sorted distinct nonzero ids.
    pub fn ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Voxel count per nonzero id, sorted by id.
    pub fn counts(&self) -> Vec<(u32, usize)> {
        let mut map = std::collections::BTreeMap::new();
        for &l in &self.labels {
            if l != 0 {
                *map.entry(l).or_insert(0usize) += 1;
            }
        }
        map.into_iter().collect()
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    /// All voxels carrying `id`, in scan order.
    pub fn voxels_of(&self, id: u32) -> Vec<Voxel> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == id)
            .map(|(i, _)| unravel(self.shape, i))
            .collect()
    }

    /// Labels on the plane orthogonal to `axis` at global slice `index`,
    /// restricted to the window `[corner, corner + (rows, cols))` given in
    /// global in-plane coordinates. Out-of-volume pixels read as 0.
    pub fn plane_window(
        &self,
        axis: PlaneAxis,
        index: usize,
        corner: (usize, usize),
        rows: usize,
        cols: usize,
    ) -> Vec<u32> {
        let mut out = vec![0u32; rows * cols];
        let d = axis.dim();
        let (rd, cd) = axis.plane_dims();
        if index < self.offset[d] || index - self.offset[d] >= self.shape[d] {
            return out;
        }
        let li = index - self.offset[d];
        for r in 0..rows {
            let gr = corner.0 + r;
            if gr < self.offset[rd] || gr - self.offset[rd] >= self.shape[rd] {
                continue;
            }
            for c in 0..cols {
                let gc = corner.1 + c;
                if gc < self.offset[cd] || gc - self.offset[cd] >= self.shape[cd] {
                    continue;
                }
                let v = axis.lift(li, gr - self.offset[rd], gc - self.offset[cd]);
                out[r * cols + c] = self.get(v);
            }
        }
        out
    }
}

/// Where an [`Image2D`] was cut from, in global (uncropped) coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlaneOrigin {
    pub axis: PlaneAxis,
    pub index: usize,
    /// Global `(row, col)` of pixel `(0, 0)`.
    pub corner: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Image2D {
    rows: usize,
    cols: usize,
    pixel_size: [f64; 2],
    origin: Option<PlaneOrigin>,
    data: Vec<u16>,
}

impl Image2D {
    pub fn new(rows: usize, cols: usize, data: Vec<u16>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidVolume(format!(
                "image {rows}x{cols} with {} pixels",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            pixel_size: [1.0, 1.0],
            origin: None,
            data,
        })
    }

    pub fn with_pixel_size(mut self, pixel_size: [f64; 2]) -> Self {
        self.pixel_size = pixel_size;
        self
    }

    pub fn with_origin(mut self, origin: PlaneOrigin) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixel_size(&self) -> [f64; 2] {
        self.pixel_size
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_size[0] * self.pixel_size[1]
    }

    pub fn origin(&self) -> Option<PlaneOrigin> {
        self.origin
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.data[row * self.cols + col]
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.rows && col < self.cols
    }
}

/// Binary in-plane mask with a cached pixel count.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask2D {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    area_px: usize,
}

impl Mask2D {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
            area_px: 0,
        }
    }

    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::InvalidVolume(format!(
                "mask {rows}x{cols} with {} bits",
                bits.len()
            )));
        }
        let area_px = bits.iter().filter(|&&b| b).count();
        Ok(Self {
            rows,
            cols,
            bits,
            area_px,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let bits = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self::from_bits(rows, cols, bits).expect("sized by construction")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn area(&self) -> usize {
        self.area_px
    }

    pub fn is_empty(&self) -> bool {
        self.area_px == 0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let i = row * self.cols + col;
        if self.bits[i] != value {
            self.bits[i] = value;
            if value {
                self.area_px += 1;
            } else {
                self.area_px -= 1;
            }
        }
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / cols, i % cols))
    }

    pub fn centroid(&self) -> Option<(f64, f64)> {
        if self.is_empty() {
            return None;
        }
        let (mut sr, mut sc) = (0.0, 0.0);
        for (r, c) in self.pixels() {
            sr += r as f64;
            sc += c as f64;
        }
        let n = self.area_px as f64;
        Some((sr / n, sc / n))
    }

    /// Tight bounding box `(row, col, height, width)`.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut it = self.pixels();
        let (r0, c0) = it.next()?;
        let (mut rmin, mut rmax, mut cmin, mut cmax) = (r0, r0, c0, c0);
        for (r, c) in it {
            rmin = rmin.min(r);
            rmax = rmax.max(r);
            cmin = cmin.min(c);
            cmax = cmax.max(c);
        }
        Some((rmin, cmin, rmax - rmin + 1, cmax - cmin + 1))
    }

    pub fn intersection(&self, other: &Mask2D) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    pub fn iou(&self, other: &Mask2D) -> f64 {
        let inter = self.intersection(other);
        let union = self.area_px + other.area_px - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Cuts the plane orthogonal to `axis` at (local) slice `index`.
///
/// `z` gives a `(y, x)` image, `y` gives `(z, x)` and `x` gives `(z, y)`.
pub fn extract_plane(vol: &Volume3D, axis: PlaneAxis, index: usize) -> Result<Image2D> {
    let shape = vol.shape();
    let d = axis.dim();
    if index >= shape[d] {
        return Err(Error::IndexOutOfRange {
            index,
            extent: shape[d],
        });
    }
    let (rd, cd) = axis.plane_dims();
    let (rows, cols) = (shape[rd], shape[cd]);
    let src = vol.data();
    let mut data = Vec::with_capacity(rows * cols);
    match axis {
        PlaneAxis::Z => {
            let start = index * rows * cols;
            data.extend_from_slice(&src[start..start + rows * cols]);
        }
        PlaneAxis::Y => {
            for z in 0..rows {
                let start = linear_index(shape, [z, index, 0]);
                data.extend_from_slice(&src[start..start + cols]);
            }
        }
        PlaneAxis::X => {
            for z in 0..rows {
                for y in 0..cols {
                    data.push(src[linear_index(shape, [z, y, index])]);
                }
            }
        }
    }
    let vs = vol.voxel_size_nm();
    let off = vol.offset();
    Ok(Image2D {
        rows,
        cols,
        pixel_size: [vs[rd], vs[cd]],
        origin: Some(PlaneOrigin {
            axis,
            index: off[d] + index,
            corner: (off[rd], off[cd]),
        }),
        data,
    })
}
