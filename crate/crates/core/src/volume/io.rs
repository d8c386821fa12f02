//! The `.volj` container: a JSON header next to a raw little-endian payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dtype, LabelVolume, Volume3D};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    shape: [usize; 3],
    dtype: String,
    #[serde(default = "unit_voxel")]
    voxel_size_nm: [f64; 3],
    data: String,
}

fn unit_voxel() -> [f64; 3] {
    [1.0; 3]
}

fn read_header(path: &Path) -> Result<(Header, Vec<u8>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&text)?;
    let payload_path = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.data);
    let payload = fs::read(&payload_path).map_err(|e| Error::io(payload_path, e))?;
    Ok((header, payload))
}

fn payload_path_for(header_path: &Path) -> (PathBuf, String) {
    let stem = header_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "volume".to_owned());
    let name = format!("{stem}.raw");
    let dir = header_path.parent().unwrap_or_else(|| Path::new("."));
    (dir.join(&name), name)
}

fn write_container(path: &Path, header: Header, payload: &[u8]) -> Result<()> {
    let (raw_path, _) = payload_path_for(path);
    fs::write(&raw_path, payload).map_err(|e| Error::io(&raw_path, e))?;
    let text = serde_json::to_string_pretty(&header)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn expect_len(shape: [usize; 3], bytes_per: usize, actual: usize) -> Result<()> {
    let expected = shape.iter().product::<usize>() * bytes_per;
    if expected != actual {
        return Err(Error::PayloadSizeMismatch { expected, actual });
    }
    Ok(())
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let (header, payload) = read_header(path.as_ref())?;
    let dtype = match header.dtype.as_str() {
        "u8" => Dtype::U8,
        "u16" => Dtype::U16,
        other => return Err(Error::UnsupportedDtype(other.to_owned())),
    };
    expect_len(header.shape, dtype.bytes(), payload.len())?;
    let data = match dtype {
        Dtype::U8 => payload.iter().map(|&b| b as u16).collect(),
        Dtype::U16 => payload
            .chunks_exact(2)
            .map(|w| u16::from_le_bytes([w[0], w[1]]))
            .collect(),
    };
    Volume3D::new(header.shape, dtype, header.voxel_size_nm, data)
}

pub fn save_volume(path: impl AsRef<Path>, vol: &Volume3D) -> Result<()> {
    let path = path.as_ref();
    let payload: Vec<u8> = match vol.dtype() {
        Dtype::U8 => vol.data().iter().map(|&v| v as u8).collect(),
        Dtype::U16 => vol.data().iter().flat_map(|v| v.to_le_bytes()).collect(),
    };
    let header = Header {
        shape: vol.shape(),
        dtype: vol.dtype().as_str().to_owned(),
        voxel_size_nm: vol.voxel_size_nm(),
        data: payload_path_for(path).1,
    };
    write_container(path, header, &payload)
}

/// Loads a label volume. `u32` is the native label dtype; `u8` and `u16`
/// payloads are widened.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let (header, payload) = read_header(path.as_ref())?;
    let labels: Vec<u32> = match header.dtype.as_str() {
        "u8" => {
            expect_len(header.shape, 1, payload.len())?;
            payload.iter().map(|&b| b as u32).collect()
        }
        "u16" => {
            expect_len(header.shape, 2, payload.len())?;
            payload
                .chunks_exact(2)
                .map(|w| u16::from_le_bytes([w[0], w[1]]) as u32)
                .collect()
        }
        "u32" => {
            expect_len(header.shape, 4, payload.len())?;
            payload
                .chunks_exact(4)
                .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]))
                .collect()
        }
        other => return Err(Error::UnsupportedDtype(other.to_owned())),
    };
    LabelVolume::new(header.shape, labels)?.with_voxel_size(header.voxel_size_nm)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &LabelVolume) -> Result<()> {
    let path = path.as_ref();
    let payload: Vec<u8> = labels.labels().iter().flat_map(|v| v.to_le_bytes()).collect();
    let header = Header {
        shape: labels.shape(),
        dtype: "u32".to_owned(),
        voxel_size_nm: labels.voxel_size_nm(),
        data: payload_path_for(path).1,
    };
    write_container(path, header, &payload)
}
