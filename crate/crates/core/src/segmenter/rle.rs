//! Row-major run-length encoding of binary masks.
//!
//! Runs alternate background/foreground starting with background (the first
//! run may be 0) and must sum to `rows * cols`.

use crate::error::{Error, Result};
use crate::volume::Mask2D;

pub fn encode(mask: &Mask2D) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for &b in mask.bits() {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn decode(rows: usize, cols: usize, runs: &[u32]) -> Result<Mask2D> {
    let total: u64 = runs.iter().map(|&r| r as u64).sum();
    if total != (rows * cols) as u64 {
        return Err(Error::Protocol(format!(
            "rle runs sum to {total}, expected {rows}x{cols} = {}",
            rows * cols
        )));
    }
    let mut bits = Vec::with_capacity(rows * cols);
    for (i, &run) in runs.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, run as usize));
    }
    Mask2D::from_bits(rows, cols, bits)
}
