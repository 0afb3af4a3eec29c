//! Feature-map files: three little-endian `u32` (H, W, C) followed by
//! `H*W*C` little-endian `f32` values, row-major over the grid.

use crate::layout::TokenGrid;
use crate::xattn::FeatureMap;
use crate::{Error, Matrix, Result};

const HEADER_LEN: usize = 12;

pub fn encode_matrix(grid: TokenGrid, data: &Matrix) -> Result<Vec<u8>> {
    if data.rows() != grid.len() {
        return Err(Error::Shape(format!("{} rows for {} tokens", data.rows(), grid.len())));
    }
    let dim = |v: usize| u32::try_from(v).map_err(|_| Error::Shape(format!("dimension {v} exceeds u32")));
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * data.as_slice().len());
    for v in [grid.height(), grid.width(), data.cols()] {
        out.extend_from_slice(&dim(v)?.to_le_bytes());
    }
    for &x in data.as_slice() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn encode_features(features: &FeatureMap) -> Result<Vec<u8>> {
    encode_matrix(features.grid(), features.data())
}

/// Decodes and validates a feature file; sizes are checked before allocating.
pub fn decode_features(bytes: &[u8]) -> Result<FeatureMap> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse(format!("feature file is {} bytes, header needs 12", bytes.len())));
    }
    let word = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]) as usize;
    let (h, w, c) = (word(0), word(4), word(8));
    let count = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(c))
        .ok_or_else(|| Error::Parse("feature dimensions overflow".into()))?;
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Parse("feature dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "feature file for {h}x{w}x{c} needs {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let grid = TokenGrid::new(h, w)?;
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    FeatureMap::new(grid, Matrix::from_vec(h * w, c, data)?)
}
