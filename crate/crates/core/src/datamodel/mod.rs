//! Domain types and interchange formats.
//!
//! Binary payloads are little-endian and row-major. Matrix files (`BAFM`
//! features, `BAAM` accuracy maps) share one header layout:
//!
//! ```text
//! magic [u8; 4] | version u32 | dtype u8 (0 = f32, 1 = f64) | n_rows u64 | n_cols u64 | payload
//! ```
//!
//! Metadata lives in a JSON sidecar next to the payload (`<stem>.meta.json`).

mod accuracy;
mod binfmt;
mod brain;
mod feature;
mod fit;
mod graph;
mod roi;
mod significance;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use accuracy::{read_accuracy_map, write_accuracy_map, AccuracyMap, Granularity};
pub use binfmt::sidecar_path;
pub use brain::{read_brain_dataset, write_brain_dataset, BrainDataset, FmriData, MegData, Modality, Recording};
pub use feature::{read_feature_matrix, write_feature_matrix, FeatureMatrix, FeatureMeta};
pub use fit::{fold_weights_name, write_encoding_fit, write_fold_weights, EncodingFit, FoldFit};
pub use graph::{read_adjacency, write_adjacency, AdjacencyGraph};
pub use roi::{read_rois, write_rois, Roi, RoiLabels};
pub use significance::SignificanceResult;

use crate::error::{Error, FormatError, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"BAFM";
pub const ACCURACY_MAGIC: &[u8; 4] = b"BAAM";
pub const BRAIN_MAGIC: &[u8; 4] = b"BABD";

/// On-disk element type of a binary payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn flag(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    pub fn from_flag(flag: u8) -> std::result::Result<Self, FormatError> {
        match flag {
            0 => Ok(Dtype::F32),
            1 => Ok(Dtype::F64),
            other => Err(FormatError::UnknownDtype(other)),
        }
    }
}

/// What one row of a feature matrix is aligned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    Word,
    Tr,
}

/// Reads a bare matrix file with the given magic. No sidecar is consulted.
pub fn read_matrix(path: &Path, magic: &[u8; 4]) -> Result<(Array2<f64>, Dtype)> {
    let bytes = binfmt::read_file(path)?;
    decode_matrix(&bytes, magic).map_err(|e| Error::format(path, e))
}

fn decode_matrix(bytes: &[u8], magic: &[u8; 4]) -> std::result::Result<(Array2<f64>, Dtype), FormatError> {
    let mut r = binfmt::Reader::new(bytes);
    r.magic(magic)?;
    r.version()?;
    let dtype = Dtype::from_flag(r.u8()?)?;
    let rows = r.u64()? as usize;
    let cols = r.u64()? as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| FormatError::DimensionMismatch(format!("{rows}x{cols} overflows")))?;
    let values = r.payload(dtype, count)?;
    let m = Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| FormatError::DimensionMismatch(e.to_string()))?;
    Ok((m, dtype))
}

/// Writes a bare matrix file (header + payload), without sidecar.
pub fn write_matrix(path: &Path, magic: &[u8; 4], dtype: Dtype, m: &Array2<f64>) -> Result<()> {
    use std::io::Write;
    let mut w = binfmt::create(path)?;
    let io = |e| Error::io(path, e);
    w.write_all(magic).map_err(io)?;
    w.write_all(&binfmt::FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&[dtype.flag()]).map_err(io)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(m.ncols() as u64).to_le_bytes()).map_err(io)?;
    binfmt::write_payload(&mut w, dtype, m.iter().copied()).map_err(io)?;
    w.flush().map_err(io)
}
