use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{binfmt, read_matrix, write_matrix, Alignment, Dtype, FEATURE_MAGIC};
use crate::error::{Error, Result};

/// Provenance of a feature matrix: which network, layer and context window
/// produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub model_name: String,
    /// 0 is the token-embedding layer.
    pub layer: u32,
    /// Number of most recent words fed to the network (k ≥ 1).
    pub context_length: u32,
    pub dataset_id: String,
}

impl Default for FeatureMeta {
    fn default() -> Self {
        FeatureMeta {
            model_name: String::new(),
            layer: 0,
            context_length: 1,
            dataset_id: String::new(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    alignment: Alignment,
    #[serde(flatten)]
    meta: FeatureMeta,
}

/// Rows of network-derived features, aligned to words or TRs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    alignment: Alignment,
    meta: FeatureMeta,
    dtype: Dtype,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, alignment: Alignment, meta: FeatureMeta) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("feature matrix has a non-finite value at flat index {i}")));
        }
        if meta.context_length == 0 {
            return Err(Error::Data("context_length must be at least 1".into()));
        }
        Ok(FeatureMatrix {
            values,
            alignment,
            meta,
            dtype: Dtype::F32,
        })
    }

    /// Sets the on-disk dtype used by [`write_feature_matrix`].
    pub fn with_dtype(mut self, dtype: Dtype) -> Self {
        self.dtype = dtype;
        self
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn alignment(&self) -> Alignment {
        self.alignment
    }

    pub fn meta(&self) -> &FeatureMeta {
        &self.meta
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }
}

pub fn read_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let (values, dtype) = read_matrix(path, FEATURE_MAGIC)?;
    let sidecar: Sidecar = binfmt::read_sidecar(path)?;
    if sidecar.meta.context_length == 0 {
        return Err(binfmt::sidecar_error(path, "context_length must be at least 1"));
    }
    Ok(FeatureMatrix {
        values,
        alignment: sidecar.alignment,
        meta: sidecar.meta,
        dtype,
    })
}

pub fn write_feature_matrix(m: &FeatureMatrix, path: &Path) -> Result<()> {
    write_matrix(path, FEATURE_MAGIC, m.dtype, &m.values)?;
    binfmt::write_sidecar(
        path,
        &Sidecar {
            alignment: m.alignment,
            meta: m.meta.clone(),
        },
    )
}
