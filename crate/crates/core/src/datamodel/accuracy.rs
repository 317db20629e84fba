use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{binfmt, read_matrix, write_matrix, Dtype, ACCURACY_MAGIC};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Voxel,
    SensorLocationTimebin,
}

/// Mean classification accuracy per output.
///
/// Voxel maps are `n_voxels × 1`; MEG maps are `n_locations × n_timebins`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMap {
    values: Array2<f64>,
    n_repeats: usize,
    granularity: Granularity,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    granularity: Granularity,
    n_repeats: usize,
}

impl AccuracyMap {
    pub fn new(values: Array2<f64>, n_repeats: usize, granularity: Granularity) -> Result<Self> {
        if n_repeats == 0 {
            return Err(Error::Data("accuracy map needs at least one repeat".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("accuracy {v} outside [0, 1]")));
        }
        Ok(AccuracyMap {
            values,
            n_repeats,
            granularity,
        })
    }

    pub fn voxels(values: Vec<f64>, n_repeats: usize) -> Result<Self> {
        let n = values.len();
        Self::new(Array2::from_shape_vec((n, 1), values).unwrap(), n_repeats, Granularity::Voxel)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Flat row-major view of all accuracies.
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("accuracy maps are kept in standard layout")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Number of classification trials behind every value.
    pub fn n_repeats(&self) -> usize {
        self.n_repeats
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }
}

pub fn read_accuracy_map(path: &Path) -> Result<AccuracyMap> {
    let (values, _) = read_matrix(path, ACCURACY_MAGIC)?;
    let sidecar: Sidecar = binfmt::read_sidecar(path)?;
    AccuracyMap::new(values.as_standard_layout().into_owned(), sidecar.n_repeats, sidecar.granularity)
        .map_err(|e| binfmt::sidecar_error(path, e.to_string()))
}

/// Accuracy maps are always written as f64 so that reruns compare bit for bit.
pub fn write_accuracy_map(map: &AccuracyMap, path: &Path) -> Result<()> {
    write_matrix(path, ACCURACY_MAGIC, Dtype::F64, &map.values)?;
    binfmt::write_sidecar(
        path,
        &Sidecar {
            granularity: map.granularity,
            n_repeats: map.n_repeats,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_meg_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("acc.baam");
        let values = Array2::from_shape_fn((102, 20), |(l, t)| 0.5 + (l as f64 - t as f64) / 1000.0);
        let map = AccuracyMap::new(values, 4000, Granularity::SensorLocationTimebin).unwrap();
        write_accuracy_map(&map, &path).unwrap();
        assert_eq!(read_accuracy_map(&path).unwrap(), map);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(AccuracyMap::voxels(vec![0.2, 1.01], 10).is_err());
        assert!(AccuracyMap::voxels(vec![0.2], 0).is_err());
    }
}
