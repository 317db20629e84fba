use ndarray::Array2;

use crate::datamodel::{AccuracyMap, Granularity};
use crate::error::{Error, Result};

/// `A + B − A∪B` per output. Structurally bounded by [−1, 2]; values near
/// 0.5 mean the shared part is at chance.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedAccuracy {
    pub values: Array2<f64>,
    pub granularity: Granularity,
}

impl SharedAccuracy {
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }
}

/// Accuracy jointly attributable to feature sets A and B, given the map of
/// the concatenated features `A∪B`.
pub fn shared_accuracy(a: &AccuracyMap, b: &AccuracyMap, union: &AccuracyMap) -> Result<SharedAccuracy> {
    for (name, m) in [("B", b), ("A∪B", union)] {
        if m.shape() != a.shape() {
            return Err(Error::Data(format!(
                "map {name} has shape {:?}, A has {:?}",
                m.shape(),
                a.shape()
            )));
        }
        if m.n_repeats() != a.n_repeats() {
            return Err(Error::Data(format!(
                "map {name} has {} repeats, A has {}",
                m.n_repeats(),
                a.n_repeats()
            )));
        }
        if m.granularity() != a.granularity() {
            return Err(Error::Data(format!("map {name} has a different granularity from A")));
        }
    }
    let values = a.values() + b.values() - union.values();
    Ok(SharedAccuracy {
        values,
        granularity: a.granularity(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(v: &[f64]) -> AccuracyMap {
        AccuracyMap::voxels(v.to_vec(), 1000).unwrap()
    }

    #[test]
    fn hand_values() {
        let s = shared_accuracy(&map(&[0.8, 0.8]), &map(&[0.8, 0.5]), &map(&[0.8, 0.8])).unwrap();
        assert_eq!(s.as_slice(), &[0.8, 0.5]);
    }

    #[test]
    fn shape_and_repeat_mismatch() {
        assert!(shared_accuracy(&map(&[0.5]), &map(&[0.5, 0.5]), &map(&[0.5])).is_err());
        let other = AccuracyMap::voxels(vec![0.5], 10).unwrap();
        assert!(shared_accuracy(&map(&[0.5]), &other, &map(&[0.5])).is_err());
    }

    proptest! {
        #[test]
        fn symmetric(a in proptest::collection::vec(0.0f64..=1.0, 5),
                     b in proptest::collection::vec(0.0f64..=1.0, 5),
                     u in proptest::collection::vec(0.0f64..=1.0, 5)) {
            let ab = shared_accuracy(&map(&a), &map(&b), &map(&u)).unwrap();
            let ba = shared_accuracy(&map(&b), &map(&a), &map(&u)).unwrap();
            prop_assert_eq!(ab, ba);
        }
    }
}
