//! Round trips and corruption handling of the interchange formats through
//! the public API.

use brainalign_core::datamodel::{
    read_accuracy_map, read_brain_dataset, read_feature_matrix, write_accuracy_map, write_brain_dataset,
    write_feature_matrix, AccuracyMap, Alignment, BrainDataset, Dtype, FeatureMatrix, FeatureMeta, FmriData, MegData,
};
use brainalign_core::Error;
use ndarray::{Array2, Array3};
use proptest::prelude::*;

fn meta() -> FeatureMeta {
    FeatureMeta {
        model_name: "toy".into(),
        layer: 3,
        context_length: 20,
        dataset_id: "ds".into(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn f64_features_round_trip_exactly(rows in 0usize..12, cols in 1usize..9, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bafm");
        let mut x = seed;
        let values = Array2::from_shape_fn((rows, cols), |_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 * 200.0 - 100.0
        });
        let m = FeatureMatrix::new(values, Alignment::Tr, meta()).unwrap().with_dtype(Dtype::F64);
        write_feature_matrix(&m, &path).unwrap();
        prop_assert_eq!(read_feature_matrix(&path).unwrap(), m);
    }

    #[test]
    fn f32_features_store_rounded_values(v in prop::collection::vec(-1e6f64..1e6, 1..40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bafm");
        let n = v.len();
        let m = FeatureMatrix::new(Array2::from_shape_vec((n, 1), v.clone()).unwrap(), Alignment::Word, meta())
            .unwrap()
            .with_dtype(Dtype::F32);
        write_feature_matrix(&m, &path).unwrap();
        let back = read_feature_matrix(&path).unwrap();
        for (a, b) in back.values().iter().zip(&v) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
    }
}

#[test]
fn every_truncation_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.baam");
    let acc = AccuracyMap::voxels(vec![0.25, 0.5, 0.75, 1.0], 10).unwrap();
    write_accuracy_map(&acc, &path).unwrap();
    let full = std::fs::read(&path).unwrap();
    for len in 0..full.len() {
        std::fs::write(&path, &full[..len]).unwrap();
        let err = read_accuracy_map(&path).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "length {len}: {err}");
    }
    std::fs::write(&path, &full).unwrap();
    assert_eq!(read_accuracy_map(&path).unwrap(), acc);
}

#[test]
fn wrong_magic_is_distinguished() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.baam");
    write_accuracy_map(&AccuracyMap::voxels(vec![0.5], 1).unwrap(), &path).unwrap();
    // reading an accuracy map as features
    let err = read_feature_matrix(&path).unwrap_err();
    assert_eq!(err.format_error().map(|f| f.code()), Some("bad-magic"));
}

#[test]
fn brain_datasets_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fmri = FmriData::new(Array2::from_shape_fn((6, 3), |(i, j)| (i * 3 + j) as f64), 2.0, vec![0, 0, 1, 3, 5]).unwrap();
    let ds = BrainDataset {
        recording: brainalign_core::datamodel::Recording::Fmri(fmri),
        dtype: Dtype::F64,
    };
    let p = dir.path().join("f.babd");
    write_brain_dataset(&ds, &p).unwrap();
    assert_eq!(read_brain_dataset(&p).unwrap(), ds);

    let meg = MegData::new(
        Array3::from_shape_fn((4, 6, 2), |(w, s, t)| (w * 100 + s * 10 + t) as f64),
        25.0,
        vec![0, 0, 0, 1, 1, 1],
    )
    .unwrap();
    let ds = BrainDataset::meg(meg);
    let p = dir.path().join("m.babd");
    write_brain_dataset(&ds, &p).unwrap();
    let back = read_brain_dataset(&p).unwrap();
    assert_eq!(back.as_meg().unwrap().data, ds.as_meg().unwrap().data);
    assert_eq!(back.as_meg().unwrap().sensor_locations, vec![0, 0, 0, 1, 1, 1]);
}
