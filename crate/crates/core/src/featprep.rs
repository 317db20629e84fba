//! Word → TR grouping, delayed design matrices and column normalization.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::datamodel::{Alignment, FeatureMatrix, FeatureMeta};
use crate::error::{Error, Result};

/// Columns whose population standard deviation falls below this are treated
/// as constant.
pub const CONSTANT_EPS: f64 = 1e-10;

/// Design matrix whose column block `j` holds the TR features delayed by
/// `delays[j]` TRs.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedDesign {
    pub values: Array2<f64>,
    pub delays: Vec<usize>,
    pub source_meta: FeatureMeta,
}

impl DelayedDesign {
    /// Width of one delay block (the source feature dimension).
    pub fn block_width(&self) -> usize {
        self.values.ncols() / self.delays.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
    pub constant: Vec<bool>,
}

/// How validation splits are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    /// Train and validation splits each normalized with their own statistics.
    #[default]
    Independent,
    /// Validation split normalized with the training statistics.
    TrainStats,
}

impl std::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(NormMode::Independent),
            "train-stats" => Ok(NormMode::TrainStats),
            other => Err(Error::Config(format!("unknown normalization mode {other:?}"))),
        }
    }
}

/// Averages the features of all words presented within each TR. TRs without
/// words get the zero vector.
pub fn group_by_tr(features: &FeatureMatrix, onsets: &[usize], n_trs: usize) -> Result<FeatureMatrix> {
    if features.alignment() != Alignment::Word {
        return Err(Error::Data("group_by_tr expects word-aligned features".into()));
    }
    if onsets.len() != features.n_rows() {
        return Err(Error::Data(format!(
            "{} word onsets for {} feature rows",
            onsets.len(),
            features.n_rows()
        )));
    }
    if let Some((w, t)) = onsets.iter().enumerate().find(|(_, &t)| t >= n_trs) {
        return Err(Error::Data(format!("word {w} has onset TR {t}, beyond {n_trs} TRs")));
    }
    let d = features.n_cols();
    // running mean: exact when all words of a TR share one vector
    let mut means = Array2::<f64>::zeros((n_trs, d));
    let mut counts = vec![0usize; n_trs];
    for (row, &t) in features.values().rows().into_iter().zip(onsets) {
        counts[t] += 1;
        let k = counts[t] as f64;
        means.row_mut(t).zip_mut_with(&row, |m, &x| *m += (x - *m) / k);
    }
    FeatureMatrix::new(means, Alignment::Tr, features.meta().clone()).map(|m| m.with_dtype(features.dtype()))
}

/// Concatenates copies of the TR features shifted by each delay. Rows before
/// the first available TR are zero-padded so the design stays row-aligned
/// with the recording.
pub fn build_delayed(features: &FeatureMatrix, delays: &[usize]) -> Result<DelayedDesign> {
    if delays.is_empty() {
        return Err(Error::Config("delay list is empty".into()));
    }
    if delays[0] == 0 {
        return Err(Error::Config("delays must be positive".into()));
    }
    if delays.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("delays must be strictly increasing, got {delays:?}")));
    }
    let x = features.values();
    let (n, d) = x.dim();
    let mut out = Array2::zeros((n, d * delays.len()));
    for (j, &lag) in delays.iter().enumerate() {
        if lag < n {
            out.slice_mut(s![lag.., j * d..(j + 1) * d])
                .assign(&x.slice(s![..n - lag, ..]));
        }
    }
    Ok(DelayedDesign {
        values: out,
        delays: delays.to_vec(),
        source_meta: features.meta().clone(),
    })
}

/// Per-column population mean and standard deviation.
pub fn column_stats(m: ArrayView2<'_, f64>) -> Result<NormalizationStats> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::Data(format!("normalization needs at least 2 rows, got {n}")));
    }
    let mut mean = Array1::<f64>::zeros(m.ncols());
    for row in m.rows() {
        mean += &row;
    }
    mean /= n as f64;
    let mut var = Array1::<f64>::zeros(m.ncols());
    for row in m.rows() {
        Zip::from(&mut var).and(&row).and(&mean).for_each(|v, &x, &mu| {
            let c = x - mu;
            *v += c * c;
        });
    }
    let std = var.mapv(|v| (v / n as f64).sqrt());
    let constant = std.iter().map(|&s| s < CONSTANT_EPS).collect();
    Ok(NormalizationStats { mean, std, constant })
}

/// Z-scores every column; constant columns become zeros and are flagged.
pub fn normalize_fit(m: ArrayView2<'_, f64>) -> Result<(Array2<f64>, NormalizationStats)> {
    normalize_owned(m.to_owned())
}

/// [`normalize_fit`] reusing the buffer of `m`.
pub fn normalize_owned(mut m: Array2<f64>) -> Result<(Array2<f64>, NormalizationStats)> {
    let stats = column_stats(m.view())?;
    apply(&mut m, &stats);
    Ok((m, stats))
}

/// Applies previously computed statistics (e.g. from a training split).
pub fn normalize_with(m: ArrayView2<'_, f64>, stats: &NormalizationStats) -> Result<Array2<f64>> {
    if stats.mean.len() != m.ncols() {
        return Err(Error::Data(format!(
            "statistics for {} columns applied to {} columns",
            stats.mean.len(),
            m.ncols()
        )));
    }
    let mut out = m.to_owned();
    apply(&mut out, stats);
    Ok(out)
}

fn apply(out: &mut Array2<f64>, stats: &NormalizationStats) {
    let scale: Array1<f64> = stats
        .std
        .iter()
        .zip(&stats.constant)
        .map(|(&s, &c)| if c { 0.0 } else { 1.0 / s })
        .collect();
    out.axis_iter_mut(Axis(0)).for_each(|mut row| {
        Zip::from(&mut row)
            .and(&stats.mean)
            .and(&scale)
            .for_each(|x, &mu, &k| *x = (*x - mu) * k);
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn word_features(values: Array2<f64>) -> FeatureMatrix {
        FeatureMatrix::new(values, Alignment::Word, FeatureMeta::default()).unwrap()
    }

    #[test]
    fn four_words_per_tr() {
        // 0.5 s per word, 2 s TR
        let x = Array2::from_shape_fn((16, 3), |(i, j)| (i * 3 + j) as f64);
        let onsets: Vec<usize> = (0..16).map(|w| w / 4).collect();
        let g = group_by_tr(&word_features(x.clone()), &onsets, 4).unwrap();
        assert_eq!(g.alignment(), Alignment::Tr);
        for t in 0..4 {
            let expected = x.slice(s![4 * t..4 * t + 4, ..]).mean_axis(Axis(0)).unwrap();
            assert_eq!(g.values().row(t), expected);
        }
    }

    #[test]
    fn identical_vectors_average_to_themselves() {
        let x = array![[0.1, 0.7], [0.1, 0.7], [0.1, 0.7]];
        let g = group_by_tr(&word_features(x), &[0, 0, 0], 2).unwrap();
        assert_eq!(g.values().row(0), array![0.1, 0.7]);
        assert_eq!(g.values().row(1), array![0.0, 0.0]);
    }

    #[test]
    fn grouping_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((12, 5), |_| rng.random_range(-1.0..1.0));
        let onsets: Vec<usize> = (0..12).map(|_| rng.random_range(0..3)).collect();
        let g = group_by_tr(&word_features(x.clone()), &onsets, 3).unwrap();
        for t in 0..3 {
            let members: Vec<usize> = (0..12).filter(|&w| onsets[w] == t).collect();
            for c in 0..5 {
                let expected = if members.is_empty() {
                    0.0
                } else {
                    members.iter().map(|&w| x[[w, c]]).sum::<f64>() / members.len() as f64
                };
                assert!((g.values()[[t, c]] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grouping_errors() {
        let f = word_features(Array2::zeros((3, 2)));
        assert!(group_by_tr(&f, &[0, 1], 4).is_err());
        assert!(group_by_tr(&f, &[0, 1, 4], 4).is_err());
        let tr = FeatureMatrix::new(Array2::zeros((3, 2)), Alignment::Tr, FeatureMeta::default()).unwrap();
        assert!(group_by_tr(&tr, &[0, 1, 2], 4).is_err());
    }

    fn tr_features(values: Array2<f64>) -> FeatureMatrix {
        FeatureMatrix::new(values, Alignment::Tr, FeatureMeta::default()).unwrap()
    }

    #[test]
    fn default_delays_quadruple_width() {
        let d = build_delayed(&tr_features(Array2::zeros((10, 768))), &[1, 2, 3, 4]).unwrap();
        assert_eq!(d.values.ncols(), 3072);
        assert_eq!(d.block_width(), 768);
    }

    #[test]
    fn first_row_is_zero() {
        let d = build_delayed(&tr_features(Array2::ones((3, 2))), &[1]).unwrap();
        assert_eq!(d.values.row(0), array![0.0, 0.0]);
        assert_eq!(d.values.row(1), array![1.0, 1.0]);
    }

    #[test]
    fn delayed_matches_index_arithmetic() {
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (10 * i + j) as f64 + 1.0);
        let delays = [1, 3];
        let d = build_delayed(&tr_features(x.clone()), &delays).unwrap();
        assert_eq!(d.values.dim(), (6, 4));
        for t in 0..6 {
            for (j, &lag) in delays.iter().enumerate() {
                for c in 0..2 {
                    let expected = if t >= lag { x[[t - lag, c]] } else { 0.0 };
                    assert_eq!(d.values[[t, j * 2 + c]], expected);
                }
            }
        }
    }

    #[test]
    fn delay_errors() {
        let f = tr_features(Array2::zeros((3, 2)));
        assert!(build_delayed(&f, &[]).is_err());
        assert!(build_delayed(&f, &[0, 1]).is_err());
        assert!(build_delayed(&f, &[2, 1]).is_err());
    }

    #[test]
    fn normalize_uses_population_std() {
        let (z, stats) = normalize_fit(array![[1.0], [2.0], [3.0]].view()).unwrap();
        let k = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z[[0, 0]] + k).abs() < 1e-12);
        assert!(z[[1, 0]].abs() < 1e-12);
        assert!((z[[2, 0]] - k).abs() < 1e-12);
        assert!((k - 1.224744871391589).abs() < 1e-12);
        assert!(!stats.constant[0]);
    }

    #[test]
    fn constant_column_is_zeroed() {
        let (z, stats) = normalize_fit(array![[5.0, 1.0], [5.0, 2.0]].view()).unwrap();
        assert_eq!(z.column(0), array![0.0, 0.0]);
        assert_eq!(stats.constant, vec![true, false]);
    }

    #[test]
    fn single_row_rejected() {
        assert!(normalize_fit(array![[1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn normalize_with_applies_given_stats() {
        let (_, stats) = normalize_fit(array![[0.0], [2.0]].view()).unwrap();
        let z = normalize_with(array![[3.0]].view(), &stats).unwrap();
        assert_eq!(z[[0, 0]], 2.0);
        assert!(normalize_with(array![[3.0, 1.0]].view(), &stats).is_err());
    }

    proptest! {
        #[test]
        fn grouping_is_permutation_invariant_within_tr(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((8, 3), |_| rng.random_range(-1.0..1.0));
            let onsets = vec![0, 0, 0, 0, 1, 1, 1, 1];
            let a = group_by_tr(&word_features(x.clone()), &onsets, 2).unwrap();
            let mut perm = x.clone();
            // reverse the words within each TR
            for t in 0..2 {
                for i in 0..4 {
                    perm.row_mut(4 * t + i).assign(&x.row(4 * t + 3 - i));
                }
            }
            let b = group_by_tr(&word_features(perm), &onsets, 2).unwrap();
            for (p, q) in a.values().iter().zip(b.values()) {
                prop_assert!((p - q).abs() < 1e-14);
            }
        }

        #[test]
        fn delayed_block_equals_shift(seed in 0u64..1000, lag_a in 1usize..4, extra in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((9, 2), |_| rng.random_range(-1.0..1.0));
            let delays = [lag_a, lag_a + extra];
            let d = build_delayed(&tr_features(x.clone()), &delays).unwrap();
            for (j, &lag) in delays.iter().enumerate() {
                let single = build_delayed(&tr_features(x.clone()), &[lag]).unwrap();
                prop_assert_eq!(d.values.slice(s![.., 2 * j..2 * j + 2]), single.values.view());
            }
        }

        #[test]
        fn normalize_is_idempotent(seed in 0u64..1000, rows in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = Array2::from_shape_fn((rows, 4), |_| rng.random_range(-10.0..10.0));
            let (once, _) = normalize_fit(m.view()).unwrap();
            let (twice, _) = normalize_fit(once.view()).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
