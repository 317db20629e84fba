use ndarray::ArrayView2;
use rayon::prelude::*;

use super::{block_rng, chunk_pair, score, ClassifierConfig, NeighborhoodMap};
use crate::datamodel::AccuracyMap;
use crate::error::{Error, Result};

/// Voxels sharing one random stream.
pub const VOXEL_BLOCK: usize = 256;

/// Searchlight chunk classification of one prediction matrix (`TRs × voxels`).
pub fn classify_fmri(
    truth: ArrayView2<'_, f64>,
    pred: ArrayView2<'_, f64>,
    nbhd: &NeighborhoodMap,
    cfg: &ClassifierConfig,
) -> Result<AccuracyMap> {
    let acc = fold_accuracy(truth, pred, nbhd, cfg, 0)?;
    AccuracyMap::voxels(acc, cfg.n_repeats)
}

/// Classifies each `(truth, pred)` validation fold with its own random
/// stream and averages the per-voxel accuracies over folds.
pub fn classify_fmri_folds(
    folds: &[(ArrayView2<'_, f64>, ArrayView2<'_, f64>)],
    nbhd: &NeighborhoodMap,
    cfg: &ClassifierConfig,
) -> Result<AccuracyMap> {
    if folds.is_empty() {
        return Err(Error::Data("no folds to classify".into()));
    }
    let mut sum = vec![0.0; nbhd.len()];
    for (k, (t, p)) in folds.iter().enumerate() {
        let acc = fold_accuracy(*t, *p, nbhd, cfg, k as u64)?;
        sum.iter_mut().zip(&acc).for_each(|(s, a)| *s += a);
    }
    let n = folds.len() as f64;
    AccuracyMap::voxels(sum.into_iter().map(|s| s / n).collect(), cfg.n_repeats * folds.len())
}

fn fold_accuracy(
    truth: ArrayView2<'_, f64>,
    pred: ArrayView2<'_, f64>,
    nbhd: &NeighborhoodMap,
    cfg: &ClassifierConfig,
    fold: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if truth.dim() != pred.dim() {
        return Err(Error::Data(format!(
            "recorded {:?} and predicted {:?} shapes differ",
            truth.dim(),
            pred.dim()
        )));
    }
    let (n, v) = truth.dim();
    if nbhd.len() != v {
        return Err(Error::Data(format!("{} neighborhoods for {v} voxels", nbhd.len())));
    }
    let len = cfg.chunk_len;
    let needed = if cfg.disjoint_distractors { 2 * len } else { len + 1 };
    if n < needed {
        return Err(Error::Data(format!("{n} TRs is too few for chunks of {len} (need {needed})")));
    }
    if truth.iter().chain(pred.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Data("classifier inputs contain non-finite values".into()));
    }

    // voxel-major copies so a chunk of one voxel is a contiguous slice
    let tt = truth.t().as_standard_layout().into_owned();
    let pt = pred.t().as_standard_layout().into_owned();
    let (tt, pt) = (tt.as_slice().unwrap(), pt.as_slice().unwrap());

    let n_blocks = v.div_ceil(VOXEL_BLOCK);
    let blocks: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(cfg.seed, fold, b as u64);
            let voxels = b * VOXEL_BLOCK..((b + 1) * VOXEL_BLOCK).min(v);
            voxels
                .map(|i| {
                    let members = nbhd.members(i);
                    let mut total = 0.0;
                    for _ in 0..cfg.n_repeats {
                        let (s, d) = chunk_pair(&mut rng, n, len, cfg.disjoint_distractors);
                        let (mut d_true, mut d_other) = (0.0, 0.0);
                        for &j in members {
                            let row = j * n;
                            let t = &tt[row + s..row + s + len];
                            let p = &pt[row + s..row + s + len];
                            let q = &pt[row + d..row + d + len];
                            for k in 0..len {
                                let a = t[k] - p[k];
                                let b = t[k] - q[k];
                                d_true += a * a;
                                d_other += b * b;
                            }
                        }
                        total += score(d_true, d_other);
                    }
                    total / cfg.n_repeats as f64
                })
                .collect()
        })
        .collect();
    Ok(blocks.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(len: usize, repeats: usize) -> ClassifierConfig {
        ClassifierConfig {
            chunk_len: len,
            n_repeats: repeats,
            seed: 9,
            disjoint_distractors: true,
        }
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = Array2::from_shape_fn((60, 5), |_| rng.random_range(-1.0..1.0));
        let nb = NeighborhoodMap::singletons(5);
        let acc = classify_fmri(t.view(), t.view(), &nb, &cfg(20, 50)).unwrap();
        assert!(acc.as_slice().iter().all(|a| *a == 1.0));
    }

    #[test]
    fn constant_data_ties_everywhere() {
        let t = Array2::<f64>::zeros((10, 2));
        let nb = NeighborhoodMap::singletons(2);
        let acc = classify_fmri(t.view(), t.view(), &nb, &cfg(3, 10)).unwrap();
        assert_eq!(acc.as_slice(), &[0.5, 0.5]);
    }

    /// Replays the sampler and evaluates each draw against a table of the
    /// outcome of every (true start, distractor start) pair.
    #[test]
    fn three_voxel_enumeration() {
        let truth = array![[1.0, 0.0, 2.0], [0.0, 1.0, 0.0], [3.0, 3.0, 1.0]];
        let pred = array![[0.8, 0.5, 0.0], [0.1, 0.7, 0.2], [1.0, 2.0, 1.0]];
        let nb = NeighborhoodMap::singletons(3);
        let c = ClassifierConfig {
            chunk_len: 1,
            n_repeats: 7,
            seed: 3,
            disjoint_distractors: true,
        };
        let acc = classify_fmri(truth.view(), pred.view(), &nb, &c).unwrap();

        let mut table = [[[0.0f64; 3]; 3]; 3];
        for v in 0..3 {
            for s in 0..3 {
                for d in 0..3 {
                    let a = (truth[[s, v]] - pred[[s, v]]).powi(2);
                    let b = (truth[[s, v]] - pred[[d, v]]).powi(2);
                    table[v][s][d] = if a < b { 1.0 } else if a == b { 0.5 } else { 0.0 };
                }
            }
        }
        let mut rng = block_rng(3, 0, 0);
        for v in 0..3 {
            let mut total = 0.0;
            for _ in 0..7 {
                let (s, d) = chunk_pair(&mut rng, 3, 1, true);
                total += table[v][s][d];
            }
            assert_eq!(acc.as_slice()[v], total / 7.0);
        }
    }

    #[test]
    fn shape_and_length_errors() {
        let t = Array2::<f64>::zeros((39, 2));
        let nb = NeighborhoodMap::singletons(2);
        assert!(classify_fmri(t.view(), t.view(), &nb, &cfg(20, 1)).is_err());
        let ok = Array2::<f64>::zeros((40, 2));
        assert!(classify_fmri(ok.view(), ok.view(), &nb, &cfg(20, 1)).is_ok());
        let wide = Array2::<f64>::zeros((40, 3));
        assert!(classify_fmri(ok.view(), wide.view(), &nb, &cfg(20, 1)).is_err());
        assert!(classify_fmri(wide.view(), wide.view(), &nb, &cfg(20, 1)).is_err());
        let overlap = ClassifierConfig {
            disjoint_distractors: false,
            ..cfg(20, 1)
        };
        let short = Array2::<f64>::zeros((21, 2));
        assert!(classify_fmri(short.view(), short.view(), &nb, &overlap).is_ok());
    }

    #[test]
    fn folds_average_and_count_repeats() {
        let t = Array2::from_shape_fn((40, 3), |(i, j)| (i as f64 * 0.37 + j as f64).sin());
        let z = Array2::<f64>::zeros((40, 3));
        let nb = NeighborhoodMap::singletons(3);
        let c = cfg(10, 20);
        let acc = classify_fmri_folds(&[(t.view(), t.view()), (z.view(), z.view())], &nb, &c).unwrap();
        assert_eq!(acc.as_slice(), &[0.75, 0.75, 0.75]);
        assert_eq!(acc.n_repeats(), 40);
    }
}
