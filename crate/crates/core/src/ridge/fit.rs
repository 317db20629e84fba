use std::ops::Range;

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;

use super::nested::output_blocks;
use super::spectral::stack_rows;
use super::{nested_cv_lambda, splits, FoldPlan, LambdaGrid, RidgeFactorization};
use crate::datamodel::{EncodingFit, FoldFit};
use crate::error::{Error, Result};
use crate::featprep::{normalize_fit, normalize_owned, normalize_with, NormMode};

/// What happens to the per-fold weight matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightPolicy {
    /// Never computed.
    #[default]
    Skip,
    /// Computed, handed to the fold callback, then dropped.
    Stream,
    /// Computed and kept in the returned [`EncodingFit`].
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FitOptions {
    pub norm: NormMode,
    pub weights: WeightPolicy,
}

/// Held-out predictions of one outer fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPrediction {
    pub val_rows: Range<usize>,
    pub predicted: Array2<f64>,
    /// Normalized recorded targets of the validation rows.
    pub observed: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub fit: EncodingFit,
    pub folds: Vec<FoldPrediction>,
}

/// Outer cross-validated ridge fit with per-output λ chosen by a nested
/// search inside each training split.
pub fn fit_eval_folds(
    design: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    plan: FoldPlan,
    grid: &LambdaGrid,
    opts: FitOptions,
) -> Result<FitOutput> {
    fit_eval_folds_with(design, targets, plan, grid, opts, |_, _| Ok(()))
}

/// [`fit_eval_folds`] calling `on_fold(k, fit)` as each outer fold finishes.
pub fn fit_eval_folds_with<F>(
    design: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    plan: FoldPlan,
    grid: &LambdaGrid,
    opts: FitOptions,
    mut on_fold: F,
) -> Result<FitOutput>
where
    F: FnMut(usize, &FoldFit) -> Result<()>,
{
    let n = design.nrows();
    if targets.nrows() != n {
        return Err(Error::Data(format!("design has {n} rows, targets have {}", targets.nrows())));
    }
    if plan.n_outer < 2 {
        return Err(Error::Config(format!("need at least 2 outer folds, got {}", plan.n_outer)));
    }
    if design.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data("design or targets contain non-finite values".into()));
    }

    let mut fit = EncodingFit {
        n_rows: n,
        folds: Vec::with_capacity(plan.n_outer),
    };
    let mut preds = Vec::with_capacity(plan.n_outer);
    for (k, split) in splits(n, plan.n_outer)?.into_iter().enumerate() {
        log::info!("outer fold {k}: {} train rows, {} validation rows", split.n_train(), split.val.len());
        let (z_tr, z_stats) = normalize_owned(stack_rows(design, &split.train))?;
        let (y_tr, y_stats) = normalize_owned(stack_rows(targets, &split.train))?;
        let z_val_raw = design.slice(s![split.val.clone(), ..]);
        let y_val_raw = targets.slice(s![split.val.clone(), ..]);
        let (z_val, y_val) = match opts.norm {
            NormMode::Independent => (normalize_fit(z_val_raw)?.0, normalize_fit(y_val_raw)?.0),
            NormMode::TrainStats => (normalize_with(z_val_raw, &z_stats)?, normalize_with(y_val_raw, &y_stats)?),
        };

        let nested = nested_cv_lambda(z_tr.view(), y_tr.view(), grid.as_slice(), plan.n_nested)?;
        let factor = RidgeFactorization::new(z_tr)?;
        let val_map = factor.map_rows(z_val.view());
        let basis = (opts.weights != WeightPolicy::Skip).then(|| factor.basis());

        let blocks = output_blocks(y_tr.ncols());
        let parts: Vec<(Array2<f64>, Option<Array2<f64>>)> = blocks
            .par_iter()
            .map(|b| {
                let mut coef = factor.project(y_tr.slice(s![.., b.clone()]));
                factor.shrink(&mut coef, &nested.lambdas[b.clone()]);
                (val_map.dot(&coef), basis.as_ref().map(|bs| bs.dot(&coef)))
            })
            .collect();
        drop(y_tr);

        let mut predicted = Array2::zeros(y_val.dim());
        let mut weights = basis.as_ref().map(|bs| Array2::zeros((bs.nrows(), y_val.ncols())));
        for (b, (p, w)) in blocks.iter().zip(parts) {
            predicted.slice_mut(s![.., b.clone()]).assign(&p);
            if let (Some(all), Some(w)) = (weights.as_mut(), w) {
                all.slice_mut(s![.., b.clone()]).assign(&w);
            }
        }

        let mut fold = FoldFit {
            weights,
            lambdas: nested.lambdas,
            train_rows: split.train,
            val_rows: split.val.clone(),
        };
        on_fold(k, &fold)?;
        if opts.weights != WeightPolicy::Keep {
            fold.weights = None;
        }
        fit.folds.push(fold);
        preds.push(FoldPrediction {
            val_rows: split.val,
            predicted,
            observed: y_val,
        });
    }
    Ok(FitOutput { fit, folds: preds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn fit_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = random(80, 6, &mut rng);
        let y = random(80, 4, &mut rng);
        let opts = FitOptions {
            weights: WeightPolicy::Keep,
            ..Default::default()
        };
        let out = fit_eval_folds(z.view(), y.view(), FoldPlan::default(), &LambdaGrid::default(), opts).unwrap();
        out.fit.validate().unwrap();
        assert_eq!(out.folds.len(), 4);
        for (f, p) in out.fit.folds.iter().zip(&out.folds) {
            assert_eq!(f.weights.as_ref().unwrap().dim(), (6, 4));
            assert_eq!(p.predicted.dim(), (20, 4));
            assert_eq!(p.observed.dim(), (20, 4));
        }
    }

    #[test]
    fn stream_policy_drops_weights_after_callback() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let z = random(40, 3, &mut rng);
        let y = random(40, 2, &mut rng);
        let opts = FitOptions {
            weights: WeightPolicy::Stream,
            ..Default::default()
        };
        let mut seen = 0;
        let out = fit_eval_folds_with(z.view(), y.view(), FoldPlan::default(), &LambdaGrid::default(), opts, |_, f| {
            assert!(f.weights.is_some());
            seen += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, 4);
        assert!(out.fit.folds.iter().all(|f| f.weights.is_none()));
    }

    #[test]
    fn predictions_use_fold_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let z = random(60, 5, &mut rng);
        let y = random(60, 3, &mut rng);
        let opts = FitOptions {
            weights: WeightPolicy::Keep,
            norm: NormMode::Independent,
        };
        let out = fit_eval_folds(z.view(), y.view(), FoldPlan::default(), &LambdaGrid::default(), opts).unwrap();
        for (f, p) in out.fit.folds.iter().zip(&out.folds) {
            let (zv, _) = normalize_fit(z.slice(s![p.val_rows.clone(), ..])).unwrap();
            let direct = zv.dot(f.weights.as_ref().unwrap());
            for (a, b) in direct.iter().zip(&p.predicted) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_mismatch_and_non_finite() {
        let z = Array2::<f64>::zeros((40, 2));
        let y = Array2::<f64>::zeros((39, 2));
        let g = LambdaGrid::default();
        assert!(fit_eval_folds(z.view(), y.view(), FoldPlan::default(), &g, FitOptions::default()).is_err());
        let mut y = Array2::<f64>::zeros((40, 2));
        y[[3, 1]] = f64::NAN;
        assert!(fit_eval_folds(z.view(), y.view(), FoldPlan::default(), &g, FitOptions::default()).is_err());
    }
}
