use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::spectral::{project_segments, shrinkage, stack_rows};
use super::{splits, RidgeFactorization, Split, OUTPUT_BLOCK};
use crate::error::{Error, Result};

/// Outcome of the nested λ search.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedCv {
    /// Chosen λ per output.
    pub lambdas: Vec<f64>,
    /// Grid index of the chosen λ per output.
    pub indices: Vec<usize>,
    /// Squared validation error summed over nested folds (`grid × outputs`).
    pub errors: Array2<f64>,
}

struct PreparedFold {
    split: Split,
    left: Array2<f64>,
    val_map: Array2<f64>,
    shrink: Vec<Array1<f64>>,
}

/// Picks, for every output column of `y`, the grid value with the smallest
/// summed squared error over `n_folds` contiguous folds of `(z, y)`. Exact
/// ties go to the larger λ (later grid position).
///
/// `z` and `y` are used as given; callers normalize beforehand.
pub fn nested_cv_lambda(
    z: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    grid: &[f64],
    n_folds: usize,
) -> Result<NestedCv> {
    if grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    if let Some(l) = grid.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::Config(format!("lambda grid value {l} is not positive")));
    }
    if n_folds < 2 {
        return Err(Error::Config(format!("nested search needs at least 2 folds, got {n_folds}")));
    }
    if z.nrows() != y.nrows() {
        return Err(Error::Data(format!("design has {} rows, targets have {}", z.nrows(), y.nrows())));
    }
    let folds = splits(z.nrows(), n_folds)?;

    let prepared = folds
        .into_par_iter()
        .map(|split| {
            let f = RidgeFactorization::new(stack_rows(z, &split.train))?;
            let val_map = f.map_rows(z.slice(s![split.val.clone(), ..]));
            let (eigvals, left, tol) = f.into_parts();
            let shrink = grid.iter().map(|&l| shrinkage(&eigvals, l, tol)).collect();
            Ok(PreparedFold {
                split,
                left,
                val_map,
                shrink,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let blocks = output_blocks(y.ncols());
    let block_errors: Vec<Array2<f64>> = blocks
        .par_iter()
        .map(|b| block_errors(&prepared, y.slice(s![.., b.clone()]), grid.len()))
        .collect();
    let mut errors = Array2::zeros((grid.len(), y.ncols()));
    for (b, e) in blocks.iter().zip(&block_errors) {
        errors.slice_mut(s![.., b.clone()]).assign(e);
    }

    let indices: Vec<usize> = errors
        .axis_iter(Axis(1))
        .map(|col| {
            let mut best = 0;
            for (g, &e) in col.iter().enumerate() {
                if e <= col[best] {
                    best = g;
                }
            }
            best
        })
        .collect();
    Ok(NestedCv {
        lambdas: indices.iter().map(|&i| grid[i]).collect(),
        indices,
        errors,
    })
}

fn block_errors(folds: &[PreparedFold], y: ArrayView2<'_, f64>, n_grid: usize) -> Array2<f64> {
    let mut err = Array2::zeros((n_grid, y.ncols()));
    for f in folds {
        let coef = project_segments(f.left.view(), y, &f.split.train);
        let y_val = y.slice(s![f.split.val.clone(), ..]);
        for (g, shrink) in f.shrink.iter().enumerate() {
            let scaled = &coef * &shrink.view().insert_axis(Axis(1));
            let pred = f.val_map.dot(&scaled);
            for (c, (p, t)) in pred.columns().into_iter().zip(y_val.columns()).enumerate() {
                err[[g, c]] += p.iter().zip(t).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
            }
        }
    }
    err
}

pub(crate) fn output_blocks(n: usize) -> Vec<Range<usize>> {
    (0..n)
        .step_by(OUTPUT_BLOCK)
        .map(|start| start..(start + OUTPUT_BLOCK).min(n))
        .collect()
}
