use std::ops::Range;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use super::{write_matrix, Dtype, FEATURE_MAGIC};
use crate::error::{Error, Result};

/// Ridge fit of one outer fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldFit {
    /// `design_cols × outputs`; `None` when weights were not retained.
    pub weights: Option<Array2<f64>>,
    /// Selected regularization per output.
    pub lambdas: Vec<f64>,
    pub train_rows: Vec<Range<usize>>,
    pub val_rows: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingFit {
    pub n_rows: usize,
    pub folds: Vec<FoldFit>,
}

impl EncodingFit {
    /// Checks the structural invariants: positive λ, one weight column per
    /// output, and validation ranges that partition all rows.
    pub fn validate(&self) -> Result<()> {
        let mut covered = vec![false; self.n_rows];
        for (k, f) in self.folds.iter().enumerate() {
            if let Some(l) = f.lambdas.iter().find(|l| !(**l > 0.0)) {
                return Err(Error::Data(format!("fold {k}: non-positive lambda {l}")));
            }
            if let Some(w) = &f.weights {
                if w.ncols() != f.lambdas.len() {
                    return Err(Error::Data(format!(
                        "fold {k}: {} weight columns for {} outputs",
                        w.ncols(),
                        f.lambdas.len()
                    )));
                }
            }
            for r in f.val_rows.clone() {
                if r >= self.n_rows || covered[r] {
                    return Err(Error::Data(format!("fold {k}: validation row {r} out of range or repeated")));
                }
                covered[r] = true;
            }
        }
        if let Some(r) = covered.iter().position(|c| !c) {
            return Err(Error::Data(format!("row {r} is in no validation fold")));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct FitJson<'a> {
    n_rows: usize,
    folds: Vec<FoldJson<'a>>,
}

#[derive(Serialize)]
struct FoldJson<'a> {
    fold: usize,
    train_rows: Vec<[usize; 2]>,
    val_rows: [usize; 2],
    lambdas: &'a [f64],
    weights: Option<String>,
}

/// Name of the weight file of fold `k` inside a fit directory.
pub fn fold_weights_name(k: usize) -> String {
    format!("fold{k}.weights.bafm")
}

/// Writes one fold's weights (header + f32 payload, no sidecar). Used when
/// weights are streamed to disk as each fold finishes.
pub fn write_fold_weights(dir: &Path, k: usize, weights: &Array2<f64>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(&dir.join(fold_weights_name(k)), FEATURE_MAGIC, Dtype::F32, weights)
}

/// Writes `fit.json` plus `fold<k>.weights.bafm` for every fold that kept
/// its weights. A fold without weights still points at its weight file if
/// [`write_fold_weights`] already put one in `dir`.
pub fn write_encoding_fit(fit: &EncodingFit, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut folds = Vec::with_capacity(fit.folds.len());
    for (k, f) in fit.folds.iter().enumerate() {
        let name = fold_weights_name(k);
        let weights = match &f.weights {
            Some(w) => {
                write_fold_weights(dir, k, w)?;
                Some(name)
            }
            None => dir.join(&name).is_file().then_some(name),
        };
        folds.push(FoldJson {
            fold: k,
            train_rows: f.train_rows.iter().map(|r| [r.start, r.end]).collect(),
            val_rows: [f.val_rows.start, f.val_rows.end],
            lambdas: &f.lambdas,
            weights,
        });
    }
    let json = FitJson {
        n_rows: fit.n_rows,
        folds,
    };
    let path = dir.join("fit.json");
    let text = serde_json::to_string_pretty(&json).expect("fit serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}
