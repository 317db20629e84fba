//! Per-output ridge regression with nested cross-validated regularization.
//!
//! Two solvers are provided. [`ridge_solve`] factors `ZᵀZ + λI` once per
//! distinct λ and is the reference path. [`RidgeFactorization`]
//! eigendecomposes the smaller Gram matrix of `Z` once and then serves every
//! λ and every output from that single factorization; the nested search and
//! the fold fits run on it.

mod dense;
mod fit;
mod nested;
mod spectral;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use dense::ridge_solve;
pub use fit::{fit_eval_folds, fit_eval_folds_with, FitOptions, FitOutput, FoldPrediction, WeightPolicy};
pub use nested::{nested_cv_lambda, NestedCv};
pub use spectral::RidgeFactorization;

use crate::error::{Error, Result};

/// Number of output columns handled together. Fixed so that results do not
/// depend on how blocks are scheduled across workers.
pub const OUTPUT_BLOCK: usize = 512;

/// Strictly increasing list of positive regularization strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid(Vec<f64>);

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Config(format!("lambda grid needs at least 2 values, got {}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!("lambda grid value {v} is not a positive number")));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("lambda grid must be strictly increasing".into()));
        }
        Ok(LambdaGrid(values))
    }

    /// `n` values evenly spaced in log10 between `lo` and `hi` inclusive.
    pub fn logspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || n < 2 {
            return Err(Error::Config(format!("bad log grid {lo}:{hi}:{n}")));
        }
        let (a, b) = (lo.log10(), hi.log10());
        let step = (b - a) / (n - 1) as f64;
        Self::new((0..n).map(|i| 10f64.powf(a + step * i as f64)).collect())
    }

    /// `n` values evenly spaced between `lo` and `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || n < 2 {
            return Err(Error::Config(format!("bad linear grid {lo}:{hi}:{n}")));
        }
        let step = (hi - lo) / (n - 1) as f64;
        Self::new((0..n).map(|i| lo + step * i as f64).collect())
    }

    /// Parses `lo:hi:Nlog`, `lo:hi:Nlin`, or a comma-separated list.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse lambda grid {s:?}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [lo, hi, spec] => {
                let spec = spec.trim();
                let (count, log) = if let Some(c) = spec.strip_suffix("log") {
                    (c, true)
                } else if let Some(c) = spec.strip_suffix("lin") {
                    (c, false)
                } else {
                    return Err(bad());
                };
                let n: usize = count.parse().map_err(|_| bad())?;
                if log {
                    Self::logspace(num(lo)?, num(hi)?, n)
                } else {
                    Self::linspace(num(lo)?, num(hi)?, n)
                }
            }
            [list] => Self::new(list.split(',').map(num).collect::<Result<_>>()?),
            _ => Err(bad()),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for LambdaGrid {
    /// Ten values log-spaced over [1, 10⁴].
    fn default() -> Self {
        Self::logspace(1.0, 1e4, 10).expect("default grid is valid")
    }
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(g: LambdaGrid) -> Self {
        g.0
    }
}

/// Outer and nested fold counts. All folds are contiguous blocks of rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_outer: usize,
    pub n_nested: usize,
}

impl Default for FoldPlan {
    fn default() -> Self {
        FoldPlan {
            n_outer: 4,
            n_nested: 10,
        }
    }
}

/// One train/validation split. Training rows may form two segments (before
/// and after the validation block).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<Range<usize>>,
    pub val: Range<usize>,
}

impl Split {
    pub fn n_train(&self) -> usize {
        self.train.iter().map(|r| r.len()).sum()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.train.iter().flat_map(|r| r.clone()).collect()
    }
}

/// Splits `0..n` into `k` contiguous blocks; the first `n % k` blocks get one
/// extra row.
pub fn contiguous_folds(n: usize, k: usize) -> Result<Vec<Range<usize>>> {
    if k == 0 {
        return Err(Error::Config("fold count must be positive".into()));
    }
    if n < k {
        return Err(Error::Data(format!("{n} rows cannot fill {k} folds")));
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Leave-one-block-out splits over `0..n`.
pub fn splits(n: usize, k: usize) -> Result<Vec<Split>> {
    Ok(contiguous_folds(n, k)?
        .into_iter()
        .map(|val| {
            let train = [0..val.start, val.end..n]
                .into_iter()
                .filter(|r| !r.is_empty())
                .collect();
            Split { train, val }
        })
        .collect())
}
