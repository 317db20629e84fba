use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, gram_cols};

/// Solves `(ZᵀZ + λᵢ I) wᵢ = Zᵀ yᵢ` for every output column `i`, factoring
/// once per distinct λ. No intercept is fitted.
///
/// `λ = 0` is accepted (ordinary least squares) but needs `Z` of full column
/// rank.
pub fn ridge_solve(z: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, lambdas: &[f64]) -> Result<Array2<f64>> {
    let (n, p) = z.dim();
    if n == 0 {
        return Err(Error::Data("ridge needs at least one row".into()));
    }
    if y.nrows() != n {
        return Err(Error::Data(format!("design has {n} rows, targets have {}", y.nrows())));
    }
    if lambdas.len() != y.ncols() {
        return Err(Error::Data(format!("{} lambdas for {} outputs", lambdas.len(), y.ncols())));
    }
    if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::Data(format!("invalid lambda {l}")));
    }
    if z.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data("ridge inputs contain non-finite values".into()));
    }

    let gram = gram_cols(z);
    let zty = z.t().dot(&y);

    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, l) in lambdas.iter().enumerate() {
        groups.entry(l.to_bits()).or_default().push(i);
    }

    let mut w = Array2::zeros((p, y.ncols()));
    for (bits, cols) in groups {
        let lambda = f64::from_bits(bits);
        let mut a = gram.clone();
        a.diag_mut().mapv_inplace(|d| d + lambda);
        let l = cholesky(a.view())?;
        let rhs = zty.select(Axis(1), &cols);
        let sol = cholesky_solve(&l, rhs.view());
        for (k, &c) in cols.iter().enumerate() {
            w.column_mut(c).assign(&sol.column(k));
        }
    }
    Ok(w)
}
