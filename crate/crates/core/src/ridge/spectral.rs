use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{gram_cols, gram_rows, symmetric_eigen};

/// Eigendecomposition of the smaller Gram matrix of a training design.
///
/// With `Z` of shape `n × p`:
///
/// * dual (`n ≤ p`): `ZZᵀ = Q E Qᵀ`, ridge weights `w = ZᵀQ (E + λ)⁻¹ Qᵀy`
/// * primal (`p < n`): `ZᵀZ = Q E Qᵀ`, `w = Q (E + λ)⁻¹ (ZQ)ᵀy`
///
/// Both are written `w = B (E + λ)⁻¹ Lᵀy` with a feature basis `B` and a
/// row basis `L`, so a single factorization answers every λ.
#[derive(Debug, Clone)]
pub struct RidgeFactorization {
    z: Array2<f64>,
    dual: bool,
    eigvals: Array1<f64>,
    eigvecs: Array2<f64>,
    left: Array2<f64>,
    tol: f64,
}

impl RidgeFactorization {
    pub fn new(z: Array2<f64>) -> Result<Self> {
        let (n, p) = z.dim();
        if n == 0 || p == 0 {
            return Err(Error::Data(format!("cannot factor an empty {n}x{p} design")));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("design contains non-finite values".into()));
        }
        let dual = n <= p;
        let gram = if dual { gram_rows(z.view()) } else { gram_cols(z.view()) };
        let (eigvals, eigvecs) = symmetric_eigen(gram)?;
        let left = if dual { eigvecs.clone() } else { z.dot(&eigvecs) };
        let e_max = eigvals.iter().cloned().fold(0.0, f64::max);
        let tol = e_max * n.max(p) as f64 * f64::EPSILON;
        Ok(RidgeFactorization {
            z,
            dual,
            eigvals,
            eigvecs,
            left,
            tol,
        })
    }

    pub fn is_dual(&self) -> bool {
        self.dual
    }

    pub fn n_rows(&self) -> usize {
        self.z.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.z.ncols()
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigvals
    }

    /// Spectral coordinates `Lᵀy`, one column per output.
    pub fn project(&self, y: ArrayView2<'_, f64>) -> Array2<f64> {
        self.left.t().dot(&y)
    }

    /// [`project`](Self::project) where the training rows of `y` are the
    /// concatenation of `segments`.
    pub fn project_segments(&self, y: ArrayView2<'_, f64>, segments: &[Range<usize>]) -> Array2<f64> {
        project_segments(self.left.view(), y, segments)
    }

    /// `1 / (eⱼ + λ)`, zeroed where `eⱼ + λ` is numerically zero.
    pub fn shrinkage(&self, lambda: f64) -> Array1<f64> {
        shrinkage(&self.eigvals, lambda, self.tol)
    }

    /// Scales column `i` of `coef` by the shrinkage for `lambdas[i]`.
    pub fn shrink(&self, coef: &mut Array2<f64>, lambdas: &[f64]) {
        for (mut col, &l) in coef.columns_mut().into_iter().zip(lambdas) {
            col *= &self.shrinkage(l);
        }
    }

    /// `Z_new B`: new rows expressed in spectral coordinates, so that
    /// predictions are `map · shrunk coefficients`.
    pub fn map_rows(&self, z_new: ArrayView2<'_, f64>) -> Array2<f64> {
        if self.dual {
            z_new.dot(&self.z.t()).dot(&self.eigvecs)
        } else {
            z_new.dot(&self.eigvecs)
        }
    }

    /// Feature basis `B` (`p × r`).
    pub fn basis(&self) -> Array2<f64> {
        if self.dual {
            self.z.t().dot(&self.eigvecs)
        } else {
            self.eigvecs.clone()
        }
    }

    /// Ridge weights (`p × outputs`) with a separate λ per output.
    pub fn weights(&self, y: ArrayView2<'_, f64>, lambdas: &[f64]) -> Result<Array2<f64>> {
        self.check(y, lambdas)?;
        let mut coef = self.project(y);
        self.shrink(&mut coef, lambdas);
        Ok(self.basis().dot(&coef))
    }

    /// Predictions for `z_new` from the ridge fit of `y`.
    pub fn predict(&self, z_new: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, lambdas: &[f64]) -> Result<Array2<f64>> {
        self.check(y, lambdas)?;
        if z_new.ncols() != self.n_features() {
            return Err(Error::Data(format!(
                "new rows have {} features, fit has {}",
                z_new.ncols(),
                self.n_features()
            )));
        }
        let mut coef = self.project(y);
        self.shrink(&mut coef, lambdas);
        Ok(self.map_rows(z_new).dot(&coef))
    }

    /// Drops the design and keeps the pieces the nested search needs.
    pub(crate) fn into_parts(self) -> (Array1<f64>, Array2<f64>, f64) {
        (self.eigvals, self.left, self.tol)
    }

    fn check(&self, y: ArrayView2<'_, f64>, lambdas: &[f64]) -> Result<()> {
        if y.nrows() != self.n_rows() {
            return Err(Error::Data(format!("design has {} rows, targets have {}", self.n_rows(), y.nrows())));
        }
        if lambdas.len() != y.ncols() {
            return Err(Error::Data(format!("{} lambdas for {} outputs", lambdas.len(), y.ncols())));
        }
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::Data(format!("invalid lambda {l}")));
        }
        Ok(())
    }
}

pub(crate) fn shrinkage(eigvals: &Array1<f64>, lambda: f64, tol: f64) -> Array1<f64> {
    eigvals.mapv(|e| if e + lambda > tol { 1.0 / (e + lambda) } else { 0.0 })
}

pub(crate) fn project_segments(
    left: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    segments: &[Range<usize>],
) -> Array2<f64> {
    let mut out = Array2::zeros((left.ncols(), y.ncols()));
    let mut offset = 0;
    for seg in segments {
        let l = left.slice(s![offset..offset + seg.len(), ..]);
        ndarray::linalg::general_mat_mul(1.0, &l.t(), &y.slice(s![seg.clone(), ..]), 1.0, &mut out);
        offset += seg.len();
    }
    out
}

/// Rows of `m` taken from `segments`, concatenated.
pub(crate) fn stack_rows(m: ArrayView2<'_, f64>, segments: &[Range<usize>]) -> Array2<f64> {
    let n: usize = segments.iter().map(|r| r.len()).sum();
    let mut out = Array2::zeros((n, m.ncols()));
    let mut offset = 0;
    for seg in segments {
        out.slice_mut(s![offset..offset + seg.len(), ..])
            .assign(&m.slice(s![seg.clone(), ..]));
        offset += seg.len();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ridge::ridge_solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    fn max_rel(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
    }

    #[test]
    fn primal_matches_cholesky() {
        let z = random(40, 7, 1);
        let y = random(40, 3, 2);
        let lambdas = [0.1, 5.0, 300.0];
        let f = RidgeFactorization::new(z.clone()).unwrap();
        assert!(!f.is_dual());
        let w = f.weights(y.view(), &lambdas).unwrap();
        let oracle = ridge_solve(z.view(), y.view(), &lambdas).unwrap();
        assert!(max_rel(&w, &oracle) < 1e-10);
    }

    #[test]
    fn dual_matches_cholesky() {
        let z = random(12, 30, 3);
        let y = random(12, 4, 4);
        let lambdas = [0.5, 1.0, 10.0, 1e4];
        let f = RidgeFactorization::new(z.clone()).unwrap();
        assert!(f.is_dual());
        let w = f.weights(y.view(), &lambdas).unwrap();
        let oracle = ridge_solve(z.view(), y.view(), &lambdas).unwrap();
        assert!(max_rel(&w, &oracle) < 1e-10);
    }

    #[test]
    fn predictions_are_design_times_weights() {
        let z = random(20, 25, 5);
        let y = random(20, 2, 6);
        let z_new = random(5, 25, 7);
        let f = RidgeFactorization::new(z).unwrap();
        let lambdas = [2.0, 20.0];
        let pred = f.predict(z_new.view(), y.view(), &lambdas).unwrap();
        let via_w = z_new.dot(&f.weights(y.view(), &lambdas).unwrap());
        assert!(max_rel(&pred, &via_w) < 1e-12);
    }

    #[test]
    fn segments_match_stacked_projection() {
        let z = random(10, 3, 8);
        let y = random(16, 2, 9);
        let segs = [0..4, 10..16];
        let f = RidgeFactorization::new(z).unwrap();
        let stacked = stack_rows(y.view(), &segs);
        let a = f.project(stacked.view());
        let b = f.project_segments(y.view(), &segs);
        assert!(max_rel(&a, &b) < 1e-14);
    }

    #[test]
    fn rejects_non_finite() {
        let mut z = random(4, 2, 10);
        z[[1, 1]] = f64::INFINITY;
        assert!(RidgeFactorization::new(z).is_err());
    }
}
