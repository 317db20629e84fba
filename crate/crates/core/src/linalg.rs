//! Small dense linear-algebra kernels.
//!
//! Matrix products go through ndarray's BLAS backend; the symmetric
//! eigendecomposition is LAPACK's (`dsyevd`). The Cholesky solver is written
//! out here so the per-λ dense ridge path stays independent of the spectral
//! path it validates.

use std::sync::Once;

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};

extern "C" {
    fn openblas_set_num_threads(n: std::os::raw::c_int);
}

/// Forces OpenBLAS to run single-threaded. Parallelism is handled by rayon
/// over fixed output blocks, which keeps results independent of the worker
/// count.
pub fn pin_blas_threads() {
    static PIN: Once = Once::new();
    PIN.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// Lower Cholesky factor `L` of a symmetric positive-definite matrix.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Data(format!("cholesky of a non-square {}x{} matrix", n, a.ncols())));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) {
            return Err(Error::Numeric(format!("matrix is not positive definite (pivot {j} = {diag:e})")));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ X = B` given the lower factor `L`.
pub fn cholesky_solve(l: &Array2<f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for mut col in x.columns_mut() {
        // forward: L y = b
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= l[[i, k]] * col[k];
            }
            col[i] = s / l[[i, i]];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= l[[k, i]] * col[k];
            }
            col[i] = s / l[[i, i]];
        }
    }
    x
}

/// Eigendecomposition of a symmetric matrix; eigenvalues ascending, negative
/// round-off clamped to zero.
pub fn symmetric_eigen(a: Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (mut vals, vecs) = a
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Numeric(format!("symmetric eigendecomposition failed: {e}")))?;
    vals.mapv_inplace(|v| v.max(0.0));
    Ok((vals, vecs))
}

/// `AᵀA`.
pub fn gram_cols(a: ArrayView2<'_, f64>) -> Array2<f64> {
    a.t().dot(&a)
}

/// `AAᵀ`.
pub fn gram_rows(a: ArrayView2<'_, f64>) -> Array2<f64> {
    a.dot(&a.t())
}
