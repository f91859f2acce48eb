//! Dense Cholesky factorization and triangular solves.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Returns lower-triangular `L` with `a = L L^T`.
///
/// Only the lower triangle of `a` is read. Fails if a pivot is not strictly
/// positive, which for a ridge-regularized Gram matrix means corrupted state.
pub fn factorize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L z = b` for lower-triangular `L`.
pub fn forward_substitute(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    debug_assert_eq!(b.len(), n);
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for (k, zk) in z.iter().enumerate().take(i) {
            s -= l[(i, k)] * zk;
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// Solves `L^T x = y` for lower-triangular `L`.
pub fn backward_substitute_transposed(l: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    debug_assert_eq!(y.len(), n);
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for (k, xk) in x.iter().enumerate().skip(i + 1) {
            s -= l[(k, i)] * xk;
        }
        x[i] = s / l[(i, i)];
    }
    x
}
