//! Small dense-matrix helpers shared across the crate.

use nalgebra::{Complex, DMatrix};

/// (X + X') / 2. All covariance-like outputs pass through this so that
/// asymmetry cannot accumulate over long iterations.
pub(crate) fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x + x.transpose()) * 0.5
}

/// Largest absolute entry of X - X'.
pub(crate) fn max_asymmetry(x: &DMatrix<f64>) -> f64 {
    (x - x.transpose()).abs().max()
}

/// tr(X Y) without forming the full product.
pub(crate) fn trace_product(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(x.ncols(), y.nrows());
    x.iter()
        .zip(y.transpose().iter())
        .map(|(a, b)| a * b)
        .sum()
}

/// M^k by repeated multiplication (k is tiny here).
pub(crate) fn mat_pow(m: &DMatrix<f64>, k: u32) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Numerical rank by singular-value thresholding: values at or below
/// `rel_tol * sigma_max` count as zero.
pub(crate) fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Rank of a complex matrix, same thresholding rule.
pub(crate) fn rank_complex(m: &DMatrix<Complex<f64>>, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(x: &DMatrix<f64>) -> f64 {
    x.clone().symmetric_eigen().eigenvalues.min()
}

/// Largest eigenvalue magnitude of a symmetric matrix.
pub(crate) fn max_abs_eigenvalue(x: &DMatrix<f64>) -> f64 {
    x.clone().symmetric_eigen().eigenvalues.abs().max()
}
