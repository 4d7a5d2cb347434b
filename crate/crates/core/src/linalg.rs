//! Small dense least-squares helpers.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct OlsFit {
    pub beta: Vec<f64>,
    pub std_err: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares via QR. `rows` are the regressor vectors.
/// Returns `None` when the design is rank deficient.
pub(crate) fn ols(rows: &[Vec<f64>], y: &[f64]) -> Option<OlsFit> {
    let n = rows.len();
    let k = rows.first()?.len();
    if n < k || k == 0 {
        return None;
    }
    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let diag_min = (0..k).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(diag_max > 0.0) || diag_min <= 1e-10 * diag_max {
        return None;
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty)?;
    let fitted = &x * &beta;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let dof = n.saturating_sub(k).max(1) as f64;
    let s2 = rss / dof;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k))?;
    let cov_unscaled = &r_inv * r_inv.transpose();
    let std_err = (0..k).map(|i| (s2 * cov_unscaled[(i, i)]).sqrt()).collect();
    Some(OlsFit {
        beta: beta.iter().copied().collect(),
        std_err,
        residuals,
    })
}
