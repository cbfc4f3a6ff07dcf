//! Weighted truncation-error system of the two-species closure.
//!
//! With `E = M - M~` the gap between true and truncated moments, the weighted
//! error `D_k = s^(k-1) E_k / (k-1)!` solves `dD = W D + B` where `W` is
//! tridiagonal:
//!
//! ```text
//! W[k][k-1] = s k (1 + mp / (k-1)),   W[k][k] = k (s - (k-1) - m),   W[k][k+1] = -k^2
//! ```
//!
//! and the last diagonal entry is `-n(n-1+m)`. The spectrum of the symmetric
//! part stays bounded as n grows, which is what keeps the error controlled.

use crate::error::{invalid, Result};
use crate::linalg::symmetric_tridiagonal_eigen;

/// Tridiagonal matrix: `sub[i] = A[i+1][i]`, `sup[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub sub: Vec<f64>,
    pub sup: Vec<f64>,
}

pub fn weighted_error_matrix(n: usize, m: f64, p: f64, s: f64) -> Result<Tridiagonal> {
    if n < 2 {
        return Err(invalid("the weighted error system needs n >= 2"));
    }
    let diag = (1..=n)
        .map(|k| {
            let kf = k as f64;
            if k < n {
                kf * (s - (kf - 1.0) - m)
            } else {
                -kf * (kf - 1.0 + m)
            }
        })
        .collect();
    let sub = (2..=n)
        .map(|k| {
            let kf = k as f64;
            s * kf * (1.0 + m * p / (kf - 1.0))
        })
        .collect();
    let sup = (1..n).map(|k| -((k * k) as f64)).collect();
    Ok(Tridiagonal { diag, sub, sup })
}

/// Largest eigenvalue of `duration (W + W^T)` for constant coefficients.
pub fn symmetrized_max_eigenvalue(n: usize, m: f64, p: f64, s: f64, duration: f64) -> Result<f64> {
    let w = weighted_error_matrix(n, m, p, s)?;
    let diag: Vec<f64> = w.diag.iter().map(|d| 2.0 * duration * d).collect();
    let off: Vec<f64> = w.sub.iter().zip(&w.sup).map(|(a, b)| duration * (a + b)).collect();
    let (vals, _) = symmetric_tridiagonal_eigen(&diag, &off)?;
    Ok(*vals.last().expect("n >= 2"))
}

/// `s^(k-1) (reference_k - approx_k) / (k-1)!` for k = 1..len.
pub fn weighted_errors(approx: &[f64], reference: &[f64], s: f64) -> Vec<f64> {
    let mut w = 1.0;
    approx
        .iter()
        .zip(reference)
        .enumerate()
        .map(|(i, (a, r))| {
            if i > 0 {
                w *= s / i as f64;
            }
            w * (r - a)
        })
        .collect()
}
