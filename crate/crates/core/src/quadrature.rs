//! Gaussian quadrature on the unit interval.
//!
//! Rules are built by Golub-Welsch from the Jacobi three-term recurrence, so
//! the same code yields Gauss-Legendre (`a = b = 0`) and Gauss-Jacobi rules
//! for the weight `y^a (1-y)^b` with integrable endpoint singularities
//! (`a, b > -1`). Weights are normalized to sum to one: a rule integrates
//! against the Beta(a+1, b+1) probability law rather than the raw weight.

use crate::error::{Error, Result};
use crate::linalg::symmetric_tridiagonal_eigen;

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Gauss-Jacobi rule on (0,1) for the normalized weight `y^a (1-y)^b / B(a+1, b+1)`.
    pub fn jacobi_unit(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("quadrature order must be positive".into()));
        }
        if !(a > -1.0 && b > -1.0) {
            return Err(Error::InvalidArgument(format!(
                "Jacobi exponents must exceed -1 (got {a}, {b})"
            )));
        }
        // standard Jacobi on [-1,1] with weight (1-x)^alpha (1+x)^beta; y = (1+x)/2
        let (alpha, beta) = (b, a);
        let ab = alpha + beta;
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for k in 0..n {
            let kf = k as f64;
            let d = if k == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                let t = 2.0 * kf + ab;
                (beta * beta - alpha * alpha) / (t * (t + 2.0))
            };
            diag.push(d);
            if k + 1 < n {
                let j = (k + 1) as f64;
                let bk = if k == 0 {
                    4.0 * (alpha + 1.0) * (beta + 1.0) / ((ab + 2.0).powi(2) * (ab + 3.0))
                } else {
                    let t = 2.0 * j + ab;
                    4.0 * j * (j + alpha) * (j + beta) * (j + ab) / (t * t * (t + 1.0) * (t - 1.0))
                };
                off.push(bk.sqrt());
            }
        }
        let (x, first) = symmetric_tridiagonal_eigen(&diag, &off)?;
        let nodes = x.iter().map(|xi| 0.5 * (1.0 + xi)).collect();
        let weights = first.iter().map(|z| z * z).collect();
        Ok(Self { nodes, weights })
    }

    /// Gauss-Legendre rule on (0,1), weights summing to one.
    pub fn legendre_unit(n: usize) -> Result<Self> {
        Self::jacobi_unit(n, 0.0, 0.0)
    }

    /// Sum of `w_i f(y_i)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&y, &w)| w * f(y)).sum()
    }

    /// Integral of `f` over `[lo, hi]` treating this as a Legendre rule.
    pub fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = hi - lo;
        h * self.expect(|u| f(lo + h * u))
    }
}

/// Adaptive Gauss-Legendre integration of a smooth function on `[lo, hi]`.
///
/// Each panel is evaluated at 20 and 40 nodes. A panel is accepted when the
/// two estimates agree to `tol` relative to the whole integral (apportioned
/// by panel width) or to rounding level; otherwise it is bisected.
pub fn adaptive_legendre(lo: f64, hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    thread_local! {
        static RULES: (GaussRule, GaussRule) = (
            GaussRule::legendre_unit(20).expect("fixed order"),
            GaussRule::legendre_unit(40).expect("fixed order"),
        );
    }
    const MAX_PANELS: usize = 1 << 16;
    RULES.with(|(coarse, fine)| {
        let width = (hi - lo).abs();
        if width == 0.0 {
            return 0.0;
        }
        let scale = fine.integrate(lo, hi, &f).abs().max(f64::MIN_POSITIVE);
        let mut stack = vec![(lo, hi)];
        let mut acc = 0.0;
        let mut panels = 0usize;
        while let Some((a, b)) = stack.pop() {
            panels += 1;
            let c = coarse.integrate(a, b, &f);
            let fi = fine.integrate(a, b, &f);
            let target = (tol * scale * (b - a).abs() / width).max(64.0 * f64::EPSILON * fi.abs());
            if (c - fi).abs() <= target || panels + stack.len() >= MAX_PANELS {
                acc += fi;
            } else {
                let mid = 0.5 * (a + b);
                stack.push((mid, b));
                stack.push((a, mid));
            }
        }
        acc
    })
}
