//! Invariant law of the two-species diffusion with constant `m > 0`:
//! `pi(y) = c y^{mp-1} (1-y)^{m(1-p)-1} e^{sy}` on (0,1).
//!
//! Expectations are computed as `E_Beta[f e^{sy}] / E_Beta[e^{sy}]` with a
//! Gauss-Jacobi rule for the Beta(mp, m(1-p)) weight, so the endpoint
//! singularities of `pi` are integrated exactly.

use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

const DEFAULT_ORDER: usize = 256;
const CDF_ORDER: usize = 96;

#[derive(Debug, Clone)]
pub struct InvariantDensity {
    pub m: f64,
    pub p: f64,
    pub s: f64,
    a: f64,
    b: f64,
    rule: GaussRule,
    /// `e^{s y}` is evaluated as `e^{s y - shift}` to stay bounded.
    shift: f64,
    /// `E_Beta[e^{s y - shift}]`
    tilt: f64,
    left: GaussRule,
    right: GaussRule,
}

impl InvariantDensity {
    pub fn new(m: f64, p: f64, s: f64) -> Result<Self> {
        Self::with_order(m, p, s, DEFAULT_ORDER)
    }

    pub fn with_order(m: f64, p: f64, s: f64, order: usize) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::NoInvariantMeasure(format!("immigration rate m = {m} must be positive")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::NoInvariantMeasure(format!("pool proportion p = {p} must lie in (0,1)")));
        }
        if !s.is_finite() {
            return Err(Error::NoInvariantMeasure("selection must be finite".into()));
        }
        let (a, b) = (m * p, m * (1.0 - p));
        let rule = GaussRule::jacobi_unit(order, a - 1.0, b - 1.0)?;
        let shift = s.max(0.0);
        let tilt = rule.expect(|y| (s * y - shift).exp());
        let left = GaussRule::jacobi_unit(CDF_ORDER, a - 1.0, 0.0)?;
        let right = GaussRule::jacobi_unit(CDF_ORDER, b - 1.0, 0.0)?;
        Ok(Self { m, p, s, a, b, rule, shift, tilt, left, right })
    }

    /// `ln c`
    pub fn ln_normalizer(&self) -> f64 {
        -ln_beta(self.a, self.b) - self.tilt.ln() - self.shift
    }

    pub fn normalizer(&self) -> f64 {
        self.ln_normalizer().exp()
    }

    pub fn density(&self, y: f64) -> f64 {
        if !(y > 0.0 && y < 1.0) {
            return 0.0;
        }
        (self.ln_normalizer() + (self.a - 1.0) * y.ln() + (self.b - 1.0) * (-y).ln_1p() + self.s * y).exp()
    }

    /// `E_pi[f]`
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let (s, shift) = (self.s, self.shift);
        self.rule.expect(|y| f(y) * (s * y - shift).exp()) / self.tilt
    }

    /// `int_0^1 pi`, one up to quadrature error.
    pub fn total_mass(&self) -> f64 {
        self.expect(|_| 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.expect(|y| y)
    }

    /// `P(Y <= x)`. Integrates over the shorter side of x so the weight
    /// singularity sits at an endpoint of the rule.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let (a, b, s) = (self.a, self.b, self.s);
        let ln_c = self.ln_normalizer();
        if x <= 0.5 {
            // y = x u: x^a int u^{a-1} (1 - x u)^{b-1} e^{s x u} du
            let e = self.left.expect(|u| ((b - 1.0) * (-x * u).ln_1p() + s * x * u).exp());
            (ln_c + a * x.ln() - a.ln() + e.ln()).exp().min(1.0)
        } else {
            // y = 1 - (1-x) w
            let z = 1.0 - x;
            let e = self.right.expect(|w| ((a - 1.0) * (-z * w).ln_1p() + s * (1.0 - z * w)).exp());
            (1.0 - (ln_c + b * z.ln() - b.ln() + e.ln()).exp()).max(0.0)
        }
    }

    /// Median by bisection on the CDF.
    pub fn median(&self) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Mean and variance of `y^2 + (1-y)^2` under the invariant law.
pub fn equilibrium_simpson(m: f64, p: f64, s: f64) -> Result<(f64, f64)> {
    let pi = InvariantDensity::new(m, p, s)?;
    let simpson = |y: f64| y * y + (1.0 - y) * (1.0 - y);
    let mean = pi.expect(simpson);
    let second = pi.expect(|y| simpson(y).powi(2));
    Ok((mean, (second - mean * mean).max(0.0)))
}

/// `min(e^s / m, 8 e^{(1-M) s} / m)` with M the median of the invariant law,
/// for `s >= 0`; negative `s` uses the reflection `y -> 1-y`, `p -> 1-p`.
///
/// The variance of `P_t f` then decays like `exp(-2 t / c_P)`.
pub fn poincare_bound(m: f64, p: f64, s: f64) -> Result<f64> {
    if s < 0.0 {
        return poincare_bound(m, 1.0 - p, -s);
    }
    let pi = InvariantDensity::new(m, p, s)?;
    let median = pi.median();
    Ok((s.exp() / m).min(8.0 * ((1.0 - median) * s).exp() / m))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSummary {
    pub mean_simpson: f64,
    pub var_simpson: f64,
    pub normalizer: f64,
    pub median: f64,
    pub poincare_bound: f64,
}

pub fn equilibrium_summary(m: f64, p: f64, s: f64) -> Result<EquilibriumSummary> {
    let pi = InvariantDensity::new(m, p, s)?;
    let (mean_simpson, var_simpson) = equilibrium_simpson(m, p, s)?;
    Ok(EquilibriumSummary {
        mean_simpson,
        var_simpson,
        normalizer: pi.normalizer(),
        median: pi.median(),
        poincare_bound: poincare_bound(m, p, s)?,
    })
}
