//! A priori truncation bound of the two-species closure.

use statrs::function::gamma::ln_gamma;

use super::builders::ClosureKind;
use super::ClosureProblem;
use crate::env::EnvironmentPath;
use crate::error::{invalid, Result};

/// `C sqrt(N) s^(N-1) / (N-1)!`, evaluated in logarithms.
///
/// The constant `C` grows (exponentially) with the time horizon and is not
/// known in closed form; pass 1 for the bare rate or a value from
/// [`calibrate_error_constant`]. Orders below 2 are clamped to 2.
pub fn error_bound(order: usize, s_sup: f64, c_cal: f64) -> f64 {
    let n = order.max(2) as f64;
    let s = s_sup.abs();
    if s == 0.0 || c_cal == 0.0 {
        return 0.0;
    }
    (c_cal.ln() + 0.5 * n.ln() + (n - 1.0) * s.ln() - ln_gamma(n)).exp()
}

/// Largest gap between the expected Simpson index at orders N and 2N on
/// `grid`, divided by the bare bound at order N. Returns 1 when the bound
/// vanishes (neutral selection).
pub fn calibrate_error_constant(env: &EnvironmentPath, x0: f64, order: usize, grid: &[f64], dt_ode: f64) -> Result<f64> {
    if env.n_species() != 2 {
        return Err(invalid("calibration is defined for the two-species closure"));
    }
    let bare = error_bound(order, env.s_sup(), 1.0);
    if bare == 0.0 {
        return Ok(1.0);
    }
    let solve = |n| ClosureProblem::new(ClosureKind::TwoSpecies, n, env, None)?.solve(&[x0], grid, dt_ode);
    let lo = solve(order)?.simpson();
    let hi = solve(2 * order)?.simpson();
    let gap = lo.iter().zip(&hi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(gap / bare)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neutral_bound_vanishes() {
        assert_eq!(error_bound(5, 0.0, 1.0), 0.0);
    }

    #[test]
    fn factorial_arithmetic() {
        // sqrt(20) 2^19 / 19!
        let expect = 20f64.sqrt() * 2f64.powi(19) / 121_645_100_408_832_000.0;
        assert!((error_bound(20, 2.0, 1.0) / expect - 1.0).abs() < 1e-12);
        assert!((error_bound(10, 2.0, 3.0) / (3.0 * 10f64.sqrt() * 512.0 / 362_880.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decreasing_past_threshold() {
        for &s in &[0.5, 2.0, 5.0] {
            let start = (2.0 * s) as usize + 2;
            for n in start..start + 60 {
                assert!(error_bound(n + 1, s, 1.0) < error_bound(n, s, 1.0), "s={s} n={n}");
            }
        }
    }
}
