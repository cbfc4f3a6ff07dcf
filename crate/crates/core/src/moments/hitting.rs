//! Hitting-time distributions of the boundaries without immigration.
//!
//! When `m = 0` both boundaries absorb and `E[X_t^n] -> P(T_1 <= t)` as
//! `n -> infinity`. The distribution of `T_0` is read off the mirrored
//! system (species swapped: `s -> -s`, `x0 -> 1 - x0`), which tracks
//! `E[(1 - X_t)^n]` directly instead of expanding it binomially.

use super::builders::ClosureKind;
use super::ClosureProblem;
use crate::env::EnvironmentPath;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HittingTarget {
    /// First time X reaches 1.
    T1,
    /// First time X reaches 0.
    T0,
    /// First time X reaches either boundary.
    T10,
}

/// Approximate CDF of the requested hitting time on `grid`, from the
/// closure of order `order` using moment `n_high <= order`. A running
/// maximum makes the result nondecreasing.
pub fn hitting_cdf(
    env: &EnvironmentPath,
    x0: f64,
    order: usize,
    n_high: usize,
    which: HittingTarget,
    grid: &[f64],
    dt_ode: f64,
) -> Result<Vec<f64>> {
    if !env.is_immigration_free() {
        return Err(Error::UnsupportedRegime(
            "hitting-time distributions need an immigration-free environment (m = 0)".into(),
        ));
    }
    if n_high == 0 || n_high > order {
        return Err(invalid(format!("moment order {n_high} must lie in 1..={order}")));
    }
    if !(0.0..=1.0).contains(&x0) {
        return Err(invalid(format!("x0 = {x0} outside [0,1]")));
    }
    let high_moment = |env: &EnvironmentPath, x: f64| -> Result<Vec<f64>> {
        let tr = ClosureProblem::new(ClosureKind::TwoSpecies, order, env, None)?.solve(&[x], grid, dt_ode)?;
        Ok(tr.moment(n_high))
    };
    let raw = match which {
        HittingTarget::T1 => high_moment(env, x0)?,
        HittingTarget::T0 => high_moment(&env.mirrored_two_species()?, 1.0 - x0)?,
        HittingTarget::T10 => {
            let one = high_moment(env, x0)?;
            let zero = high_moment(&env.mirrored_two_species()?, 1.0 - x0)?;
            one.iter().zip(&zero).map(|(a, b)| a + b).collect()
        }
    };
    let mut best = f64::NEG_INFINITY;
    Ok(raw
        .into_iter()
        .map(|v| {
            best = best.max(v.clamp(0.0, 1.0));
            best
        })
        .collect())
}
