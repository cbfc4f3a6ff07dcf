//! Feller classification of the boundaries 0 and 1.
//!
//! Near 0 the scale density behaves like `x^{-mp}` and the speed density
//! like `x^{mp-1}`, so the classification depends on `beta = mp` only (and on
//! `m(1-p)` at 1): `beta = 0` exit (absorbing), `0 < beta < 1` regular,
//! `beta >= 1` entrance. The borderline `beta = 1` is reported inaccessible.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Reached in finite time and never left.
    Exit,
    /// Reached in finite time and left again.
    Regular,
    /// Never reached from the interior.
    Entrance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryClass {
    pub accessible: bool,
    pub regular: bool,
    pub kind: BoundaryKind,
    /// The criterion value: `mp` at 0, `m(1-p)` at 1.
    pub criterion: f64,
    /// Criterion exactly 1, where the convention decides.
    pub borderline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryReport {
    pub at_zero: BoundaryClass,
    pub at_one: BoundaryClass,
}

fn classify(beta: f64) -> BoundaryClass {
    let kind = if beta == 0.0 {
        BoundaryKind::Exit
    } else if beta < 1.0 {
        BoundaryKind::Regular
    } else {
        BoundaryKind::Entrance
    };
    BoundaryClass {
        accessible: beta < 1.0,
        regular: kind == BoundaryKind::Regular,
        kind,
        criterion: beta,
        borderline: beta == 1.0,
    }
}

pub fn classify_boundaries(m: f64, p: f64) -> Result<BoundaryReport> {
    if !(m >= 0.0 && m.is_finite()) || !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("need m >= 0 and p in [0,1] (got m = {m}, p = {p})")));
    }
    Ok(BoundaryReport { at_zero: classify(m * p), at_one: classify(m * (1.0 - p)) })
}
