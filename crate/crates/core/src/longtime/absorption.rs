//! Fixation probability and mean absorption time when `m = 0`.

use rand::Rng;
use rayon::prelude::*;

use crate::env::{EnvironmentPath, Segment};
use crate::error::{invalid, Result};
use crate::quadrature::adaptive_legendre;
use crate::rng::replicate_stream;
use crate::wf_sde::first_absorption;

const QUAD_TOL: f64 = 1e-13;

/// `P(T_1 < T_0) = (e^{-s x0} - 1) / (e^{-s} - 1)`, with limit `x0` at `s = 0`.
/// `x0` must lie in `[0, 1]`.
pub fn absorption_prob(s: f64, x0: f64) -> f64 {
    if x0 <= 0.0 {
        return 0.0;
    }
    if x0 >= 1.0 {
        return 1.0;
    }
    if s.abs() < 1e-6 {
        // second-order expansion around s = 0
        return x0 * (1.0 + 0.5 * s * (1.0 - x0) + s * s * (1.0 - x0) * (1.0 - 2.0 * x0) / 12.0);
    }
    if s < 0.0 {
        return 1.0 - absorption_prob(-s, 1.0 - x0);
    }
    (-s * x0).exp_m1() / (-s).exp_m1()
}

/// `(e^z - 1) / z`
#[inline]
fn phi(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// Mean time to reach {0, 1}: the solution `g` of
/// `x(1-x) g'' + s x(1-x) g' = -1`, `g(0) = g(1) = 0`, at `x0`.
///
/// With `G(x) = (1 - e^{-sx})/s`, `F(x) = int_{1/2}^x e^{st} / (t(1-t)) dt`
/// and `J(x) = int_0^x (e^{su} - 1)/(su(1-u)) du`,
/// `g(x) = K G(x) - G(x) F(x) + J(x)` where K enforces `g(1) = 0`. The
/// logarithmic singularity of F at 0 is integrated analytically; for
/// `x > 1/2` the symmetry `g(s, x) = g(-s, 1-x)` keeps the singular end at 0.
pub fn expected_absorption_time(s: f64, x0: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(invalid(format!("x0 = {x0} outside [0,1]")));
    }
    if x0 == 0.0 || x0 == 1.0 {
        return Ok(0.0);
    }
    if x0 > 0.5 {
        return Ok(g_left(-s, 1.0 - x0));
    }
    Ok(g_left(s, x0))
}

fn g_left(s: f64, x: f64) -> f64 {
    let big_g = |x: f64| x * phi(-s * x);
    let k_g1 = adaptive_legendre(0.5, 1.0, QUAD_TOL, |u| phi(-s * (1.0 - u)) / u)
        - adaptive_legendre(0.0, 0.5, QUAD_TOL, |u| phi(s * u) / (1.0 - u));
    let k = k_g1 / big_g(1.0);
    let f = (2.0 * x).ln() - adaptive_legendre(x, 0.5, QUAD_TOL, |t| s * phi(s * t) + (s * t).exp() / (1.0 - t));
    let j = adaptive_legendre(0.0, x, QUAD_TOL, |u| phi(s * u) / (1.0 - u));
    let gx = big_g(x);
    k * gx - gx * f + j
}

/// Absorption outcomes of independent two-species paths.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionSample {
    /// Absorbed at 1.
    pub fixed: usize,
    /// Absorbed at 0.
    pub lost: usize,
    /// Still polymorphic at the horizon.
    pub unabsorbed: usize,
    /// Hitting times of absorbed paths, in replicate order.
    pub times: Vec<f64>,
}

impl AbsorptionSample {
    pub fn total(&self) -> usize {
        self.fixed + self.lost + self.unabsorbed
    }

    pub fn fixation_frequency(&self) -> f64 {
        self.fixed as f64 / self.total() as f64
    }

    pub fn absorbed_frequency(&self) -> f64 {
        (self.fixed + self.lost) as f64 / self.total() as f64
    }

    /// Sample mean and its standard error.
    pub fn mean_time(&self) -> (f64, f64) {
        let n = self.times.len() as f64;
        let mean = self.times.iter().sum::<f64>() / n;
        let var = self.times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }
}

/// Run `replicates` paths from `x0` in `env` (which must be immigration-free
/// for the result to mean absorption) until they hit a boundary or the horizon.
pub fn simulate_absorptions(
    x0: f64,
    env: &EnvironmentPath,
    dt: f64,
    replicates: usize,
    master_seed: u64,
) -> Result<AbsorptionSample> {
    let outcomes: Vec<Result<Option<(f64, u8)>>> = (0..replicates as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_stream(master_seed, k);
            Ok(first_absorption(x0, env, dt, &mut rng)?.map(|a| (a.t_hit, a.boundary)))
        })
        .collect();
    let mut sample = AbsorptionSample { fixed: 0, lost: 0, unabsorbed: 0, times: Vec::new() };
    for o in outcomes {
        match o? {
            Some((t, 1)) => {
                sample.fixed += 1;
                sample.times.push(t);
            }
            Some((t, _)) => {
                sample.lost += 1;
                sample.times.push(t);
            }
            None => sample.unabsorbed += 1,
        }
    }
    Ok(sample)
}

/// Fraction of paths absorbed by `horizon` when the selection flips between
/// `+s0` and `-s0` with a fresh random sign on every interval of length `period`.
pub fn random_switching_absorption_check(
    s0: f64,
    x0: f64,
    period: f64,
    horizon: f64,
    replicates: usize,
    dt: f64,
    master_seed: u64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(invalid(format!("x0 = {x0} outside [0,1]")));
    }
    if x0 == 0.0 || x0 == 1.0 {
        return Ok(1.0);
    }
    if !(period > 0.0 && horizon > 0.0) || replicates == 0 {
        return Err(invalid("period, horizon and replicate count must be positive"));
    }
    let absorbed: Vec<Result<bool>> = (0..replicates as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_stream(master_seed, k);
            let n_seg = (horizon / period).ceil() as usize;
            let breakpoints: Vec<f64> =
                (0..n_seg).map(|i| i as f64 * period).filter(|&t| t < horizon).collect();
            let segments = breakpoints
                .iter()
                .map(|_| Segment::new(0.0, vec![if rng.random::<bool>() { s0 } else { -s0 }]))
                .collect();
            let env = EnvironmentPath::new(breakpoints, segments, vec![0.5, 0.5], horizon)?;
            Ok(first_absorption(x0, &env, dt, &mut rng)?.is_some())
        })
        .collect();
    let mut hits = 0usize;
    for a in absorbed {
        hits += a? as usize;
    }
    Ok(hits as f64 / replicates as f64)
}
