//! Fixed-step RK4 for `dM/dt = A(t) M + C(t)` with piecewise-constant coefficients.

use super::builders::ClosureMatrix;
use crate::env::EnvironmentPath;
use crate::error::{invalid, Error, Result};

/// Default requested ODE step; refined automatically for stiff systems.
pub const DEFAULT_DT_ODE: f64 = 1e-3;

/// Largest step used for a matrix: `min(dt, 0.5 / max |A_ii|)`.
pub fn effective_step(a: &ClosureMatrix, dt: f64) -> f64 {
    let d = a.max_abs_diagonal();
    if d > 0.0 {
        dt.min(0.5 / d)
    } else {
        dt
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    fn step(&mut self, a: &ClosureMatrix, y: &mut [f64], h: f64) {
        let n = y.len();
        a.apply(y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        a.apply(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        a.apply(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        a.apply(&self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// Integrate from `y0` at time 0, returning the state at every grid time.
/// `matrix_for(i)` builds the coefficients of environment segment `i`.
pub fn integrate_piecewise(
    env: &EnvironmentPath,
    mut matrix_for: impl FnMut(usize) -> Result<ClosureMatrix>,
    y0: &[f64],
    grid: &[f64],
    dt: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("ODE step must be positive (got {dt})")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    let t_end = grid.last().copied().unwrap_or(0.0);
    if let Some(&bad) = grid.iter().find(|&&t| !(0.0..=env.horizon()).contains(&t)) {
        return Err(Error::OutOfRange { t: bad, horizon: env.horizon() });
    }
    let mut stops: Vec<f64> = grid.iter().copied().chain(env.interior_breakpoints(t_end)).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut y = y0.to_vec();
    let mut rk = Rk4::new(y.len());
    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    let mut t = 0.0;
    let mut cached: Option<(usize, ClosureMatrix, f64)> = None;
    while next < grid.len() && grid[next] <= t {
        out.push(y.clone());
        next += 1;
    }
    for &stop in &stops {
        if stop > t {
            let seg = env.segment_index(t)?;
            if cached.as_ref().map(|c| c.0) != Some(seg) {
                let a = matrix_for(seg)?;
                if a.dim() != y.len() {
                    return Err(invalid("closure matrix and initial moments differ in size"));
                }
                let h = effective_step(&a, dt);
                if h < dt {
                    log::debug!("stiff closure: ODE step refined from {dt} to {h}");
                }
                cached = Some((seg, a, h));
            }
            let (_, a, h_max) = cached.as_ref().expect("just filled");
            let len = stop - t;
            let k = ((len / h_max - 1e-9).ceil() as usize).max(1);
            let h = len / k as f64;
            for _ in 0..k {
                rk.step(a, &mut y, h);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericalDomain(format!("moment system diverged before t = {stop}")));
            }
            t = stop;
        }
        while next < grid.len() && grid[next] <= t {
            out.push(y.clone());
            next += 1;
        }
    }
    Ok(out)
}
