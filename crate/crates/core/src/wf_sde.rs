//! Wright-Fisher diffusion with selection and immigration on the simplex.
//!
//! For proportions `x = (x^1..x^S)` of the first S species (the last one is
//! `1 - sum x`),
//!
//! ```text
//! dx^i = [m (p^i - x^i) + x^i (s^i - sum_k x^k s^k)] dt + (sigma(x) dW)^i
//! sigma sigma^T = a,   a_ii = 2 x^i (1 - x^i),   a_ij = -2 x^i x^j
//! ```
//!
//! integrated by Euler-Maruyama with a clamp-and-rescale projection back onto
//! the simplex. Optionally the selection of a two-species community is driven
//! by an independent neutral Wright-Fisher diffusion `v` through `s = c v - b`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::env::{DiffusionSelectionSpec, EnvironmentPath};
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::linalg::{pivoted_cholesky, SquareMatrix};

const SIMPLEX_TOL: f64 = 1e-12;
/// Coordinates this close to a boundary are snapped onto it.
pub const SNAP_TOL: f64 = 1e-9;
/// Default Euler-Maruyama step in rescaled time.
pub const DEFAULT_DT: f64 = 1e-4;

/// Free coordinates of a point of the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexState {
    x: Vec<f64>,
}

impl SimplexState {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(invalid("a simplex state needs at least one free coordinate"));
        }
        if x.iter().any(|&v| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&v)) {
            return Err(invalid(format!("coordinates must lie in [0,1]: {x:?}")));
        }
        if x.iter().sum::<f64>() > 1.0 + SIMPLEX_TOL {
            return Err(invalid(format!("coordinates sum above 1: {x:?}")));
        }
        Ok(Self { x })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// All S+1 proportions.
    pub fn full(&self) -> Vec<f64> {
        let mut f = self.x.clone();
        f.push(last_coordinate(&self.x));
        f
    }
}

#[inline]
fn last_coordinate(x: &[f64]) -> f64 {
    (1.0 - x.iter().sum::<f64>()).max(0.0)
}

/// Drift of the free coordinates. `p` has S+1 entries, `s` has S.
pub fn drift(x: &[f64], m: f64, p: &[f64], s: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    drift_into(x, m, p, s, &mut out);
    out
}

fn drift_into(x: &[f64], m: f64, p: &[f64], s: &[f64], out: &mut [f64]) {
    let mean_s: f64 = x.iter().zip(s).map(|(a, b)| a * b).sum();
    for i in 0..x.len() {
        out[i] = m * (p[i] - x[i]) + x[i] * (s[i] - mean_s);
    }
}

pub fn diffusion_matrix(x: &[f64]) -> SquareMatrix {
    let n = x.len();
    let mut a = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let v = if i == j { 2.0 * x[i] * (1.0 - x[i]) } else { -2.0 * x[i] * x[j] };
            a.set(i, j, v);
        }
    }
    a
}

/// Square-root factor `sigma` with `sigma sigma^T = a(x)`.
pub fn diffusion_factor(x: &[f64]) -> Result<SquareMatrix> {
    pivoted_cholesky(&diffusion_matrix(x), 1e-15, 1e-10)
}

/// `sum_i (x^i)^2` over all S+1 species.
pub fn simpson_continuous(x: &[f64]) -> f64 {
    let last = last_coordinate(x);
    x.iter().map(|v| v * v).sum::<f64>() + last * last
}

/// First time a two-species path reaches a boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorption {
    pub t_hit: f64,
    /// The value of X at the hit: 0 or 1.
    pub boundary: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub dt: f64,
    pub coupled: Option<DiffusionSelectionSpec>,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { dt: DEFAULT_DT, coupled: None }
    }
}

/// Recorded states of one diffusion path.
#[derive(Debug, Clone, PartialEq)]
pub struct SdePath {
    pub grid: Vec<f64>,
    pub states: Vec<SimplexState>,
    /// Selection-driving diffusion, when coupled.
    pub v: Option<Vec<f64>>,
    /// First boundary hit (two species only).
    pub absorption: Option<Absorption>,
}

impl SdePath {
    /// Columns `t, x_1..x_S, [v,] simpson`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let s = self.states.first().map_or(0, |st| st.dim());
        let mut header = vec!["t".to_string()];
        header.extend((1..=s).map(|i| format!("x_{i}")));
        if self.v.is_some() {
            header.push("v".into());
        }
        header.push("simpson".into());
        writeln!(w, "{}", header.join(","))?;
        for (k, (t, st)) in self.grid.iter().zip(&self.states).enumerate() {
            let mut row = vec![fmt_f64(*t)];
            row.extend(st.x.iter().map(|&v| fmt_f64(v)));
            if let Some(v) = &self.v {
                row.push(fmt_f64(v[k]));
            }
            row.push(fmt_f64(simpson_continuous(&st.x)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Columns `t_hit, boundary`; empty body when the path was not absorbed.
    pub fn write_absorption_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_hit,boundary")?;
        if let Some(a) = self.absorption {
            writeln!(w, "{},{}", fmt_f64(a.t_hit), a.boundary)?;
        }
        Ok(())
    }
}

/// Per-path integrator state and scratch space.
struct Integrator<'a> {
    env: &'a EnvironmentPath,
    dt: f64,
    coupled: Option<DiffusionSelectionSpec>,
    x: Vec<f64>,
    v: f64,
    t: f64,
    absorption: Option<Absorption>,
    drift: Vec<f64>,
    noise: Vec<f64>,
    kick: Vec<f64>,
    s_buf: Vec<f64>,
}

impl<'a> Integrator<'a> {
    fn new(x0: &SimplexState, env: &'a EnvironmentPath, opts: &EmOptions) -> Result<Self> {
        if !(opts.dt > 0.0 && opts.dt.is_finite()) {
            return Err(invalid(format!("time step must be positive (got {})", opts.dt)));
        }
        let s = x0.dim();
        if env.n_species() != s + 1 {
            return Err(invalid(format!(
                "state has {} species but the environment pool has {}",
                s + 1,
                env.n_species()
            )));
        }
        if let Some(spec) = &opts.coupled {
            spec.validate()?;
            if s != 1 {
                return Err(invalid("diffusion-driven selection is defined for two species only"));
            }
        }
        warn_step_size(env, opts, s);
        let mut it = Self {
            env,
            dt: opts.dt,
            coupled: opts.coupled,
            x: x0.x.clone(),
            v: opts.coupled.map_or(0.0, |c| c.v0),
            t: 0.0,
            absorption: None,
            drift: vec![0.0; s],
            noise: vec![0.0; s],
            kick: vec![0.0; s],
            s_buf: vec![0.0; s],
        };
        project(&mut it.x);
        it.check_absorbed();
        Ok(it)
    }

    fn check_absorbed(&mut self) {
        if self.absorption.is_none() && self.x.len() == 1 {
            let x = self.x[0];
            if x == 0.0 || x == 1.0 {
                self.absorption = Some(Absorption { t_hit: self.t, boundary: x as u8 });
            }
        }
    }

    /// Advance to `t_stop`, which must not cross an environment breakpoint.
    fn advance_to<R: Rng + ?Sized>(&mut self, t_stop: f64, rng: &mut R) -> Result<()> {
        let len = t_stop - self.t;
        if len <= 0.0 {
            return Ok(());
        }
        let env = self.env;
        let seg = &env.segments()[env.segment_index(self.t)?];
        let (m, pool) = (seg.m, env.pool());
        let k = ((len / self.dt - 1e-9).ceil() as usize).max(1);
        let h = len / k as f64;
        let sqrt_h = h.sqrt();
        let frozen = |x: &[f64]| m == 0.0 && x.len() == 1 && (x[0] == 0.0 || x[0] == 1.0);
        for step in 1..=k {
            if let Some(spec) = self.coupled {
                let s_now = spec.selection(self.v);
                if !frozen(&self.x) {
                    self.step_two_species(m, pool[0], s_now, h, sqrt_h, rng);
                }
                let v = self.v;
                let dv = spec.m_s * (spec.p_s - v) * h + (2.0 * v * (1.0 - v)).max(0.0).sqrt() * sqrt_h * normal(rng);
                self.v = snap((v + dv).clamp(0.0, 1.0));
            } else if !frozen(&self.x) {
                if self.x.len() == 1 {
                    self.step_two_species(m, pool[0], seg.s[0], h, sqrt_h, rng);
                } else {
                    self.s_buf.copy_from_slice(&seg.s);
                    self.step_general(m, pool, h, sqrt_h, rng)?;
                }
            }
            self.t = if step == k { t_stop } else { self.t + h };
            self.check_absorbed();
        }
        Ok(())
    }

    fn step_two_species<R: Rng + ?Sized>(&mut self, m: f64, p: f64, s: f64, h: f64, sqrt_h: f64, rng: &mut R) {
        let x = self.x[0];
        let mu = m * (p - x) + s * x * (1.0 - x);
        let sd = (2.0 * x * (1.0 - x)).max(0.0).sqrt();
        let next = x + mu * h + sd * sqrt_h * normal(rng);
        self.x[0] = snap(next.clamp(0.0, 1.0));
    }

    fn step_general<R: Rng + ?Sized>(&mut self, m: f64, pool: &[f64], h: f64, sqrt_h: f64, rng: &mut R) -> Result<()> {
        drift_into(&self.x, m, pool, &self.s_buf, &mut self.drift);
        let sigma = diffusion_factor(&self.x)?;
        for z in self.noise.iter_mut() {
            *z = normal(rng);
        }
        sigma.mul_vec_into(&self.noise, &mut self.kick);
        for i in 0..self.x.len() {
            self.x[i] += self.drift[i] * h + self.kick[i] * sqrt_h;
        }
        project(&mut self.x);
        Ok(())
    }
}

#[inline]
fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

#[inline]
fn snap(x: f64) -> f64 {
    if x < SNAP_TOL {
        0.0
    } else if x > 1.0 - SNAP_TOL {
        1.0
    } else {
        x
    }
}

/// Clamp onto `[0,1]^S`, rescale if the sum exceeds one, snap near-boundary values.
fn project(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = snap(v.clamp(0.0, 1.0));
    }
    let total: f64 = x.iter().sum();
    if total > 1.0 {
        for v in x.iter_mut() {
            *v /= total;
        }
    } else if x.len() > 1 && total > 1.0 - SNAP_TOL {
        // the implied last species is within the snap tolerance of extinction
        for v in x.iter_mut() {
            *v /= total;
        }
    }
}

fn warn_step_size(env: &EnvironmentPath, opts: &EmOptions, s: usize) {
    let mut scale = env.m_sup() + env.s_sup();
    if let Some(c) = &opts.coupled {
        scale += c.m_s + c.c.abs() + c.b.abs();
    }
    if scale > 0.0 && opts.dt >= 0.5 / (s as f64 * scale) {
        log::warn!(
            "Euler-Maruyama step {} is large for drift scale {scale}; results may be unstable",
            opts.dt
        );
    }
}

fn validate_grid(grid: &[f64], t_end: f64) -> Result<()> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    if let Some(&bad) = grid.iter().find(|&&t| !(0.0..=t_end).contains(&t)) {
        return Err(Error::OutOfRange { t: bad, horizon: t_end });
    }
    Ok(())
}

/// Simulate one path to `t_end`, recording the state at each grid time.
pub fn em_simulate<R: Rng + ?Sized>(
    x0: &SimplexState,
    env: &EnvironmentPath,
    t_end: f64,
    grid: &[f64],
    opts: &EmOptions,
    rng: &mut R,
) -> Result<SdePath> {
    if !(t_end >= 0.0) || t_end > env.horizon() {
        return Err(Error::OutOfRange { t: t_end, horizon: env.horizon() });
    }
    validate_grid(grid, t_end)?;
    let mut it = Integrator::new(x0, env, opts)?;
    let mut stops: Vec<f64> = grid.iter().copied().chain(env.interior_breakpoints(t_end)).collect();
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut states = Vec::with_capacity(grid.len());
    let mut vs = Vec::with_capacity(grid.len());
    let mut next = 0;
    let mut record = |it: &Integrator, next: &mut usize| {
        while *next < grid.len() && grid[*next] <= it.t {
            states.push(SimplexState { x: it.x.clone() });
            vs.push(it.v);
            *next += 1;
        }
    };
    record(&it, &mut next);
    for &stop in &stops {
        it.advance_to(stop, rng)?;
        record(&it, &mut next);
    }
    Ok(SdePath {
        grid: grid.to_vec(),
        states,
        v: opts.coupled.map(|_| vs),
        absorption: it.absorption,
    })
}

/// Run a two-species path until it first hits 0 or 1, or until the
/// environment horizon. Returns `None` when still polymorphic at the horizon.
pub fn first_absorption<R: Rng + ?Sized>(x0: f64, env: &EnvironmentPath, dt: f64, rng: &mut R) -> Result<Option<Absorption>> {
    let state = SimplexState::new(vec![x0])?;
    let opts = EmOptions { dt, coupled: None };
    let mut it = Integrator::new(&state, env, &opts)?;
    let mut stops: Vec<f64> = env.interior_breakpoints(env.horizon()).collect();
    stops.push(env.horizon());
    for stop in stops {
        // step in short blocks so absorbed paths stop early
        while it.t < stop && it.absorption.is_none() {
            let target = (it.t + 64.0 * dt).min(stop);
            let target = if stop - target < 1e-12 { stop } else { target };
            it.advance_to(target, rng)?;
        }
        if it.absorption.is_some() {
            break;
        }
    }
    Ok(it.absorption)
}
