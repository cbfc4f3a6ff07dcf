//! Environment processes: piecewise-constant immigration `m_t` and selection
//! `s_t` over a fixed horizon, plus the fixed immigration pool `p`.
//!
//! Values are stored in rescaled units (the diffusion-scale `m` and `s`). The
//! discrete simulator divides by the population size itself.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{invalid, Error, Result};

const POOL_TOL: f64 = 1e-12;

/// Parameters in force on one segment of an environment path.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub m: f64,
    /// Selection coefficients of the first S species; the last species has zero.
    pub s: Vec<f64>,
}

impl Segment {
    pub fn new(m: f64, s: Vec<f64>) -> Self {
        Self { m, s }
    }
}

/// Environment value at a single time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvPoint<'a> {
    pub m: f64,
    pub s: &'a [f64],
    pub pool: &'a [f64],
}

/// Right-continuous piecewise-constant trajectory of `(m_t, s_t)` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentPath {
    breakpoints: Vec<f64>,
    segments: Vec<Segment>,
    pool: Vec<f64>,
    horizon: f64,
}

impl EnvironmentPath {
    /// Segment `i` covers `[breakpoints[i], breakpoints[i+1])`, the last one
    /// runs to `horizon` inclusive.
    pub fn new(breakpoints: Vec<f64>, segments: Vec<Segment>, pool: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive and finite (got {horizon})")));
        }
        if breakpoints.is_empty() || breakpoints.len() != segments.len() {
            return Err(invalid("need one breakpoint per segment"));
        }
        if breakpoints[0] != 0.0 {
            return Err(invalid("first breakpoint must be 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        if *breakpoints.last().unwrap() >= horizon {
            return Err(invalid("breakpoints must lie before the horizon"));
        }
        validate_pool(&pool)?;
        let n_sel = pool.len() - 1;
        for seg in &segments {
            if !(seg.m >= 0.0 && seg.m.is_finite()) {
                return Err(invalid(format!("immigration rate must be >= 0 (got {})", seg.m)));
            }
            if seg.s.len() != n_sel {
                return Err(invalid(format!(
                    "selection vector has length {}, expected {} for a pool of {} species",
                    seg.s.len(),
                    n_sel,
                    pool.len()
                )));
            }
            if seg.s.iter().any(|v| !v.is_finite()) {
                return Err(invalid("selection coefficients must be finite"));
            }
        }
        Ok(Self { breakpoints, segments, pool, horizon })
    }

    pub fn constant(m: f64, s: Vec<f64>, pool: Vec<f64>, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![Segment::new(m, s)], pool, horizon)
    }

    /// Two-species constant environment.
    pub fn constant_two_species(m: f64, p: f64, s: f64, horizon: f64) -> Result<Self> {
        Self::constant(m, vec![s], vec![p, 1.0 - p], horizon)
    }

    /// Combine independently specified step functions for `m` and each
    /// component of `s` into one path whose breakpoints are the union.
    pub fn from_components(m: &StepFunction, s: &[StepFunction], pool: Vec<f64>, horizon: f64) -> Result<Self> {
        let mut cuts: Vec<f64> = m.breakpoints.clone();
        for f in s {
            cuts.extend_from_slice(&f.breakpoints);
        }
        cuts.retain(|&t| t < horizon);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let segments = cuts
            .iter()
            .map(|&t| Segment::new(m.value_at(t), s.iter().map(|f| f.value_at(t)).collect()))
            .collect();
        Self::new(cuts, segments, pool, horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn pool(&self) -> &[f64] {
        &self.pool
    }

    /// Number of species S+1.
    pub fn n_species(&self) -> usize {
        self.pool.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// End of segment `i`.
    pub fn segment_end(&self, i: usize) -> f64 {
        self.breakpoints.get(i + 1).copied().unwrap_or(self.horizon)
    }

    /// Index of the segment containing `t` (right-continuous).
    pub fn segment_index(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfRange { t, horizon: self.horizon });
        }
        Ok(self.breakpoints.partition_point(|&b| b <= t) - 1)
    }

    pub fn eval(&self, t: f64) -> Result<EnvPoint<'_>> {
        let i = self.segment_index(t)?;
        let seg = &self.segments[i];
        Ok(EnvPoint { m: seg.m, s: &seg.s, pool: &self.pool })
    }

    pub fn is_immigration_free(&self) -> bool {
        self.segments.iter().all(|s| s.m == 0.0)
    }

    /// Largest `|s^i|` over all segments and species.
    pub fn s_sup(&self) -> f64 {
        self.segments.iter().flat_map(|seg| seg.s.iter()).fold(0.0, |a, &v| a.max(v.abs()))
    }

    pub fn m_sup(&self) -> f64 {
        self.segments.iter().fold(0.0, |a, seg| a.max(seg.m))
    }

    /// Same path with the species order reversed for two species:
    /// `s -> -s` and `p -> 1 - p`. Used to express `1 - X` as a forward system.
    pub fn mirrored_two_species(&self) -> Result<Self> {
        if self.pool.len() != 2 {
            return Err(invalid("mirroring is defined for two species only"));
        }
        let segments = self.segments.iter().map(|seg| Segment::new(seg.m, vec![-seg.s[0]])).collect();
        Self::new(self.breakpoints.clone(), segments, vec![self.pool[1], self.pool[0]], self.horizon)
    }

    /// Breakpoints strictly inside `(0, t_end)`.
    pub fn interior_breakpoints(&self, t_end: f64) -> impl Iterator<Item = f64> + '_ {
        self.breakpoints.iter().copied().filter(move |&b| b > 0.0 && b < t_end)
    }
}

/// Evaluate a path at `t`; free-function form of [`EnvironmentPath::eval`].
pub fn eval_env(path: &EnvironmentPath, t: f64) -> Result<EnvPoint<'_>> {
    path.eval(t)
}

fn validate_pool(pool: &[f64]) -> Result<()> {
    if pool.len() < 2 {
        return Err(invalid("the pool must cover at least two species"));
    }
    if pool.iter().any(|&q| !(q >= 0.0)) {
        return Err(invalid("pool entries must be nonnegative"));
    }
    let total: f64 = pool.iter().sum();
    if (total - 1.0).abs() > POOL_TOL {
        return Err(invalid(format!("pool must sum to 1 (sums to {total})")));
    }
    Ok(())
}

/// Cycle through `values` every `period` until `horizon`; the last segment is truncated.
pub fn make_switching_env(period: f64, values: &[(f64, Vec<f64>)], pool: Vec<f64>, horizon: f64) -> Result<EnvironmentPath> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(invalid(format!("switching period must be positive (got {period})")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be positive (got {horizon})")));
    }
    if values.is_empty() {
        return Err(invalid("switching environment needs at least one value"));
    }
    if values.len() == 1 {
        let (m, s) = &values[0];
        return EnvironmentPath::constant(*m, s.clone(), pool, horizon);
    }
    let mut breakpoints = Vec::new();
    let mut segments = Vec::new();
    let mut k = 0usize;
    loop {
        // multiply rather than accumulate so long schedules do not drift
        let t = k as f64 * period;
        if t >= horizon || (k > 0 && horizon - t < 1e-12 * horizon) {
            break;
        }
        let (m, s) = &values[k % values.len()];
        breakpoints.push(t);
        segments.push(Segment::new(*m, s.clone()));
        k += 1;
    }
    EnvironmentPath::new(breakpoints, segments, pool, horizon)
}

/// Scalar right-continuous step function starting at time 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl StepFunction {
    pub fn constant(v: f64) -> Self {
        Self { breakpoints: vec![0.0], values: vec![v] }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= t).max(1) - 1;
        self.values[i]
    }

    /// Time spent in each distinct value up to `horizon`, keyed by index into `values`.
    pub fn occupation(&self, horizon: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, (&b, &v)) in self.breakpoints.iter().zip(&self.values).enumerate() {
            if b >= horizon {
                break;
            }
            let end = self.breakpoints.get(i + 1).copied().unwrap_or(horizon).min(horizon);
            match out.iter_mut().find(|(val, _)| *val == v) {
                Some(entry) => entry.1 += end - b,
                None => out.push((v, end - b)),
            }
        }
        out
    }
}

/// Finite-state continuous-time Markov chain driving one environment field.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovJumpSpec {
    states: Vec<f64>,
    generator: Vec<Vec<f64>>,
    initial: usize,
}

impl MarkovJumpSpec {
    pub fn new(states: Vec<f64>, generator: Vec<Vec<f64>>, initial: usize) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(invalid("jump process needs at least one state"));
        }
        if generator.len() != n || generator.iter().any(|r| r.len() != n) {
            return Err(invalid("generator must be a square matrix matching the state list"));
        }
        if initial >= n {
            return Err(invalid(format!("initial state {initial} out of range")));
        }
        for (i, row) in generator.iter().enumerate() {
            for (j, &q) in row.iter().enumerate() {
                if i != j && !(q >= 0.0 && q.is_finite()) {
                    return Err(invalid(format!("generator entry ({i},{j}) must be >= 0")));
                }
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() > 1e-12 * (1.0 + row[i].abs()) {
                return Err(invalid(format!("generator row {i} sums to {sum}, not 0")));
            }
        }
        Ok(Self { states, generator, initial })
    }

    /// Two states flipping at rates `rate_ab` (a to b) and `rate_ba`.
    pub fn two_state(a: f64, b: f64, rate_ab: f64, rate_ba: f64, initial: usize) -> Result<Self> {
        Self::new(vec![a, b], vec![vec![-rate_ab, rate_ab], vec![rate_ba, -rate_ba]], initial)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn generator(&self) -> &[Vec<f64>] {
        &self.generator
    }

    pub fn initial(&self) -> usize {
        self.initial
    }
}

/// Exact jump-chain sample of `spec` on `[0, horizon]`.
pub fn sample_jump_path<R: Rng + ?Sized>(spec: &MarkovJumpSpec, horizon: f64, rng: &mut R) -> Result<StepFunction> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be positive (got {horizon})")));
    }
    let mut state = spec.initial;
    let mut t = 0.0;
    let mut breakpoints = vec![0.0];
    let mut values = vec![spec.states[state]];
    loop {
        let rate = -spec.generator[state][state];
        if rate <= 0.0 {
            break;
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t >= horizon {
            break;
        }
        let u = rng.random::<f64>() * rate;
        let mut acc = 0.0;
        let mut next = state;
        for (j, &q) in spec.generator[state].iter().enumerate() {
            if j == state {
                continue;
            }
            acc += q;
            next = j;
            if u < acc {
                break;
            }
        }
        state = next;
        breakpoints.push(t);
        values.push(spec.states[state]);
    }
    Ok(StepFunction { breakpoints, values })
}

/// Selection driven by a neutral Wright-Fisher diffusion `v_t`: `s_t = c v_t - b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionSelectionSpec {
    pub c: f64,
    pub b: f64,
    pub m_s: f64,
    pub p_s: f64,
    pub v0: f64,
}

impl DiffusionSelectionSpec {
    pub fn new(c: f64, b: f64, m_s: f64, p_s: f64, v0: f64) -> Result<Self> {
        let spec = Self { c, b, m_s, p_s, v0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.v0) {
            return Err(invalid(format!("v0 must lie in [0,1] (got {})", self.v0)));
        }
        if !(0.0..=1.0).contains(&self.p_s) {
            return Err(invalid(format!("p_s must lie in [0,1] (got {})", self.p_s)));
        }
        if !(self.m_s >= 0.0 && self.m_s.is_finite()) {
            return Err(invalid(format!("m_s must be >= 0 (got {})", self.m_s)));
        }
        if !(self.c.is_finite() && self.b.is_finite()) {
            return Err(invalid("c and b must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn selection(&self, v: f64) -> f64 {
        self.c * v - self.b
    }

    /// `E[s_t] = 0` for all t: requires `v` started at and immigrating toward 1/2
    /// with `b = c/2`.
    pub fn is_mean_neutral(&self) -> bool {
        let tol = 1e-12;
        (self.p_s - 0.5).abs() < tol && (self.v0 - 0.5).abs() < tol && (self.b - 0.5 * self.c).abs() < tol * (1.0 + self.c.abs())
    }
}
