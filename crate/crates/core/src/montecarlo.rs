//! Replicate ensembles and their comparison with the moment closure.
//!
//! Replicate `k` draws from [`crate::rng::replicate_stream`]`(master, k)`.
//! Replicates are grouped in fixed chunks of 64; each chunk is reduced with
//! Welford's update and chunks are merged in index order, so a summary is
//! bit-identical for a given seed whatever the thread count.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::env::{DiffusionSelectionSpec, EnvironmentPath};
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::moran::{simpson_discrete, simulate_moran, DiscreteState};
use crate::rng::{replicate_stream, Stream};
use crate::wf_sde::{em_simulate, simpson_continuous, EmOptions, SimplexState};

const CHUNK: usize = 64;
/// Normal quantile of the two-sided 95% interval.
pub const Z95: f64 = 1.96;

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }
}

/// Per-time statistics of one tracked quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct StatSummary {
    pub name: String,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub ci_half: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub grid: Vec<f64>,
    pub n_reps: usize,
    pub stats: Vec<StatSummary>,
}

impl McSummary {
    pub fn stat(&self, name: &str) -> Option<&StatSummary> {
        self.stats.iter().find(|s| s.name == name)
    }

    /// Long format: `t, stat, mean, var, ci_half`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,stat,mean,var,ci_half")?;
        for st in &self.stats {
            for (k, t) in self.grid.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt_f64(*t),
                    st.name,
                    fmt_f64(st.mean[k]),
                    fmt_f64(st.var[k]),
                    fmt_f64(st.ci_half[k])
                )?;
            }
        }
        Ok(())
    }
}

/// Run `n_reps` replicates of `one`, which returns `values[stat][time]`, and
/// summarize them per statistic and grid time.
pub fn run_replicates<F>(grid: &[f64], names: &[String], n_reps: usize, master_seed: u64, one: F) -> Result<McSummary>
where
    F: Fn(&mut Stream) -> Result<Vec<Vec<f64>>> + Sync,
{
    if n_reps < 2 {
        return Err(invalid(format!("need at least two replicates (got {n_reps})")));
    }
    let (n_stats, n_t) = (names.len(), grid.len());
    let n_chunks = n_reps.div_ceil(CHUNK);
    let partials: Vec<Result<Vec<Welford>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Welford::default(); n_stats * n_t];
            for k in c * CHUNK..((c + 1) * CHUNK).min(n_reps) {
                let mut rng = replicate_stream(master_seed, k as u64);
                let values = one(&mut rng)?;
                if values.len() != n_stats || values.iter().any(|v| v.len() != n_t) {
                    return Err(invalid("replicate returned values of the wrong shape"));
                }
                for (i, row) in values.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        acc[i * n_t + j].push(v);
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Welford::default(); n_stats * n_t];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part?) {
            t.merge(&p);
        }
    }
    let stats = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let cells = &total[i * n_t..(i + 1) * n_t];
            let var: Vec<f64> = cells.iter().map(Welford::variance).collect();
            StatSummary {
                name: name.clone(),
                mean: cells.iter().map(Welford::mean).collect(),
                ci_half: var.iter().map(|v| Z95 * (v / n_reps as f64).sqrt()).collect(),
                var,
            }
        })
        .collect();
    Ok(McSummary { grid: grid.to_vec(), n_reps, stats })
}

/// Which simulator an ensemble runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// Discrete Moran model with community size `j`.
    Moran { j: u64 },
    /// Euler-Maruyama diffusion.
    Sde { dt: f64, coupled: Option<DiffusionSelectionSpec> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub model: Model,
    pub env: EnvironmentPath,
    /// Initial proportions of the first S species.
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub grid: Vec<f64>,
}

/// Names of the statistics an ensemble tracks: `x_1..x_{S+1}`, `simpson`
/// and, for the coupled diffusion, `v`.
pub fn stat_names(config: &EnsembleConfig) -> Vec<String> {
    let n = config.env.n_species();
    let mut names: Vec<String> = (1..=n).map(|i| format!("x_{i}")).collect();
    names.push("simpson".into());
    if matches!(config.model, Model::Sde { coupled: Some(_), .. }) {
        names.push("v".into());
    }
    names
}

pub fn run_ensemble(config: &EnsembleConfig, n_reps: usize, master_seed: u64) -> Result<McSummary> {
    let names = stat_names(config);
    let n = config.env.n_species();
    if config.x0.len() + 1 != n {
        return Err(invalid(format!(
            "x0 has {} entries but the environment has {n} species",
            config.x0.len()
        )));
    }
    match config.model {
        Model::Moran { j } => {
            let init = DiscreteState::from_proportions(&config.x0, j)?;
            run_replicates(&config.grid, &names, n_reps, master_seed, |rng| {
                let tr = simulate_moran(&init, &config.env, config.t_end, &config.grid, rng)?;
                let mut out = vec![Vec::with_capacity(config.grid.len()); names.len()];
                for st in &tr.states {
                    for (i, col) in out.iter_mut().take(n).enumerate() {
                        col.push(st.proportion(i));
                    }
                    out[n].push(simpson_discrete(st)?);
                }
                Ok(out)
            })
        }
        Model::Sde { dt, coupled } => {
            let x0 = SimplexState::new(config.x0.clone())?;
            let opts = EmOptions { dt, coupled };
            run_replicates(&config.grid, &names, n_reps, master_seed, |rng| {
                let path = em_simulate(&x0, &config.env, config.t_end, &config.grid, &opts, rng)?;
                let mut out = vec![Vec::with_capacity(config.grid.len()); names.len()];
                for st in &path.states {
                    let full = st.full();
                    for (i, col) in out.iter_mut().take(n).enumerate() {
                        col.push(full[i]);
                    }
                    out[n].push(simpson_continuous(st.x()));
                }
                if let Some(v) = path.v {
                    out[n + 1] = v;
                }
                Ok(out)
            })
        }
    }
}

/// Agreement between a Monte Carlo statistic and a closure curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub stat: String,
    pub n_points: usize,
    pub max_abs_diff: f64,
    pub fraction_inside: f64,
    pub pass: bool,
}

/// Minimum share of grid points whose closure value must fall in the CI.
pub const PASS_FRACTION: f64 = 0.9;

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stat={} points={} max_abs_diff={:.3e} inside_ci={:.3} result={}",
            self.stat,
            self.n_points,
            self.max_abs_diff,
            self.fraction_inside,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Passes when at least 90% of grid points have the closure value inside the
/// 95% band `mean ± ci_half` (bounds inclusive).
pub fn compare_to_closure(summary: &McSummary, stat: &str, grid: &[f64], closure: &[f64]) -> Result<ComparisonReport> {
    let st = summary
        .stat(stat)
        .ok_or_else(|| invalid(format!("summary has no statistic named {stat:?}")))?;
    if grid.len() != summary.grid.len() || closure.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "summary has {} points, closure grid {} and values {}",
            summary.grid.len(),
            grid.len(),
            closure.len()
        )));
    }
    if let Some((a, b)) = summary.grid.iter().zip(grid).find(|(a, b)| (*a - *b).abs() > 1e-12 * (1.0 + a.abs())) {
        return Err(Error::GridMismatch(format!("grid times differ: {a} vs {b}")));
    }
    let mut inside = 0usize;
    let mut max_abs_diff = 0.0f64;
    for k in 0..grid.len() {
        let d = (st.mean[k] - closure[k]).abs();
        max_abs_diff = max_abs_diff.max(d);
        if d <= st.ci_half[k] {
            inside += 1;
        }
    }
    let n = grid.len();
    let fraction_inside = if n == 0 { 0.0 } else { inside as f64 / n as f64 };
    Ok(ComparisonReport {
        stat: stat.to_string(),
        n_points: n,
        max_abs_diff,
        fraction_inside,
        pass: n > 0 && fraction_inside >= PASS_FRACTION,
    })
}

/// `k T / n` for k = 1..n.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| t_end * k as f64 / n as f64).collect()
}
