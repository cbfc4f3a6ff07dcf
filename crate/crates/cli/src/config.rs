//! Run configuration: a TOML file with one table per concern. Unknown keys
//! are rejected so that typos cannot silently fall back to defaults.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use moranwf::env::{sample_jump_path, DiffusionSelectionSpec, EnvironmentPath, MarkovJumpSpec, StepFunction};
use moranwf::moments::{ClosureKind, DEFAULT_DT_ODE};
use moranwf::rng::{split_seed, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Prefix of every output file; defaults to the config file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community: Option<CommunityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_diffusion: Option<SelectionDiffusionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closure: Option<ClosureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_map: Option<SlopeMapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hitting: Option<HittingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumConfig>,
}

/// Output grid `t_k = k horizon / points`, k = 0..=points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub points: usize,
}

/// Initial proportions of the first S species and the immigration pool (S+1 entries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunityConfig {
    pub x0: Vec<f64>,
    pub pool: Vec<f64>,
}

/// Immigration `m` and one selection schedule per free species, in diffusion units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub m: Schedule,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s: Vec<Schedule>,
    /// Seed for sampling jump schedules; defaults to the simulation seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant { value: f64 },
    /// Cycle through `values`, holding each for `period`.
    Switching { period: f64, values: Vec<f64> },
    /// Markov jump process with generator `rates` over `states`.
    Jump { states: Vec<f64>, rates: Vec<Vec<f64>>, initial: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionDiffusionConfig {
    pub c: f64,
    pub b: f64,
    pub m_s: f64,
    pub p_s: f64,
    pub v0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Moran,
    Sde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: ModelKind,
    /// Community size, Moran model only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<u64>,
    /// Euler-Maruyama step, diffusion only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub n_reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    /// N: moments up to order N (two species) or exponents up to N in each variable.
    pub order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_ode: Option<f64>,
    /// Fit the error-bound constant against an order-2N run.
    #[serde(default, skip_serializing_if = "is_false")]
    pub calibrate: bool,
    /// With a selection diffusion: also solve the `s = 0` system.
    #[serde(default, skip_serializing_if = "is_false")]
    pub neutral_reference: bool,
}

/// Rerun the two-species closure with constant selection set to each value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub s: Vec<f64>,
}

/// Sign of `dE[S]/dt` at t = 0 over a grid of initial proportions and selections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeMapConfig {
    pub x_points: usize,
    pub s_from: f64,
    pub s_to: f64,
    pub s_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitTarget {
    T1,
    T0,
    T10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingConfig {
    pub targets: Vec<HitTarget>,
    /// Moment used as the CDF proxy; defaults to the closure order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_high: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    M,
    P,
    S,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::M => "m",
            Param::P => "p",
            Param::S => "s",
        }
    }
}

/// Sweep of the invariant law over `vary`, one curve per `family_values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub vary: Param,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub m: f64,
    pub p: f64,
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Param>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub family_values: Vec<f64>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid configuration: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        if cfg.name.is_none() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("run")
    }

    pub fn time(&self) -> Result<&TimeConfig> {
        let t = self.time.as_ref().context("missing [time] table")?;
        ensure!(t.horizon > 0.0 && t.horizon.is_finite(), "time.horizon must be positive (got {})", t.horizon);
        ensure!(t.points >= 1, "time.points must be at least 1");
        Ok(t)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        let t = self.time()?;
        Ok((0..=t.points).map(|k| t.horizon * k as f64 / t.points as f64).collect())
    }

    pub fn community(&self) -> Result<&CommunityConfig> {
        let c = self.community.as_ref().context("missing [community] table")?;
        ensure!(!c.x0.is_empty(), "community.x0 must list at least one proportion");
        ensure!(
            c.pool.len() == c.x0.len() + 1,
            "community.pool needs {} entries (one per species), got {}",
            c.x0.len() + 1,
            c.pool.len()
        );
        ensure!(c.x0.iter().all(|&v| (0.0..=1.0).contains(&v)), "community.x0 entries must lie in [0,1]");
        ensure!(c.x0.iter().sum::<f64>() <= 1.0 + 1e-12, "community.x0 must sum to at most 1");
        Ok(c)
    }

    pub fn simulation(&self) -> Result<&SimulationConfig> {
        let s = self.simulation.as_ref().context("missing [simulation] table")?;
        ensure!(s.n_reps >= 2, "simulation.n_reps must be at least 2 (got {})", s.n_reps);
        match s.model {
            ModelKind::Moran => {
                let j = s.j.context("simulation.j is required for the moran model")?;
                ensure!(j >= 2, "simulation.j must be at least 2 (got {j})");
            }
            ModelKind::Sde => {
                if let Some(dt) = s.dt {
                    ensure!(dt > 0.0 && dt.is_finite(), "simulation.dt must be positive (got {dt})");
                }
            }
        }
        Ok(s)
    }

    pub fn closure(&self) -> Result<&ClosureConfig> {
        let c = self.closure.as_ref().context("missing [closure] table")?;
        ensure!(c.order >= 2, "closure.order must be at least 2 (got {})", c.order);
        if let Some(dt) = c.dt_ode {
            ensure!(dt > 0.0 && dt.is_finite(), "closure.dt_ode must be positive (got {dt})");
        }
        Ok(c)
    }

    pub fn dt_ode(&self) -> Result<f64> {
        Ok(self.closure()?.dt_ode.unwrap_or(DEFAULT_DT_ODE))
    }

    pub fn selection_spec(&self) -> Result<Option<DiffusionSelectionSpec>> {
        self.selection_diffusion
            .map(|d| {
                DiffusionSelectionSpec::new(d.c, d.b, d.m_s, d.p_s, d.v0).context("invalid [selection_diffusion]")
            })
            .transpose()
    }

    pub fn closure_kind(&self) -> Result<ClosureKind> {
        let species = self.community()?.x0.len() + 1;
        Ok(match (species, self.selection_diffusion.is_some()) {
            (2, false) => ClosureKind::TwoSpecies,
            (2, true) => ClosureKind::WfSelection,
            (3, false) => ClosureKind::ThreeSpecies,
            (3, true) => bail!("selection_diffusion is only supported with two species"),
            (n, _) => bail!("moment closures cover two or three species (community has {n})"),
        })
    }

    fn env_seed(&self) -> u64 {
        let env = self.environment.as_ref().and_then(|e| e.seed);
        env.or(self.simulation.as_ref().map(|s| s.seed)).unwrap_or(0)
    }

    /// Realize the environment on `[0, horizon]`. Jump schedules are sampled
    /// once from the environment seed, so every command sees the same path.
    pub fn environment_path(&self) -> Result<EnvironmentPath> {
        let horizon = self.time()?.horizon;
        let community = self.community()?;
        let env = self.environment.as_ref().context("missing [environment] table")?;
        let n_free = community.x0.len();
        let s_schedules: Vec<Schedule> = if env.s.is_empty() && self.selection_diffusion.is_some() {
            vec![Schedule::Constant { value: 0.0 }]
        } else {
            env.s.clone()
        };
        ensure!(
            s_schedules.len() == n_free,
            "environment.s needs one schedule per free species ({n_free}), got {}",
            s_schedules.len()
        );
        let seed = self.env_seed();
        let m = step_function(&env.m, horizon, seed, 0, "environment.m")?;
        ensure!(m.values.iter().all(|&v| v >= 0.0), "environment.m values must be nonnegative");
        let s = s_schedules
            .iter()
            .enumerate()
            .map(|(i, sch)| step_function(sch, horizon, seed, i as u64 + 1, &format!("environment.s[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        EnvironmentPath::from_components(&m, &s, community.pool.clone(), horizon).context("invalid environment")
    }
}

fn step_function(sch: &Schedule, horizon: f64, seed: u64, index: u64, key: &str) -> Result<StepFunction> {
    match sch {
        Schedule::Constant { value } => {
            ensure!(value.is_finite(), "{key}.value must be finite");
            Ok(StepFunction::constant(*value))
        }
        Schedule::Switching { period, values } => {
            ensure!(*period > 0.0 && period.is_finite(), "{key}.period must be positive (got {period})");
            ensure!(!values.is_empty(), "{key}.values must not be empty");
            ensure!(values.iter().all(|v| v.is_finite()), "{key}.values must be finite");
            let n = (horizon / period).ceil().max(1.0) as usize;
            let breakpoints: Vec<f64> = (0..n).map(|k| k as f64 * period).filter(|&t| t < horizon).collect();
            let values = (0..breakpoints.len()).map(|k| values[k % values.len()]).collect();
            Ok(StepFunction { breakpoints, values })
        }
        Schedule::Jump { states, rates, initial } => {
            let spec = MarkovJumpSpec::new(states.clone(), rates.clone(), *initial).with_context(|| format!("invalid {key}"))?;
            let mut rng = stream(split_seed(seed, 0x5EED_0000 + index));
            Ok(sample_jump_path(&spec, horizon, &mut rng)?)
        }
    }
}
