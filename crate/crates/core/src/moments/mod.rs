//! Closed moment systems and what can be read off them: the expected Simpson
//! index, hitting-time distributions and a priori truncation bounds.
//!
//! Moments obey an infinite linear hierarchy; truncating it at order N gives
//! a finite system `dM/dt = A(t) M + C(t)`. Three hierarchies are provided
//! (see [`ClosureKind`]). Time-dependent coefficients come from an
//! [`EnvironmentPath`], one matrix per segment.

mod bound;
mod builders;
mod diagnostics;
mod hitting;
mod integrate;

use std::io::Write;

pub use bound::{calibrate_error_constant, error_bound};
pub use builders::{
    build_three_species, build_two_species, build_wf_selection, BivariateIndex, ClosureKind, ClosureMatrix,
};
pub use diagnostics::{symmetrized_max_eigenvalue, weighted_error_matrix, weighted_errors, Tridiagonal};
pub use hitting::{hitting_cdf, HittingTarget};
pub use integrate::{effective_step, integrate_piecewise, DEFAULT_DT_ODE};

use crate::env::{DiffusionSelectionSpec, EnvironmentPath};
use crate::error::{invalid, Result};
use crate::io::fmt_f64;

/// A closure of given kind and order attached to an environment.
#[derive(Debug, Clone)]
pub struct ClosureProblem<'a> {
    pub kind: ClosureKind,
    pub order: usize,
    pub env: &'a EnvironmentPath,
    /// Required for [`ClosureKind::WfSelection`], ignored otherwise.
    pub selection: Option<DiffusionSelectionSpec>,
}

impl<'a> ClosureProblem<'a> {
    pub fn new(
        kind: ClosureKind,
        order: usize,
        env: &'a EnvironmentPath,
        selection: Option<DiffusionSelectionSpec>,
    ) -> Result<Self> {
        let species = env.n_species();
        let expected = match kind {
            ClosureKind::TwoSpecies | ClosureKind::WfSelection => 2,
            ClosureKind::ThreeSpecies => 3,
        };
        if species > 3 {
            return Err(invalid(format!(
                "moment closure is implemented for at most three species (environment has {species})"
            )));
        }
        if species != expected {
            return Err(invalid(format!(
                "{} closure needs {expected} species, the environment has {species}",
                kind.name()
            )));
        }
        if kind == ClosureKind::WfSelection {
            match &selection {
                Some(spec) => spec.validate()?,
                None => return Err(invalid("wf_selection closure needs a selection diffusion spec")),
            }
        }
        Ok(Self { kind, order, env, selection })
    }

    pub fn dim(&self) -> usize {
        self.kind.dim(self.order)
    }

    /// Coefficient matrix on environment segment `i`.
    pub fn matrix(&self, i: usize) -> Result<ClosureMatrix> {
        let seg = &self.env.segments()[i];
        let pool = self.env.pool();
        match self.kind {
            ClosureKind::TwoSpecies => build_two_species(self.order, seg.m, pool[0], seg.s[0]),
            ClosureKind::ThreeSpecies => build_three_species(self.order, seg.m, pool[0], pool[1], seg.s[0], seg.s[1]),
            ClosureKind::WfSelection => {
                build_wf_selection(self.order, seg.m, pool[0], self.selection.as_ref().expect("checked in new"))
            }
        }
    }

    /// Moments of a deterministic initial state. `x0` holds X (and Y for
    /// three species); for wf_selection the initial v comes from the spec.
    pub fn dirac_moments(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match self.kind {
            ClosureKind::TwoSpecies => {
                let x = single(x0)?;
                Ok((1..=self.order).map(|k| x.powi(k as i32)).collect())
            }
            ClosureKind::ThreeSpecies | ClosureKind::WfSelection => {
                let (x, y) = if self.kind == ClosureKind::ThreeSpecies {
                    if x0.len() != 2 || x0[0] + x0[1] > 1.0 + 1e-12 {
                        return Err(invalid("three-species start needs (x0, y0) with x0 + y0 <= 1"));
                    }
                    (x0[0], x0[1])
                } else {
                    (single(x0)?, self.selection.expect("checked in new").v0)
                };
                if !in_unit(x) || !in_unit(y) {
                    return Err(invalid("initial proportions must lie in [0,1]"));
                }
                let idx = BivariateIndex::new(self.order);
                Ok((0..idx.dim())
                    .map(|i| {
                        let (n, k) = idx.exponents(i);
                        x.powi(n as i32) * y.powi(k as i32)
                    })
                    .collect())
            }
        }
    }

    /// Integrate from explicit initial moments.
    pub fn solve_from(&self, y0: Vec<f64>, grid: &[f64], dt_ode: f64) -> Result<MomentTrajectory> {
        if y0.len() != self.dim() {
            return Err(invalid(format!(
                "initial moment vector has length {}, expected {}",
                y0.len(),
                self.dim()
            )));
        }
        let moments = integrate_piecewise(self.env, |i| self.matrix(i), &y0, grid, dt_ode)?;
        Ok(MomentTrajectory { kind: self.kind, order: self.order, grid: grid.to_vec(), moments })
    }

    pub fn solve(&self, x0: &[f64], grid: &[f64], dt_ode: f64) -> Result<MomentTrajectory> {
        self.solve_from(self.dirac_moments(x0)?, grid, dt_ode)
    }
}

fn single(x0: &[f64]) -> Result<f64> {
    match x0 {
        [x] => Ok(*x),
        _ => Err(invalid("two-species start needs exactly one initial proportion")),
    }
}

/// Integrate a closure from a deterministic initial state.
pub fn solve_moments(
    kind: ClosureKind,
    order: usize,
    env: &EnvironmentPath,
    x0: &[f64],
    selection: Option<DiffusionSelectionSpec>,
    grid: &[f64],
    dt_ode: f64,
) -> Result<MomentTrajectory> {
    ClosureProblem::new(kind, order, env, selection)?.solve(x0, grid, dt_ode)
}

/// Moment vectors on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub kind: ClosureKind,
    pub order: usize,
    pub grid: Vec<f64>,
    pub moments: Vec<Vec<f64>>,
}

impl MomentTrajectory {
    fn column(&self, i: usize) -> Vec<f64> {
        self.moments.iter().map(|m| m[i]).collect()
    }

    /// `E[X^k]` (two species) over the grid.
    pub fn moment(&self, k: usize) -> Vec<f64> {
        assert!(self.kind == ClosureKind::TwoSpecies && k >= 1 && k <= self.order);
        self.column(k - 1)
    }

    /// `E[X^n Y^k]` (bivariate kinds) over the grid.
    pub fn joint_moment(&self, n: usize, k: usize) -> Vec<f64> {
        assert!(self.kind != ClosureKind::TwoSpecies);
        let i = BivariateIndex::new(self.order).index(n, k).expect("exponents inside the closure");
        self.column(i)
    }

    /// `E[X]` over the grid.
    pub fn mean_x(&self) -> Vec<f64> {
        match self.kind {
            ClosureKind::TwoSpecies => self.moment(1),
            _ => self.joint_moment(1, 0),
        }
    }

    /// `E[Y]` (three species) or `E[v]` (wf_selection).
    pub fn mean_second(&self) -> Vec<f64> {
        self.joint_moment(0, 1)
    }

    pub fn simpson(&self) -> Vec<f64> {
        self.moments.iter().map(|m| simpson_expectation(self.kind, self.order, m)).collect()
    }

    pub fn column_labels(&self) -> Vec<String> {
        match self.kind {
            ClosureKind::TwoSpecies => (1..=self.order).map(|k| format!("m_{k}")).collect(),
            _ => {
                let idx = BivariateIndex::new(self.order);
                (0..idx.dim())
                    .map(|i| {
                        let (n, k) = idx.exponents(i);
                        format!("m_{n}_{k}")
                    })
                    .collect()
            }
        }
    }

    /// Columns `t` then one per tracked moment.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.column_labels());
        writeln!(w, "{}", header.join(","))?;
        for (t, m) in self.grid.iter().zip(&self.moments) {
            let mut row = vec![fmt_f64(*t)];
            row.extend(m.iter().map(|&v| fmt_f64(v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Expected Simpson index from a moment vector.
///
/// Two species (and wf_selection, whose community has two species):
/// `1 - 2E[X] + 2E[X^2]`. Three species, with `Z = 1 - X - Y`:
/// `1 - 2E[X] - 2E[Y] + 2E[X^2] + 2E[Y^2] + 2E[XY]`.
pub fn simpson_expectation(kind: ClosureKind, order: usize, moments: &[f64]) -> f64 {
    match kind {
        ClosureKind::TwoSpecies => 1.0 - 2.0 * moments[0] + 2.0 * moments[1],
        ClosureKind::WfSelection => {
            let idx = BivariateIndex::new(order);
            let at = |n, k| moments[idx.index(n, k).expect("order >= 2")];
            1.0 - 2.0 * at(1, 0) + 2.0 * at(2, 0)
        }
        ClosureKind::ThreeSpecies => {
            let idx = BivariateIndex::new(order);
            let at = |n, k| moments[idx.index(n, k).expect("order >= 2")];
            1.0 - 2.0 * at(1, 0) - 2.0 * at(0, 1) + 2.0 * at(2, 0) + 2.0 * at(0, 2) + 2.0 * at(1, 1)
        }
    }
}

/// Expected Simpson index under diffusion-driven selection next to the
/// neutral (`s = 0`) curve with the same immigration.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralComparison {
    pub grid: Vec<f64>,
    pub annealed: Vec<f64>,
    pub neutral: Vec<f64>,
    /// `E[X_t]` under the annealed and the neutral system.
    pub annealed_mean_x: Vec<f64>,
    pub neutral_mean_x: Vec<f64>,
    /// False when the spec does not give `E[s_t] = 0`.
    pub mean_neutral: bool,
}

/// Compare `c v - b` selection that is neutral on average with `s = 0`.
/// `env` supplies `m` and the pool; its selection field is ignored.
pub fn annealed_simpson_neutral_mean(
    spec: &DiffusionSelectionSpec,
    order: usize,
    env: &EnvironmentPath,
    x0: f64,
    grid: &[f64],
    dt_ode: f64,
) -> Result<NeutralComparison> {
    let mean_neutral = spec.is_mean_neutral();
    if !mean_neutral {
        log::warn!(
            "selection diffusion (c = {}, b = {}, p_s = {}, v0 = {}) is not neutral on average; \
             neutrality needs p_s = v0 = 1/2 and b = c/2",
            spec.c,
            spec.b,
            spec.p_s,
            spec.v0
        );
    }
    let annealed = solve_moments(ClosureKind::WfSelection, order, env, &[x0], Some(*spec), grid, dt_ode)?;
    let neutral_segments =
        env.segments().iter().map(|seg| crate::env::Segment::new(seg.m, vec![0.0])).collect();
    let neutral_env =
        EnvironmentPath::new(env.breakpoints().to_vec(), neutral_segments, env.pool().to_vec(), env.horizon())?;
    let neutral = solve_moments(ClosureKind::TwoSpecies, order, &neutral_env, &[x0], None, grid, dt_ode)?;
    Ok(NeutralComparison {
        grid: grid.to_vec(),
        annealed: annealed.simpson(),
        neutral: neutral.simpson(),
        annealed_mean_x: annealed.mean_x(),
        neutral_mean_x: neutral.mean_x(),
        mean_neutral,
    })
}
