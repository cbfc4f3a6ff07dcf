//! Checks shared by the property suites and the acceptance harness. Each
//! returns `Err` with a description on the first violation.
#![allow(dead_code)]

use moranwf::env::{make_switching_env, EnvironmentPath};
use moranwf::linalg::SquareMatrix;
use moranwf::longtime::{absorption_prob, classify_boundaries, BoundaryKind, InvariantDensity};
use moranwf::moments::{
    error_bound, solve_moments, symmetrized_max_eigenvalue, ClosureKind,
};
use moranwf::montecarlo::uniform_grid;
use moranwf::quadrature::adaptive_legendre;
use moranwf::rng::stream;
use moranwf::wf_sde::{diffusion_factor, diffusion_matrix, em_simulate, EmOptions, SimplexState};

pub type Check = Result<(), String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// The Fig 1 environment: m = 2, p = 1/2, s flipping between +2 and -2 every 0.1.
pub fn fig1_env(horizon: f64) -> EnvironmentPath {
    make_switching_env(0.1, &[(2.0, vec![2.0]), (2.0, vec![-2.0])], vec![0.5, 0.5], horizon).unwrap()
}

/// Every recorded state of an Euler-Maruyama path lies in the simplex.
pub fn simplex_preserved(x0: &[f64], m: f64, pool: &[f64], s: &[f64], dt: f64, seed: u64) -> Check {
    let env = EnvironmentPath::constant(m, s.to_vec(), pool.to_vec(), 1.0).map_err(|e| e.to_string())?;
    let start = SimplexState::new(x0.to_vec()).map_err(|e| e.to_string())?;
    let grid = uniform_grid(1.0, 100);
    let mut rng = stream(seed);
    let path = em_simulate(&start, &env, 1.0, &grid, &EmOptions { dt, coupled: None }, &mut rng)
        .map_err(|e| e.to_string())?;
    for (t, st) in grid.iter().zip(&path.states) {
        let x = st.x();
        let total: f64 = x.iter().sum();
        ensure(x.iter().all(|&v| v >= 0.0) && total <= 1.0 + 1e-12, || format!("left simplex at t={t}: {x:?}"))?;
    }
    Ok(())
}

/// `sigma sigma^T` reproduces the Wright-Fisher diffusion matrix.
pub fn factor_reconstructs(x: &[f64], tol: f64) -> Check {
    let sigma = diffusion_factor(x).map_err(|e| e.to_string())?;
    let a = diffusion_matrix(x);
    let d = sigma.gram().frobenius_distance(&a);
    ensure(d <= tol, || format!("|sigma sigma^T - a| = {d:e} at {x:?}"))
}

/// Independent oracle for the diffusion matrix: diag 2x_i(1-x_i), off -2x_i x_j.
pub fn diffusion_matrix_oracle(x: &[f64]) -> SquareMatrix {
    let rows: Vec<Vec<f64>> = (0..x.len())
        .map(|i| (0..x.len()).map(|j| if i == j { 2.0 * x[i] * (1.0 - x[i]) } else { -2.0 * x[i] * x[j] }).collect())
        .collect();
    SquareMatrix::from_rows(&rows).unwrap()
}

/// Two-species closure moments lie in [0,1] and do not increase with order.
pub fn two_species_moments_monotone(m: f64, p: f64, s: f64, x0: f64, order: usize, tol: f64) -> Check {
    let env = EnvironmentPath::constant_two_species(m, p, s, 1.0).map_err(|e| e.to_string())?;
    let grid = uniform_grid(1.0, 20);
    let tr = solve_moments(ClosureKind::TwoSpecies, order, &env, &[x0], None, &grid, 1e-3).map_err(|e| e.to_string())?;
    for (t, mom) in grid.iter().zip(&tr.moments) {
        for (k, &v) in mom.iter().enumerate() {
            ensure((-tol..=1.0 + tol).contains(&v), || format!("E[X^{}]({t}) = {v} outside [0,1]", k + 1))?;
        }
        for k in 1..mom.len() {
            ensure(mom[k] <= mom[k - 1] + tol, || {
                format!("E[X^{}]({t}) = {} exceeds E[X^{k}] = {}", k + 1, mom[k], mom[k - 1])
            })?;
        }
    }
    Ok(())
}

/// Three-species joint moments are bounded by the single-factor ones.
pub fn three_species_moments_bounded(m: f64, x0: [f64; 2], s: [f64; 2], order: usize, tol: f64) -> Check {
    let env = EnvironmentPath::constant(m, s.to_vec(), vec![0.3, 0.3, 0.4], 1.0).map_err(|e| e.to_string())?;
    let grid = uniform_grid(1.0, 10);
    let tr = solve_moments(ClosureKind::ThreeSpecies, order, &env, &x0, None, &grid, 1e-3).map_err(|e| e.to_string())?;
    for n in 1..=order.min(4) {
        for k in 1..=order.min(4) {
            let xy = tr.joint_moment(n, k);
            let xn = tr.joint_moment(n, 0);
            let yk = tr.joint_moment(0, k);
            for i in 0..grid.len() {
                ensure(xy[i] >= -tol && xy[i] <= xn[i].min(yk[i]) + tol, || {
                    format!("E[X^{n} Y^{k}] = {} vs {} and {} at t={}", xy[i], xn[i], yk[i], grid[i])
                })?;
            }
        }
    }
    Ok(())
}

/// `sup_t |E[S_t]_N - E[S_t]_{2N}|` on [0,1] for the Fig 1 configuration.
pub fn fig1_order_gap(order: usize) -> f64 {
    let env = fig1_env(1.0);
    let grid = uniform_grid(1.0, 50);
    let lo = solve_moments(ClosureKind::TwoSpecies, order, &env, &[0.2], None, &grid, 1e-3).unwrap().simpson();
    let hi = solve_moments(ClosureKind::TwoSpecies, 2 * order, &env, &[0.2], None, &grid, 1e-3).unwrap().simpson();
    lo.iter().zip(&hi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Rounding floor for differences of Simpson values near 1.
pub const GAP_FLOOR: f64 = 1e-13;

/// Gaps shrink with the order and stay below the bound with `C = 1`, up to
/// the rounding floor.
pub fn closure_converges(orders: &[usize]) -> Result<Vec<(usize, f64, f64)>, String> {
    let env = fig1_env(1.0);
    let rows: Vec<(usize, f64, f64)> =
        orders.iter().map(|&n| (n, fig1_order_gap(n), error_bound(n, env.s_sup(), 1.0))).collect();
    for w in rows.windows(2) {
        ensure(w[1].1 <= w[0].1.max(GAP_FLOOR), || format!("gap grew from N={} to N={}: {:?}", w[0].0, w[1].0, rows))?;
    }
    for &(n, gap, bound) in &rows {
        ensure(gap <= bound * (1.0 + 1e-9) + GAP_FLOOR, || format!("N={n}: gap {gap:e} above bound {bound:e}"))?;
    }
    Ok(rows)
}

/// Largest eigenvalue of the symmetrized weighted error matrix stays under a
/// constant independent of n.
pub fn gershgorin_bounded(m: f64, p: f64, s: f64, sizes: &[usize]) -> Result<Vec<f64>, String> {
    let vals: Vec<f64> = sizes
        .iter()
        .map(|&n| symmetrized_max_eigenvalue(n, m, p, s, 1.0))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    // Gershgorin discs of W + W^T: for large k the diagonal -2k^2 cancels the
    // two off-diagonals of size about k^2, leaving O(1 + |s|)
    let cap = 2.0 * (s.abs() * (2.0 + m * p) + 1.0) + 1.0;
    ensure(vals.iter().all(|&v| v <= cap), || format!("eigenvalues {vals:?} exceed {cap} (m={m}, p={p}, s={s})"))?;
    Ok(vals)
}

/// `E[S_t]` is nondecreasing without immigration.
pub fn simpson_nondecreasing_two(s: f64, x0: f64, order: usize) -> Check {
    let env = EnvironmentPath::constant_two_species(0.0, 0.5, s, 2.0).map_err(|e| e.to_string())?;
    let grid = uniform_grid(2.0, 40);
    let sim = solve_moments(ClosureKind::TwoSpecies, order, &env, &[x0], None, &grid, 1e-3)
        .map_err(|e| e.to_string())?
        .simpson();
    let start = x0 * x0 + (1.0 - x0) * (1.0 - x0);
    nondecreasing(start, &sim, &grid)
}

pub fn simpson_nondecreasing_three(s: [f64; 2], x0: [f64; 2], order: usize) -> Check {
    let env = EnvironmentPath::constant(0.0, s.to_vec(), vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 2.0)
        .map_err(|e| e.to_string())?;
    let grid = uniform_grid(2.0, 40);
    let sim = solve_moments(ClosureKind::ThreeSpecies, order, &env, &x0, None, &grid, 1e-3)
        .map_err(|e| e.to_string())?
        .simpson();
    let z = 1.0 - x0[0] - x0[1];
    nondecreasing(x0[0] * x0[0] + x0[1] * x0[1] + z * z, &sim, &grid)
}

fn nondecreasing(start: f64, values: &[f64], grid: &[f64]) -> Check {
    let mut prev = start;
    for (t, &v) in grid.iter().zip(values) {
        ensure(v >= prev - 1e-9, || format!("E[S] fell from {prev} to {v} at t={t}"))?;
        prev = v;
    }
    Ok(())
}

/// `P_x(fix; s) + P_{1-x}(fix; -s) = 1`.
pub fn absorption_symmetric(s: f64, x: f64) -> Check {
    let total = absorption_prob(s, x) + absorption_prob(-s, 1.0 - x);
    ensure((total - 1.0).abs() < 1e-12, || format!("s={s} x={x}: sum {total}"))
}

/// The normalized invariant density integrates to one, checked by adaptive
/// quadrature where the density is bounded and by the Beta function at s = 0.
pub fn invariant_normalized(m: f64, p: f64, s: f64, tol: f64) -> Check {
    let pi = InvariantDensity::new(m, p, s).map_err(|e| e.to_string())?;
    let (a, b) = (m * p, m * (1.0 - p));
    if s == 0.0 {
        let beta = statrs::function::beta::ln_beta(a, b);
        ensure((pi.ln_normalizer() + beta).abs() < tol, || {
            format!("ln c = {} vs -ln B = {} (m={m}, p={p})", pi.ln_normalizer(), -beta)
        })?;
    }
    if a >= 1.0 && b >= 1.0 {
        let mass = adaptive_legendre(0.0, 1.0, 1e-13, |y| pi.density(y));
        ensure((mass - 1.0).abs() < tol, || format!("density mass {mass} (m={m}, p={p}, s={s})"))?;
    }
    let mass = pi.total_mass();
    ensure((mass - 1.0).abs() < tol, || format!("quadrature mass {mass} (m={m}, p={p}, s={s})"))
}

/// At `m(1-p) = 1` the boundary 1 is reported borderline and inaccessible.
pub fn borderline_convention() -> Check {
    let r = classify_boundaries(4.0, 0.75).map_err(|e| e.to_string())?;
    ensure(r.at_one.borderline && !r.at_one.accessible && r.at_one.kind == BoundaryKind::Entrance, || {
        format!("m(1-p)=1 gives {:?}", r.at_one)
    })?;
    ensure(!r.at_zero.borderline && !r.at_zero.accessible, || format!("mp=3 gives {:?}", r.at_zero))?;
    let r = classify_boundaries(4.0, 0.8).map_err(|e| e.to_string())?;
    ensure(!r.at_one.borderline && r.at_one.accessible && r.at_one.regular, || {
        format!("m(1-p)=0.8 gives {:?}", r.at_one)
    })
}
