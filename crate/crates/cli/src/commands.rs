//! The five subcommands. Each reads a validated config, computes, and writes
//! CSV tables, plot scripts and a metadata file into the output directory.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use toml::Value;

use crate::config::{HitTarget, ModelKind, Param, RunConfig};
use crate::output::{Curve, Outputs, Plot, Table};
use moranwf::env::{EnvironmentPath, Segment};
use moranwf::longtime::{absorption_prob, equilibrium_simpson};
use moranwf::moments::{
    annealed_simpson_neutral_mean, build_two_species, calibrate_error_constant, error_bound, hitting_cdf,
    solve_moments, ClosureKind, HittingTarget, MomentTrajectory,
};
use moranwf::montecarlo::{compare_to_closure, run_ensemble, EnsembleConfig, McSummary, Model};
use moranwf::wf_sde::DEFAULT_DT;

fn results() -> BTreeMap<String, Value> {
    BTreeMap::new()
}

fn ensemble_config(cfg: &RunConfig) -> Result<EnsembleConfig> {
    let sim = cfg.simulation()?;
    let spec = cfg.selection_spec()?;
    let model = match sim.model {
        ModelKind::Moran => {
            ensure!(spec.is_none(), "selection_diffusion needs simulation.model = \"sde\"");
            Model::Moran { j: sim.j.expect("validated") }
        }
        ModelKind::Sde => Model::Sde { dt: sim.dt.unwrap_or(DEFAULT_DT), coupled: spec },
    };
    let grid = cfg.grid()?;
    Ok(EnsembleConfig {
        model,
        env: cfg.environment_path()?,
        x0: cfg.community()?.x0.clone(),
        t_end: *grid.last().expect("grid has t = 0"),
        grid,
    })
}

fn run_mc(cfg: &RunConfig) -> Result<McSummary> {
    let sim = cfg.simulation()?;
    let ens = ensemble_config(cfg)?;
    run_ensemble(&ens, sim.n_reps, sim.seed).context("Monte Carlo ensemble failed")
}

fn mc_table(summary: &McSummary) -> Table {
    let mut header = vec!["t".to_string()];
    for st in &summary.stats {
        header.extend([format!("{}_mean", st.name), format!("{}_var", st.name), format!("{}_ci_half", st.name)]);
    }
    let mut table = Table::new(header);
    for (k, &t) in summary.grid.iter().enumerate() {
        let mut row = vec![t];
        for st in &summary.stats {
            row.extend([st.mean[k], st.var[k], st.ci_half[k]]);
        }
        table.rows.push(row);
    }
    table
}

pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let summary = run_mc(cfg)?;
    let mut out = Outputs::new(out_dir, cfg.name())?;
    let curves = summary
        .stats
        .iter()
        .enumerate()
        .map(|(i, st)| Curve { x: 1, y: 2 + 3 * i, err: Some(4 + 3 * i), title: format!("{} (MC)", st.name) })
        .collect();
    out.table("mc", &mc_table(&summary), Some(Plot { xlabel: "t".into(), ylabel: "mean".into(), curves }))?;
    let mut res = results();
    res.insert("n_reps".into(), Value::Integer(summary.n_reps as i64));
    out.metadata("simulate", cfg, res)?;
    Ok(())
}

fn solve(cfg: &RunConfig, env: &EnvironmentPath) -> Result<MomentTrajectory> {
    let kind = cfg.closure_kind()?;
    let x0 = &cfg.community()?.x0;
    solve_moments(kind, cfg.closure()?.order, env, x0, cfg.selection_spec()?, &cfg.grid()?, cfg.dt_ode()?)
        .context("moment closure failed")
}

/// `(name, E[.] curve)` pairs shared by the moments and compare commands.
fn closure_curves(tr: &MomentTrajectory) -> Vec<(&'static str, Vec<f64>)> {
    let mut v = vec![("simpson", tr.simpson()), ("x_1", tr.mean_x())];
    match tr.kind {
        ClosureKind::TwoSpecies => {}
        ClosureKind::ThreeSpecies => v.push(("x_2", tr.mean_second())),
        ClosureKind::WfSelection => v.push(("v", tr.mean_second())),
    }
    v
}

pub fn moments(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let env = cfg.environment_path()?;
    let closure = cfg.closure()?;
    let grid = cfg.grid()?;
    let dt = cfg.dt_ode()?;
    let tr = solve(cfg, &env)?;
    let mut out = Outputs::new(out_dir, cfg.name())?;

    let mut header = vec!["t".to_string()];
    header.extend(tr.column_labels());
    let mut table = Table::new(header);
    for (t, m) in tr.grid.iter().zip(&tr.moments) {
        let mut row = vec![*t];
        row.extend_from_slice(m);
        table.rows.push(row);
    }
    out.table("moments", &table, None)?;

    let curves = closure_curves(&tr);
    let mut header = vec!["t".to_string()];
    header.extend(curves.iter().map(|(n, _)| n.to_string()));
    let mut cols: Vec<&[f64]> = vec![&grid];
    cols.extend(curves.iter().map(|(_, c)| c.as_slice()));
    let plot = Plot {
        xlabel: "t".into(),
        ylabel: "expectation".into(),
        curves: (0..curves.len()).map(|i| Curve { x: 1, y: i + 2, err: None, title: curves[i].0.into() }).collect(),
    };
    out.table("closure", &Table::from_columns(header, &cols), Some(plot))?;

    let mut res = results();
    res.insert("kind".into(), Value::String(tr.kind.name().into()));
    res.insert("order".into(), Value::Integer(closure.order as i64));
    res.insert("dimension".into(), Value::Integer(tr.kind.dim(closure.order) as i64));
    if tr.kind == ClosureKind::TwoSpecies {
        let x0 = cfg.community()?.x0[0];
        let c = if closure.calibrate { calibrate_error_constant(&env, x0, closure.order, &grid, dt)? } else { 1.0 };
        res.insert("error_bound".into(), Value::Float(error_bound(closure.order, env.s_sup(), c)));
        res.insert("error_constant".into(), Value::Float(c));
    }

    if closure.neutral_reference {
        let spec = cfg.selection_spec()?.context("closure.neutral_reference needs a [selection_diffusion] table")?;
        let x0 = cfg.community()?.x0[0];
        let cmp = annealed_simpson_neutral_mean(&spec, closure.order, &env, x0, &grid, dt)?;
        let header = ["t", "simpson_annealed", "simpson_neutral", "x_annealed", "x_neutral"].map(String::from).to_vec();
        let table = Table::from_columns(
            header,
            &[&grid, &cmp.annealed, &cmp.neutral, &cmp.annealed_mean_x, &cmp.neutral_mean_x],
        );
        let titles = ["E[S] annealed", "E[S] s=0", "E[X] annealed", "E[X] s=0"];
        let plot = Plot {
            xlabel: "t".into(),
            ylabel: "expectation".into(),
            curves: titles.iter().enumerate().map(|(i, t)| Curve { x: 1, y: i + 2, err: None, title: t.to_string() }).collect(),
        };
        out.table("neutral", &table, Some(plot))?;
        res.insert("mean_neutral".into(), Value::Boolean(cmp.mean_neutral));
    }

    if let Some(family) = &cfg.family {
        ensure!(tr.kind == ClosureKind::TwoSpecies, "[family] needs a two-species community");
        let mut header = vec!["t".to_string()];
        let mut columns = vec![grid.clone()];
        for &s in &family.s {
            let segs = env.segments().iter().map(|seg| Segment::new(seg.m, vec![s])).collect();
            let fenv = EnvironmentPath::new(env.breakpoints().to_vec(), segs, env.pool().to_vec(), env.horizon())?;
            let x0 = &cfg.community()?.x0;
            let sim = solve_moments(ClosureKind::TwoSpecies, closure.order, &fenv, x0, None, &grid, dt)?.simpson();
            header.push(format!("simpson_s={s}"));
            columns.push(sim);
        }
        let cols: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
        let plot = Plot {
            xlabel: "t".into(),
            ylabel: "E[S_t]".into(),
            curves: family.s.iter().enumerate().map(|(i, s)| Curve { x: 1, y: i + 2, err: None, title: format!("s = {s}") }).collect(),
        };
        out.table("family", &Table::from_columns(header, &cols), Some(plot))?;
    }

    if let Some(map) = &cfg.slope_map {
        ensure!(tr.kind == ClosureKind::TwoSpecies, "[slope_map] needs a two-species community");
        ensure!(map.x_points >= 2 && map.s_points >= 2, "slope_map.x_points and slope_map.s_points must be >= 2");
        let point = env.eval(0.0)?;
        let (m, p) = (point.m, point.pool[0]);
        let mut table = Table::new(["x", "s", "slope"].map(String::from).to_vec());
        for i in 0..map.x_points {
            let x = i as f64 / (map.x_points - 1) as f64;
            for k in 0..map.s_points {
                let s = map.s_from + (map.s_to - map.s_from) * k as f64 / (map.s_points - 1) as f64;
                // dE[S]/dt at a deterministic state, from the first two closure rows
                let a = build_two_species(3, m, p, s)?;
                let mut dm = vec![0.0; 3];
                a.apply(&[x, x * x, x * x * x], &mut dm);
                table.rows.push(vec![x, s, 2.0 * (dm[1] - dm[0])]);
            }
        }
        let csv = out.file_name("slope.csv");
        out.table("slope", &table, None)?;
        let script = format!(
            "set datafile separator ','\nset terminal pngcairo size 900,600\nset output '{}'\n\
             set xlabel 'X_0'\nset ylabel 's'\nunset colorbox\nset palette defined (0 'white', 1 'steelblue')\n\
             plot '{csv}' every ::1 using 1:2:($3 < 0 ? 1 : 0) with points pt 5 ps 0.6 palette notitle\n",
            out.file_name("slope.png")
        );
        out.text("slope.gp", &script)?;
    }

    out.metadata("moments", cfg, res)?;
    Ok(())
}

pub fn hitting(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let env = cfg.environment_path()?;
    ensure!(cfg.closure_kind()? == ClosureKind::TwoSpecies, "hitting needs a two-species community");
    let hit = cfg.hitting.as_ref().context("missing [hitting] table")?;
    ensure!(!hit.targets.is_empty(), "hitting.targets must name at least one of t1, t0, t10");
    let order = cfg.closure()?.order;
    let n_high = hit.n_high.unwrap_or(order);
    ensure!(n_high >= 1 && n_high <= order, "hitting.n_high must lie in 1..={order} (got {n_high})");
    let grid = cfg.grid()?;
    let x0 = cfg.community()?.x0[0];
    let mut header = vec!["t".to_string()];
    let mut columns = vec![grid.clone()];
    for &target in &hit.targets {
        let (which, name) = match target {
            HitTarget::T1 => (HittingTarget::T1, "p_t1"),
            HitTarget::T0 => (HittingTarget::T0, "p_t0"),
            HitTarget::T10 => (HittingTarget::T10, "p_t10"),
        };
        columns.push(hitting_cdf(&env, x0, order, n_high, which, &grid, cfg.dt_ode()?)?);
        header.push(name.to_string());
    }
    let mut out = Outputs::new(out_dir, cfg.name())?;
    let cols: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    let plot = Plot {
        xlabel: "t".into(),
        ylabel: "P(T <= t)".into(),
        curves: (1..header.len()).map(|i| Curve { x: 1, y: i + 1, err: None, title: header[i].clone() }).collect(),
    };
    out.table("hitting", &Table::from_columns(header, &cols), Some(plot))?;
    let mut res = results();
    res.insert("n_high".into(), Value::Integer(n_high as i64));
    if let [seg] = env.segments() {
        res.insert("absorption_prob".into(), Value::Float(absorption_prob(seg.s[0], x0)));
    }
    out.metadata("hitting", cfg, res)?;
    Ok(())
}

pub fn equilibrium(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let eq = cfg.equilibrium.as_ref().context("missing [equilibrium] table")?;
    ensure!(eq.points >= 2, "equilibrium.points must be at least 2");
    ensure!(eq.from.is_finite() && eq.to.is_finite(), "equilibrium.from and equilibrium.to must be finite");
    if let Some(f) = eq.family {
        ensure!(f != eq.vary, "equilibrium.family must differ from equilibrium.vary");
        ensure!(!eq.family_values.is_empty(), "equilibrium.family_values must not be empty");
    }
    let xs: Vec<f64> = (0..eq.points).map(|i| eq.from + (eq.to - eq.from) * i as f64 / (eq.points - 1) as f64).collect();
    let families: Vec<Option<f64>> = match eq.family {
        Some(_) => eq.family_values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let set = |params: &mut (f64, f64, f64), which: Param, v: f64| match which {
        Param::M => params.0 = v,
        Param::P => params.1 = v,
        Param::S => params.2 = v,
    };
    let mut means = vec![xs.clone()];
    let mut vars = vec![xs.clone()];
    let mut header = vec![eq.vary.name().to_string()];
    for fam in &families {
        let mut mean = Vec::with_capacity(xs.len());
        let mut var = Vec::with_capacity(xs.len());
        for &x in &xs {
            let mut params = (eq.m, eq.p, eq.s);
            set(&mut params, eq.vary, x);
            if let (Some(f), Some(v)) = (eq.family, fam) {
                set(&mut params, f, *v);
            }
            let (mu, v) = equilibrium_simpson(params.0, params.1, params.2)
                .with_context(|| format!("equilibrium at m={}, p={}, s={}", params.0, params.1, params.2))?;
            mean.push(mu);
            var.push(v);
        }
        means.push(mean);
        vars.push(var);
        header.push(match (eq.family, fam) {
            (Some(f), Some(v)) => format!("{}={v}", f.name()),
            _ => "value".to_string(),
        });
    }
    let mut out = Outputs::new(out_dir, cfg.name())?;
    for (suffix, data, label) in [("equilibrium_mean", &means, "E[S] at equilibrium"), ("equilibrium_var", &vars, "Var[S] at equilibrium")] {
        let cols: Vec<&[f64]> = data.iter().map(|c| c.as_slice()).collect();
        let plot = Plot {
            xlabel: eq.vary.name().into(),
            ylabel: label.into(),
            curves: (1..header.len()).map(|i| Curve { x: 1, y: i + 1, err: None, title: header[i].clone() }).collect(),
        };
        out.table(suffix, &Table::from_columns(header.clone(), &cols), Some(plot))?;
    }
    out.metadata("equilibrium", cfg, results())?;
    Ok(())
}

/// Runs both Monte Carlo and the closure; returns whether every statistic passes.
pub fn compare(cfg: &RunConfig, out_dir: &Path) -> Result<bool> {
    let env = cfg.environment_path()?;
    let tr = solve(cfg, &env)?;
    let summary = run_mc(cfg)?;
    let grid = cfg.grid()?;
    let mut curves = closure_curves(&tr);
    if tr.kind == ClosureKind::WfSelection {
        // the annealed comparison is on X and v
        curves.retain(|(n, _)| *n != "simpson");
    }
    let mut report = String::new();
    let mut header = vec!["t".to_string()];
    let mut columns = vec![grid.clone()];
    let mut plot_curves = Vec::new();
    let mut res = results();
    let mut all = true;
    for (name, curve) in &curves {
        let r = compare_to_closure(&summary, name, &grid, curve)?;
        report.push_str(&format!("{r}\n"));
        all &= r.pass;
        res.insert(format!("{name}_inside_ci"), Value::Float(r.fraction_inside));
        let st = summary.stat(name).with_context(|| format!("no Monte Carlo statistic {name}"))?;
        let base = header.len() + 1;
        header.extend([format!("closure_{name}"), format!("mc_{name}_mean"), format!("mc_{name}_ci_half")]);
        columns.extend([curve.clone(), st.mean.clone(), st.ci_half.clone()]);
        plot_curves.push(Curve { x: 1, y: base, err: None, title: format!("{name} closure") });
        plot_curves.push(Curve { x: 1, y: base + 1, err: Some(base + 2), title: format!("{name} MC") });
    }
    report.push_str(if all { "overall: PASS\n" } else { "overall: FAIL\n" });
    print!("{report}");
    let mut out = Outputs::new(out_dir, cfg.name())?;
    let cols: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    out.table(
        "compare",
        &Table::from_columns(header, &cols),
        Some(Plot { xlabel: "t".into(), ylabel: "expectation".into(), curves: plot_curves }),
    )?;
    out.text("compare_report.txt", &report)?;
    res.insert("pass".into(), Value::Boolean(all));
    out.metadata("compare", cfg, res)?;
    Ok(all)
}

/// Apply command-line overrides to a loaded config.
pub fn apply_overrides(cfg: &mut RunConfig, seed: Option<u64>, order: Option<usize>) -> Result<()> {
    if let Some(seed) = seed {
        match cfg.simulation.as_mut() {
            Some(sim) => sim.seed = seed,
            None => bail!("--seed given but the config has no [simulation] table"),
        }
    }
    if let Some(order) = order {
        match cfg.closure.as_mut() {
            Some(c) => c.order = order,
            None => bail!("--order given but the config has no [closure] table"),
        }
    }
    Ok(())
}
