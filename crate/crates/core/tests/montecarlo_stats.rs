use moranwf::env::EnvironmentPath;
use moranwf::montecarlo::{compare_to_closure, run_ensemble, run_replicates, uniform_grid, EnsembleConfig, Model};
use rand::Rng;
use rand_distr::{Distribution, Exp};

#[test]
fn confidence_intervals_cover_the_true_mean() {
    // neutral SDE with immigration: E[X_t] = p + (x0 - p) e^{-m t}
    let (m, p, x0) = (2.0, 0.6, 0.1);
    let env = EnvironmentPath::constant_two_species(m, p, 0.0, 0.5).unwrap();
    let grid = vec![0.5];
    let exact = p + (x0 - p) * (-m * 0.5f64).exp();
    let cfg = EnsembleConfig { model: Model::Sde { dt: 1e-3, coupled: None }, env, x0: vec![x0], t_end: 0.5, grid };
    let covered = (0..20u64)
        .filter(|&seed| {
            let st = run_ensemble(&cfg, 400, 1000 + seed).unwrap();
            let s = st.stat("x_1").unwrap();
            (s.mean[0] - exact).abs() <= s.ci_half[0]
        })
        .count();
    // Binomial(20, 0.95) puts 1.6% of its mass at or below 15
    assert!(covered >= 16, "{covered}/20 intervals cover the mean");
}

#[test]
fn replicate_statistics_match_direct_computation() {
    let names = vec!["a".to_string(), "b".to_string()];
    let grid = [1.0, 2.0];
    let one = |rng: &mut moranwf::rng::Stream| -> moranwf::Result<Vec<Vec<f64>>> {
        let e = Exp::new(1.0).unwrap().sample(rng);
        let u: f64 = rng.random();
        Ok(vec![vec![e, 2.0 * e], vec![u, u * u]])
    };
    let summary = run_replicates(&grid, &names, 1000, 3, one).unwrap();
    // rerun the same streams by hand
    let mut col = Vec::new();
    for k in 0..1000u64 {
        let mut rng = moranwf::rng::replicate_stream(3, k);
        col.push(one(&mut rng).unwrap()[0][1]);
    }
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let a = summary.stat("a").unwrap();
    assert!((a.mean[1] - mean).abs() < 1e-12);
    assert!((a.var[1] - var).abs() < 1e-12 * var);
    assert!((a.ci_half[1] - 1.96 * (var / n).sqrt()).abs() < 1e-12);
}

#[test]
fn comparison_rejects_a_shifted_curve() {
    let env = EnvironmentPath::constant_two_species(1.0, 0.5, 0.0, 1.0).unwrap();
    let grid = uniform_grid(1.0, 10);
    let cfg = EnsembleConfig { model: Model::Sde { dt: 1e-3, coupled: None }, env, x0: vec![0.5], t_end: 1.0, grid: grid.clone() };
    let mc = run_ensemble(&cfg, 500, 8).unwrap();
    let truth = vec![0.5; grid.len()];
    assert!(compare_to_closure(&mc, "x_1", &grid, &truth).unwrap().pass);
    let shifted: Vec<f64> = truth.iter().map(|v| v + 0.1).collect();
    let r = compare_to_closure(&mc, "x_1", &grid, &shifted).unwrap();
    assert!(!r.pass && r.fraction_inside == 0.0);
    assert!(compare_to_closure(&mc, "x_1", &grid[1..], &truth[1..]).is_err());
    assert!(compare_to_closure(&mc, "nope", &grid, &truth).is_err());
}
