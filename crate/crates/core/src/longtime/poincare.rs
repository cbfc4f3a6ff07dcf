//! Empirical relaxation rate of the stationary diffusion.
//!
//! Starting replicates from the invariant law, the autocovariance
//! `C(tau) = Cov(X_0, X_tau)` decays at least as fast as `exp(-tau / c_P)`
//! for a Poincaré constant `c_P`. The rate is fitted by least squares on
//! `ln C(tau)`, separately on independent batches to get a standard error.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use crate::env::EnvironmentPath;
use crate::error::{invalid, Error, Result};
use crate::rng::replicate_stream;
use crate::wf_sde::{em_simulate, EmOptions, SimplexState};

/// One draw from `y^{mp-1}(1-y)^{m(1-p)-1} e^{sy}` by rejection from Beta.
pub fn sample_invariant<R: Rng + ?Sized>(m: f64, p: f64, s: f64, rng: &mut R) -> Result<f64> {
    if !(m > 0.0) || !(p > 0.0 && p < 1.0) {
        return Err(Error::NoInvariantMeasure(format!("m = {m}, p = {p}")));
    }
    let beta = Beta::new(m * p, m * (1.0 - p)).map_err(|e| invalid(e.to_string()))?;
    loop {
        let y = beta.sample(rng);
        // acceptance e^{s y} / max e^{s y}
        let log_accept = if s >= 0.0 { s * (y - 1.0) } else { s * y };
        if rng.random::<f64>().ln() < log_accept {
            return Ok(y);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationFit {
    pub lags: Vec<f64>,
    pub autocovariance: Vec<f64>,
    pub rate: f64,
    pub rate_std_error: f64,
}

fn fit_rate(lags: &[f64], cov: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = lags.iter().zip(cov).filter(|(_, &c)| c > 0.0).map(|(&t, &c)| (t, c.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mt, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    Some(-sxy / sxx)
}

fn autocovariance(x0: &[f64], paths: &[Vec<f64>], n_lags: usize) -> Vec<f64> {
    let n = x0.len() as f64;
    let mean0 = x0.iter().sum::<f64>() / n;
    (0..n_lags)
        .map(|k| {
            let mean_k = paths.iter().map(|p| p[k]).sum::<f64>() / n;
            x0.iter().zip(paths).map(|(a, p)| (a - mean0) * (p[k] - mean_k)).sum::<f64>() / (n - 1.0)
        })
        .collect()
}

/// Fit the decay rate of `Cov(X_0, X_tau)` at the given lags from
/// `replicates` stationary paths, split into `batches` for the error bar.
pub fn empirical_relaxation_rate(
    m: f64,
    p: f64,
    s: f64,
    lags: &[f64],
    replicates: usize,
    batches: usize,
    dt: f64,
    master_seed: u64,
) -> Result<RelaxationFit> {
    if lags.is_empty() || lags.windows(2).any(|w| !(w[0] < w[1])) || lags[0] <= 0.0 {
        return Err(invalid("lags must be positive and strictly increasing"));
    }
    if batches < 2 || replicates < 2 * batches {
        return Err(invalid("need at least two batches of at least two replicates"));
    }
    let horizon = *lags.last().unwrap();
    let env = EnvironmentPath::constant_two_species(m, p, s, horizon)?;
    let opts = EmOptions { dt, coupled: None };
    let runs: Vec<Result<(f64, Vec<f64>)>> = (0..replicates as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_stream(master_seed, k);
            let y0 = sample_invariant(m, p, s, &mut rng)?;
            let path = em_simulate(&SimplexState::new(vec![y0])?, &env, horizon, lags, &opts, &mut rng)?;
            Ok((y0, path.states.iter().map(|st| st.x()[0]).collect()))
        })
        .collect();
    let runs: Vec<(f64, Vec<f64>)> = runs.into_iter().collect::<Result<_>>()?;
    let (x0, paths): (Vec<f64>, Vec<Vec<f64>>) = runs.into_iter().unzip();

    let cov = autocovariance(&x0, &paths, lags.len());
    let rate = fit_rate(lags, &cov).ok_or_else(|| Error::NumericalDomain("autocovariance not positive".into()))?;
    let size = replicates / batches;
    let batch_rates: Vec<f64> = (0..batches)
        .filter_map(|b| {
            let r = b * size..(b + 1) * size;
            fit_rate(lags, &autocovariance(&x0[r.clone()], &paths[r], lags.len()))
        })
        .collect();
    let nb = batch_rates.len() as f64;
    let mean_b = batch_rates.iter().sum::<f64>() / nb;
    let var_b = batch_rates.iter().map(|r| (r - mean_b).powi(2)).sum::<f64>() / (nb - 1.0);
    Ok(RelaxationFit { lags: lags.to_vec(), autocovariance: cov, rate, rate_std_error: (var_b / nb).sqrt() })
}
