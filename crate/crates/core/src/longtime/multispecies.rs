//! Stationary law of the multispecies diffusion with constant parameters:
//! `pi(x) ∝ exp(sum_{i,j} s^i x^i x^j) prod_i (x^i)^{m p^i - 1}` on the open
//! simplex of S+1 proportions.
//!
//! With j running over all S+1 species, `sum_j x^j = 1`, so the exponent is
//! `sum_i s^i x^i`. For two species this is exactly the one-dimensional law
//! `y^{mp-1}(1-y)^{m(1-p)-1} e^{sy}`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use super::invariant::InvariantDensity;
use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussRule;

const TENSOR_ORDER: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct MultispeciesDensity {
    pub m: f64,
    /// Pool, S+1 entries.
    pub p: Vec<f64>,
    /// Selection of the first S species.
    pub s: Vec<f64>,
}

/// Normalizing constant `c` (so that `c * unnormalized` integrates to one)
/// with its standard error (zero for quadrature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizerEstimate {
    pub value: f64,
    pub std_error: f64,
}

pub fn stationary_density_multispecies(m: f64, p: Vec<f64>, s: Vec<f64>) -> Result<MultispeciesDensity> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::NoInvariantMeasure(format!("immigration rate m = {m} must be positive")));
    }
    if p.len() < 2 || s.len() + 1 != p.len() {
        return Err(invalid("need S+1 pool entries and S selection coefficients"));
    }
    if p.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
        return Err(Error::NoInvariantMeasure("every pool entry must lie in (0,1)".into()));
    }
    if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(invalid("pool must sum to 1"));
    }
    Ok(MultispeciesDensity { m, p, s })
}

impl MultispeciesDensity {
    pub fn n_species(&self) -> usize {
        self.p.len()
    }

    fn alphas(&self) -> Vec<f64> {
        self.p.iter().map(|q| self.m * q).collect()
    }

    /// `sum_{i,j} s^i x^i x^j` summed literally over all S+1 species.
    pub fn quadratic_exponent(&self, x: &[f64]) -> f64 {
        let full = complete(x);
        let mut acc = 0.0;
        for (i, si) in self.s.iter().enumerate() {
            for xj in &full {
                acc += si * full[i] * xj;
            }
        }
        acc
    }

    /// Log of the unnormalized density at the free coordinates `x` (S entries).
    pub fn ln_unnormalized(&self, x: &[f64]) -> f64 {
        let full = complete(x);
        if full.iter().any(|&v| v <= 0.0) {
            return f64::NEG_INFINITY;
        }
        let linear: f64 = self.s.iter().zip(&full).map(|(a, b)| a * b).sum();
        full.iter().zip(&self.p).map(|(v, q)| (self.m * q - 1.0) * v.ln()).sum::<f64>() + linear
    }

    pub fn unnormalized(&self, x: &[f64]) -> f64 {
        self.ln_unnormalized(x).exp()
    }

    /// `ln` of the Dirichlet integral `prod Gamma(alpha_i) / Gamma(sum alpha)`.
    fn ln_dirichlet_integral(&self) -> f64 {
        let a = self.alphas();
        a.iter().map(|&v| ln_gamma(v)).sum::<f64>() - ln_gamma(a.iter().sum())
    }

    /// Deterministic normalizer for two and three species.
    pub fn normalizer_quadrature(&self) -> Result<f64> {
        match self.n_species() {
            2 => Ok(InvariantDensity::new(self.m, self.p[0], self.s[0])?.normalizer()),
            3 => {
                // stick breaking: x1 = u, x2 = (1-u) w, x3 = (1-u)(1-w)
                let a = self.alphas();
                let ru = GaussRule::jacobi_unit(TENSOR_ORDER, a[0] - 1.0, a[1] + a[2] - 1.0)?;
                let rw = GaussRule::jacobi_unit(TENSOR_ORDER, a[1] - 1.0, a[2] - 1.0)?;
                let (s1, s2) = (self.s[0], self.s[1]);
                let shift = s1.max(s2).max(0.0);
                let e = ru.expect(|u| rw.expect(|w| (s1 * u + s2 * (1.0 - u) * w - shift).exp()));
                Ok((-(self.ln_dirichlet_integral() + e.ln() + shift)).exp())
            }
            n => Err(invalid(format!("quadrature normalizer covers two or three species, not {n}"))),
        }
    }

    /// Importance-sampling normalizer with the Dirichlet(m p) law as proposal.
    pub fn normalizer_monte_carlo<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<NormalizerEstimate> {
        if samples < 2 {
            return Err(invalid("need at least two samples"));
        }
        let gammas: Vec<Gamma<f64>> = self
            .alphas()
            .iter()
            .map(|&a| Gamma::new(a, 1.0).map_err(|e| invalid(e.to_string())))
            .collect::<Result<_>>()?;
        let shift = self.s.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut draw = vec![0.0; gammas.len()];
        let (mut mean, mut m2) = (0.0, 0.0);
        for k in 0..samples {
            for (d, g) in draw.iter_mut().zip(&gammas) {
                *d = g.sample(rng);
            }
            let total: f64 = draw.iter().sum();
            let weight = (self.s.iter().zip(&draw).map(|(s, d)| s * d / total).sum::<f64>() - shift).exp();
            let delta = weight - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (weight - mean);
        }
        let se = (m2 / (samples - 1) as f64 / samples as f64).sqrt();
        let scale = (-(self.ln_dirichlet_integral() + shift)).exp();
        // c = scale / E[w]; first-order propagation of the error
        Ok(NormalizerEstimate { value: scale / mean, std_error: scale * se / (mean * mean) })
    }

    /// Quadrature for up to three species, importance sampling beyond.
    pub fn normalizer<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<NormalizerEstimate> {
        if self.n_species() <= 3 {
            Ok(NormalizerEstimate { value: self.normalizer_quadrature()?, std_error: 0.0 })
        } else {
            self.normalizer_monte_carlo(samples, rng)
        }
    }
}

fn complete(x: &[f64]) -> Vec<f64> {
    let mut full = x.to_vec();
    full.push(1.0 - x.iter().sum::<f64>());
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn neutral_three_species_is_dirichlet() {
        let d = stationary_density_multispecies(3.0, vec![0.2, 0.3, 0.5], vec![0.0, 0.0]).unwrap();
        let c = d.normalizer_quadrature().unwrap();
        let expect = (ln_gamma(3.0) - ln_gamma(0.6) - ln_gamma(0.9) - ln_gamma(1.5)).exp();
        assert!((c / expect - 1.0).abs() < 1e-8, "{c} vs {expect}");
    }

    #[test]
    fn two_species_reduces_to_invariant_density() {
        let (m, p, s) = (1.7, 0.35, 2.5);
        let d = stationary_density_multispecies(m, vec![p, 1.0 - p], vec![s]).unwrap();
        let c = d.normalizer_quadrature().unwrap();
        let pi = InvariantDensity::new(m, p, s).unwrap();
        for y in [0.05, 0.3, 0.5, 0.77, 0.99] {
            assert!((c * d.unnormalized(&[y]) - pi.density(y)).abs() < 1e-10 * pi.density(y).max(1.0));
            assert!((d.quadratic_exponent(&[y]) - s * y).abs() < 1e-14);
        }
    }

    #[test]
    fn importance_sampling_agrees_with_quadrature() {
        let d = stationary_density_multispecies(2.5, vec![0.3, 0.3, 0.4], vec![1.0, -0.5]).unwrap();
        let exact = d.normalizer_quadrature().unwrap();
        let est = d.normalizer_monte_carlo(200_000, &mut stream(8)).unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.std_error, "{est:?} vs {exact}");
    }

    #[test]
    fn positive_inside_and_rejects_degenerate_pools() {
        let d = stationary_density_multispecies(1.0, vec![0.25; 4], vec![0.3, -0.2, 0.1]).unwrap();
        assert!(d.unnormalized(&[0.1, 0.2, 0.3]) > 0.0);
        assert!(stationary_density_multispecies(1.0, vec![1.0, 0.0], vec![0.0]).is_err());
        assert!(stationary_density_multispecies(0.0, vec![0.5, 0.5], vec![0.0]).is_err());
    }
}
