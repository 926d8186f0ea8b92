//! Free Gaussian measure on the first `N` radial modes, Gibbs importance
//! weights, and self-normalized weighted expectations.
//!
//! A free draw has coefficients `φ_n = g_n / z_n` with `g_n` independent
//! complex Gaussians, `E|g_n|² = 1`, real and imaginary parts i.i.d. with
//! variance 1/2. This is the Gaussian with density `exp(-Σ λ_n |φ_n|²)`,
//! i.e. `exp(-∫|∇φ|²)`. The Gibbs measure `exp(-H)` is then the free
//! measure reweighted by `exp(-(2/(α+2)) ∫ V(φ))` with `V = |φ|^{α+2}` for
//! NLS and `|Re φ|^{α+2}` for NLW.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{potential, SpectralState};
use crate::eigenbasis::EigenBasis;
use crate::error::{Error, Result};
use crate::Model;

/// Per-sample seed derived from an ensemble base seed.
pub fn sample_seed(base_seed: u64, index: u64) -> u64 {
    base_seed ^ index
}

/// Normalized complex Gaussians `g_1..g_n` for a seed.
///
/// Draws are sequential, so the vector for `n` modes is a prefix of the
/// vector for any larger `n` with the same seed.
pub fn complex_gaussians(seed: u64, n: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(scale * re, scale * im)
        })
        .collect()
}

/// Draw from the free measure: `φ_n = g_n / z_n`.
pub fn sample_free(basis: &EigenBasis, seed: u64) -> SpectralState {
    let g = complex_gaussians(seed, basis.len());
    let coeffs = g
        .iter()
        .zip(basis.frequencies())
        .map(|(g, z)| g / z)
        .collect();
    SpectralState::new(coeffs)
}

/// Gibbs density of `coeffs` relative to the free measure,
/// `exp(-(2/(α+2)) ∫ V(φ))`.
pub fn gibbs_weight(basis: &EigenBasis, coeffs: &[C64], alpha: f64, model: Model) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    let v = potential(basis, coeffs, alpha, model)?;
    if !v.is_finite() {
        return Err(Error::NonFinite("Gibbs potential"));
    }
    Ok((-(2.0 / (alpha + 2.0)) * v).exp())
}

/// Splits the NLW combined variable `φ = f1 + i (√-Δ)^{-1} f2` into the
/// position and velocity data.
pub fn nlw_data_split(basis: &EigenBasis, coeffs: &[C64]) -> (Vec<f64>, Vec<f64>) {
    let f1 = coeffs.iter().map(|c| c.re).collect();
    let f2 = coeffs
        .iter()
        .zip(basis.frequencies())
        .map(|(c, z)| z * c.im)
        .collect();
    (f1, f2)
}

/// Inverse of [`nlw_data_split`].
pub fn nlw_data_join(basis: &EigenBasis, f1: &[f64], f2: &[f64]) -> Vec<C64> {
    f1.iter()
        .zip(f2)
        .zip(basis.frequencies())
        .map(|((&a, &b), z)| C64::new(a, b / z))
        .collect()
}

/// A free-measure draw with its Gibbs weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub seed: u64,
    pub weight: f64,
    pub coeffs: Vec<C64>,
}

/// Monte Carlo ensemble of weighted free draws.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub basis: Arc<EigenBasis>,
    pub model: Model,
    pub alpha: f64,
    pub samples: Vec<WeightedSample>,
}

impl Ensemble {
    /// Draws `count` samples with seeds `base_seed ^ i`.
    pub fn draw(
        basis: Arc<EigenBasis>,
        model: Model,
        alpha: f64,
        base_seed: u64,
        count: usize,
    ) -> Result<Self> {
        let samples = (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let seed = sample_seed(base_seed, i);
                let state = sample_free(&basis, seed);
                let weight = gibbs_weight(&basis, &state.coeffs, alpha, model)?;
                Ok(WeightedSample {
                    seed,
                    weight,
                    coeffs: state.coeffs,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ensemble {
            basis,
            model,
            alpha,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.weight).collect()
    }

    /// Self-normalized estimate of `E_G[F]`.
    pub fn expectation<F>(&self, observable: F) -> Result<WeightedEstimate>
    where
        F: Fn(&[C64]) -> f64,
    {
        let values: Vec<f64> = self.samples.iter().map(|s| observable(&s.coeffs)).collect();
        weighted_expectation(&self.weights(), &values)
    }
}

/// Self-normalized importance-sampling estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEstimate {
    pub mean: f64,
    /// Delta-method standard error.
    pub standard_error: f64,
    /// `(Σw)² / Σw²`.
    pub effective_sample_size: f64,
}

/// `Σ wᵢ Fᵢ / Σ wᵢ` with standard error `sqrt(Σ wᵢ² (Fᵢ - mean)²) / Σ wᵢ`.
pub fn weighted_expectation(weights: &[f64], values: &[f64]) -> Result<WeightedEstimate> {
    if weights.is_empty() {
        return Err(Error::DegenerateEnsemble("empty ensemble".into()));
    }
    if weights.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            got: values.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::DegenerateEnsemble(format!(
            "weights must be nonnegative with positive sum (sum = {total})"
        )));
    }
    let mean = weights.iter().zip(values).map(|(w, f)| w * f).sum::<f64>() / total;
    let var: f64 = weights
        .iter()
        .zip(values)
        .map(|(w, f)| (w * (f - mean)).powi(2))
        .sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    Ok(WeightedEstimate {
        mean,
        standard_error: var.sqrt() / total,
        effective_sample_size: total * total / sum_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::Dim;

    #[test]
    fn same_seed_same_draw() {
        let b = EigenBasis::new(Dim::Three, 12).unwrap();
        let a = sample_free(&b, 99);
        let c = sample_free(&b, 99);
        assert_eq!(a.coeffs, c.coeffs);
        assert_ne!(a.coeffs, sample_free(&b, 100).coeffs);
    }

    #[test]
    fn draws_are_prefix_consistent() {
        let small = EigenBasis::new(Dim::Two, 5).unwrap();
        let large = EigenBasis::new(Dim::Two, 9).unwrap();
        let a = sample_free(&small, 7);
        let b = sample_free(&large, 7);
        assert_eq!(a.coeffs[..], b.coeffs[..5]);
    }

    #[test]
    fn zero_field_has_unit_weight() {
        let b = EigenBasis::new(Dim::Three, 6).unwrap();
        let zero = vec![C64::new(0.0, 0.0); 6];
        assert_eq!(gibbs_weight(&b, &zero, 2.0, Model::Nls).unwrap(), 1.0);
        let imag: Vec<C64> = (0..6).map(|k| C64::new(0.0, k as f64 + 0.3)).collect();
        assert_eq!(gibbs_weight(&b, &imag, 2.0, Model::Nlw).unwrap(), 1.0);
        assert!(gibbs_weight(&b, &zero, 0.0, Model::Nls).is_err());
    }

    #[test]
    fn nlw_split_examples() {
        let b = EigenBasis::new(Dim::Three, 3).unwrap();
        let real = vec![C64::new(1.0, 0.0), C64::new(-2.0, 0.0), C64::new(0.5, 0.0)];
        let (f1, f2) = nlw_data_split(&b, &real);
        assert_eq!(f1, vec![1.0, -2.0, 0.5]);
        assert!(f2.iter().all(|v| *v == 0.0));
        let imag = vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let (f1, f2) = nlw_data_split(&b, &imag);
        assert!(f1.iter().all(|v| *v == 0.0));
        assert!((f2[0] - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(&f2[1..], &[0.0, 0.0]);
    }

    #[test]
    fn constant_observable_has_zero_error() {
        let w = [0.3, 0.9, 0.5];
        let est = weighted_expectation(&w, &[2.5; 3]).unwrap();
        assert!((est.mean - 2.5).abs() < 1e-15);
        assert_eq!(est.standard_error, 0.0);
    }

    #[test]
    fn unit_weights_give_sample_mean() {
        let v = [1.0, 2.0, 6.0];
        let est = weighted_expectation(&[1.0; 3], &v).unwrap();
        assert!((est.mean - 3.0).abs() < 1e-15);
        assert!((est.effective_sample_size - 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_weights_are_rejected() {
        assert!(weighted_expectation(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(weighted_expectation(&[], &[]).is_err());
    }
}
