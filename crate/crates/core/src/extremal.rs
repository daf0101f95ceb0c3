//! Weighted density minimisation on a finite measure space.
//!
//! Minimise the weighted energy `sum phi rho^alpha dmu` over nonnegative
//! densities with `sum rho dmu = 1`. The exact infimum and minimiser are
//! available in closed form; [`oracle_min`] reaches the same value by
//! iterative descent and is kept independent of the closed form.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite measure space given by atoms on the line and their masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpace {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl MeasureSpace {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::param("weights", "one weight per atom is required"));
        }
        if points.is_empty() {
            return Err(Error::param("points", "measure space needs at least one atom"));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::param("weights", format!("atom weight {w} is not positive")));
        }
        Ok(Self { points, weights })
    }

    /// `atoms` equal atoms of total mass `total`, placed at the midpoints of (0, 1).
    pub fn uniform(atoms: usize, total: f64) -> Result<Self> {
        Self::midpoint_grid(0.0, 1.0, atoms).and_then(|s| {
            let w = total / atoms as f64;
            Self::new(s.points, vec![w; atoms])
        })
    }

    /// Midpoint discretisation of Lebesgue measure on [a, b].
    pub fn midpoint_grid(a: f64, b: f64, atoms: usize) -> Result<Self> {
        if atoms == 0 || !(a < b) {
            return Err(Error::param("grid", "need a < b and at least one atom"));
        }
        let h = (b - a) / atoms as f64;
        let points = (0..atoms).map(|i| a + (i as f64 + 0.5) * h).collect();
        Self::new(points, vec![h; atoms])
    }

    /// Gauss-Legendre discretisation of Lebesgue measure on [a, b].
    pub fn gauss_legendre(a: f64, b: f64, atoms: usize) -> Result<Self> {
        let degree = NonZeroUsize::new(atoms).ok_or_else(|| Error::param("atoms", "must be positive"))?;
        if !(a < b) {
            return Err(Error::param("interval", "need a < b"));
        }
        let rule = GaussLegendre::new(degree);
        let half = 0.5 * (b - a);
        let (points, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (a + half * (x + 1.0), half * w))
            .unzip();
        Self::new(points, weights)
    }

    /// Every atom split into two atoms of half the mass at the same point.
    pub fn refined_by_duplication(&self) -> Self {
        let points = self.points.iter().flat_map(|&p| [p, p]).collect();
        let weights = self.weights.iter().flat_map(|&w| [0.5 * w, 0.5 * w]).collect();
        Self { points, weights }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, phi: F) -> Vec<f64> {
        self.points.iter().map(|&x| phi(x)).collect()
    }
}

/// A density on a [`MeasureSpace`] together with the exponent it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub values: Vec<f64>,
    pub exponent: f64,
}

impl DensitySample {
    /// `sum rho dmu`.
    pub fn mass(&self, space: &MeasureSpace) -> f64 {
        self.values.iter().zip(space.weights()).map(|(r, w)| r * w).sum()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("exponent must satisfy 1 < alpha < inf, got {alpha}")))
    }
}

fn check_phi(space: &MeasureSpace, phi: &[f64]) -> Result<()> {
    if phi.len() != space.len() {
        return Err(Error::param("phi", "one value per atom is required"));
    }
    match phi.iter().find(|v| !(**v > 0.0)) {
        Some(v) => Err(Error::param("phi", format!("weight function must be positive, found {v}"))),
        None => Ok(()),
    }
}

/// `int phi^{1/(1-alpha)} dmu`, the normaliser shared by value and density.
fn conjugate_mass(space: &MeasureSpace, phi: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_phi(space, phi)?;
    let q = 1.0 / (1.0 - alpha);
    let mass: f64 = phi.iter().zip(space.weights()).map(|(p, w)| p.powf(q) * w).sum();
    if mass.is_finite() && mass > 0.0 {
        Ok(mass)
    } else {
        Err(Error::param("phi", "phi^(1/(1-alpha)) is not integrable"))
    }
}

/// Objective `sum phi rho^alpha dmu`.
pub fn objective(space: &MeasureSpace, phi: &[f64], rho: &[f64], alpha: f64) -> f64 {
    phi.iter()
        .zip(rho)
        .zip(space.weights())
        .map(|((p, r), w)| p * r.powf(alpha) * w)
        .sum()
}

pub fn extremal_value_values(space: &MeasureSpace, phi: &[f64], alpha: f64) -> Result<f64> {
    Ok(conjugate_mass(space, phi, alpha)?.powf(1.0 - alpha))
}

/// Closed-form infimum `(int phi^{1/(1-alpha)} dmu)^{1-alpha}`.
pub fn extremal_value<F: Fn(f64) -> f64>(space: &MeasureSpace, phi: F, alpha: f64) -> Result<f64> {
    extremal_value_values(space, &space.sample(phi), alpha)
}

pub fn extremal_density_values(space: &MeasureSpace, phi: &[f64], alpha: f64) -> Result<DensitySample> {
    let mass = conjugate_mass(space, phi, alpha)?;
    let q = 1.0 / (1.0 - alpha);
    Ok(DensitySample {
        values: phi.iter().map(|p| p.powf(q) / mass).collect(),
        exponent: alpha,
    })
}

/// The minimiser `rho = phi^{1/(1-alpha)} / int phi^{1/(1-alpha)} dmu`.
pub fn extremal_density<F: Fn(f64) -> f64>(space: &MeasureSpace, phi: F, alpha: f64) -> Result<DensitySample> {
    extremal_density_values(space, &space.sample(phi), alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    /// Best objective value reached.
    pub value: f64,
    /// Relative first-order residual `max |h_i - lambda| / lambda` at the best point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub density: DensitySample,
}

/// First-order residual below which the oracle stops.
pub const ORACLE_RESIDUAL: f64 = 1e-8;

/// Residual above which a stalled oracle run is treated as a failure.
pub const ORACLE_ACCEPT_RESIDUAL: f64 = 1e-6;

/// Descent oracle on explicit per-atom weights.
///
/// Works on the masses `m_i = rho_i mu_i`, which live on the probability
/// simplex. Each step is a multiplicative gradient update followed by
/// rescaling back onto the simplex; the step length adapts by backtracking.
pub fn oracle_min_values(phi: &[f64], alpha: f64, space: &MeasureSpace, iterations: usize) -> Result<OracleOutcome> {
    check_alpha(alpha)?;
    check_phi(space, phi)?;
    if space.len() < 2 {
        return Err(Error::param("space", "oracle needs at least two atoms"));
    }
    let mu = space.weights();
    let total = space.total();
    let mut rho = vec![1.0 / total; space.len()];
    let mut value = objective(space, phi, &rho, alpha);
    let mut step = 0.5 / (alpha - 1.0);
    let mut grad = vec![0.0; rho.len()];
    let mut trial = vec![0.0; rho.len()];
    let mut residual = f64::INFINITY;
    let mut done = 0;

    for it in 0..iterations {
        // h_i = d objective / d m_i
        for ((g, p), r) in grad.iter_mut().zip(phi).zip(&rho) {
            *g = alpha * p * r.powf(alpha - 1.0);
        }
        let lambda: f64 = grad.iter().zip(&rho).zip(mu).map(|((g, r), w)| g * r * w).sum();
        residual = grad.iter().map(|g| (g - lambda).abs()).fold(0.0, f64::max) / lambda;
        done = it;
        if residual < ORACLE_RESIDUAL {
            break;
        }
        loop {
            for ((t, r), g) in trial.iter_mut().zip(&rho).zip(&grad) {
                *t = r * (-step * (g - lambda) / lambda).exp();
            }
            let mass: f64 = trial.iter().zip(mu).map(|(t, w)| t * w).sum();
            trial.iter_mut().for_each(|t| *t /= mass);
            let candidate = objective(space, phi, &trial, alpha);
            if candidate <= value {
                value = candidate;
                std::mem::swap(&mut rho, &mut trial);
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                break;
            }
        }
        if step < 1e-300 {
            break;
        }
    }

    Ok(OracleOutcome {
        value,
        residual,
        iterations: done,
        converged: residual < ORACLE_RESIDUAL,
        density: DensitySample { values: rho, exponent: alpha },
    })
}

/// Iterative minimum of `sum phi rho^alpha dmu` subject to `sum rho dmu = 1`.
pub fn oracle_min<F: Fn(f64) -> f64>(phi: F, alpha: f64, space: &MeasureSpace, iterations: usize) -> Result<OracleOutcome> {
    oracle_min_values(&space.sample(phi), alpha, space, iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    #[test]
    fn constant_weights() {
        let unit = MeasureSpace::uniform(100, 1.0).unwrap();
        assert_relative_eq!(extremal_value(&unit, |_| 1.0, 2.0).unwrap(), 1.0, max_relative = 1e-14);
        for alpha in [1.5, 2.0, 3.0, 7.0] {
            assert_relative_eq!(extremal_value(&unit, |_| 2.5, alpha).unwrap(), 2.5, max_relative = 1e-13);
        }
        let rho = extremal_density(&unit, |_| 1.0, 2.0).unwrap();
        assert!(rho.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn exponential_weight_on_unit_interval() {
        let space = MeasureSpace::gauss_legendre(0.0, 1.0, 64).unwrap();
        let closed = extremal_value(&space, f64::exp, 2.0).unwrap();
        assert_relative_eq!(closed, 1.0 / (1.0 - (-1.0f64).exp()), max_relative = 1e-13);
        let rho = extremal_density(&space, f64::exp, 2.0).unwrap();
        for (x, r) in space.points().iter().zip(&rho.values) {
            assert_relative_eq!(*r, (-x).exp() / (1.0 - 1.0 / E), max_relative = 1e-12);
        }
        assert_relative_eq!(rho.mass(&space), 1.0, max_relative = 1e-13);
        let phi = space.sample(f64::exp);
        assert_relative_eq!(objective(&space, &phi, &rho.values, 2.0), closed, max_relative = 1e-13);
    }

    #[test]
    fn invalid_inputs() {
        let s = MeasureSpace::uniform(4, 1.0).unwrap();
        assert!(extremal_value(&s, |_| 1.0, 1.0).is_err());
        assert!(extremal_value(&s, |_| 1.0, 0.5).is_err());
        assert!(extremal_value(&s, |x| x - 0.5, 2.0).is_err());
        assert!(extremal_value(&s, |_| 0.0, 2.0).is_err());
        assert!(oracle_min(|_| 1.0, 2.0, &MeasureSpace::uniform(1, 1.0).unwrap(), 10).is_err());
        assert!(MeasureSpace::new(vec![0.0], vec![-1.0]).is_err());
    }

    #[test]
    fn oracle_matches_on_uniform_space() {
        let s = MeasureSpace::uniform(100, 1.0).unwrap();
        let out = oracle_min(|_| 1.0, 2.0, &s, 1000).unwrap();
        assert!((out.value - 1.0).abs() < 1e-6);
        assert!(out.converged);
    }

    #[test]
    fn oracle_reports_exhausted_budget() {
        let s = MeasureSpace::midpoint_grid(0.0, 1.0, 50).unwrap();
        let out = oracle_min(|x| (8.0 * x).exp(), 3.0, &s, 2).unwrap();
        assert!(!out.converged);
        assert!(out.residual > ORACLE_RESIDUAL);
    }

    #[test]
    fn extremal_density_is_a_minimiser() {
        let s = MeasureSpace::midpoint_grid(0.0, 1.0, 200).unwrap();
        let phi = s.sample(|x| 1.0 + x * x + (5.0 * x).sin().abs());
        let rho = extremal_density_values(&s, &phi, 3.0).unwrap();
        let best = objective(&s, &phi, &rho.values, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let dir: Vec<f64> = (0..s.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            for eps in [1e-1, 1e-3] {
                let mut perturbed: Vec<f64> = rho.values.iter().zip(&dir).map(|(r, d)| (r * (1.0 + eps * d)).max(0.0)).collect();
                let mass: f64 = perturbed.iter().zip(s.weights()).map(|(p, w)| p * w).sum();
                perturbed.iter_mut().for_each(|p| *p /= mass);
                assert!(objective(&s, &phi, &perturbed, 3.0) >= best - 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn scaling_law(c in 0.01f64..100.0, alpha in 1.1f64..5.0) {
            let s = MeasureSpace::midpoint_grid(0.0, 2.0, 37).unwrap();
            let base = extremal_value(&s, |x| 1.0 + x, alpha).unwrap();
            let scaled = extremal_value(&s, |x| c * (1.0 + x), alpha).unwrap();
            prop_assert!((scaled - c * base).abs() <= 1e-12 * scaled);
        }

        #[test]
        fn duplicating_atoms_preserves_value(seed in 0u64..1000, alpha in 1.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
            let ws: Vec<f64> = (0..20).map(|_| rng.random_range(0.1..1.0)).collect();
            let s = MeasureSpace::new(pts, ws).unwrap();
            let phi = |x: f64| 0.5 + x;
            let v = extremal_value(&s, phi, alpha).unwrap();
            let d = extremal_value(&s.refined_by_duplication(), phi, alpha).unwrap();
            prop_assert!((v - d).abs() <= 1e-13 * v);
        }
    }
}
