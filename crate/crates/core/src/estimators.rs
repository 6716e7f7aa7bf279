//! Univariate leaf distributions fitted from weighted data.
//!
//! Row weights act as fractional frequencies: the multinomial estimate uses
//! weighted class counts plus a Laplace pseudo-count, the Gaussian uses the
//! weighted mean and the reliability-weighted Bessel correction
//! `σ² = Σv / ((Σv)² − Σv²) · Σ v (d − μ)²`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use libm::erfc;
use thiserror::Error;

/// Lower bound on fitted standard deviations.
pub const SIGMA_FLOOR: f64 = 1e-3;
/// Rows with weight below this are discarded before fitting.
pub const EPSILON_W: f64 = 1e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("empty column")]
    Empty,
    #[error("value {value} outside categories 0..{arity}")]
    OutOfRange { value: f64, arity: usize },
    #[error("values and weights differ in length ({values} vs {weights})")]
    LengthMismatch { values: usize, weights: usize },
    #[error("weight {0} is not positive and finite")]
    BadWeight(f64),
    #[error("invalid distribution parameters: {0}")]
    InvalidParameters(String),
}

/// Realizations of one variable with one positive weight each.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedColumn {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedColumn {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self, FitError> {
        if values.len() != weights.len() {
            return Err(FitError::LengthMismatch { values: values.len(), weights: weights.len() });
        }
        if values.is_empty() {
            return Err(FitError::Empty);
        }
        if let Some(&w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(FitError::BadWeight(w));
        }
        Ok(WeightedColumn { values, weights })
    }

    pub fn unweighted(values: Vec<f64>) -> Result<Self, FitError> {
        let n = values.len();
        WeightedColumn::new(values, vec![1.0; n])
    }

    /// Drops entries whose weight is below `epsilon` before building the column.
    pub fn thresholded(values: Vec<f64>, weights: Vec<f64>, epsilon: f64) -> Result<Self, FitError> {
        if values.len() != weights.len() {
            return Err(FitError::LengthMismatch { values: values.len(), weights: weights.len() });
        }
        let (values, weights): (Vec<f64>, Vec<f64>) =
            values.into_iter().zip(weights).filter(|(_, w)| *w >= epsilon && *w > 0.0).unzip();
        WeightedColumn::new(values, weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multinomial {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl Multinomial {
    pub fn new(probs: Vec<f64>) -> Result<Self, FitError> {
        if probs.len() < 2 {
            return Err(FitError::InvalidParameters(format!("arity {} < 2", probs.len())));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(FitError::InvalidParameters("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(FitError::InvalidParameters(format!("probabilities sum to {total}")));
        }
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(Multinomial { probs, log_probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn arity(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn log_prob(&self, k: usize) -> f64 {
        self.log_probs[k]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
        last
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    mu: f64,
    sigma: f64,
}

impl Gaussian {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, FitError> {
        if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(FitError::InvalidParameters(format!("N({mu}, {sigma})")));
        }
        Ok(Gaussian { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        -LN_SQRT_2PI - self.sigma.ln() - 0.5 * z * z
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        let z = (x - self.mu) / self.sigma;
        0.5 * erfc(-z / std::f64::consts::SQRT_2)
    }

    /// Upper tail `P(X > x)`, accurate where `1 - cdf` would cancel.
    pub fn sf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 0.0;
        }
        if x == f64::NEG_INFINITY {
            return 1.0;
        }
        let z = (x - self.mu) / self.sigma;
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    }

    /// `ln P(lo ≤ X ≤ hi)`, using whichever tail keeps the difference well
    /// conditioned.
    pub fn log_interval(&self, lo: f64, hi: f64) -> f64 {
        let p = if lo >= self.mu {
            self.sf(lo) - self.sf(hi)
        } else if hi <= self.mu {
            self.cdf(hi) - self.cdf(lo)
        } else {
            1.0 - self.cdf(lo) - self.sf(hi)
        };
        if p <= 0.0 {
            f64::NEG_INFINITY
        } else {
            p.ln()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu + self.sigma * z
    }
}

/// Univariate distribution held by a leaf node.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafDist {
    Multinomial(Multinomial),
    Gaussian(Gaussian),
}

impl LeafDist {
    pub fn param_count(&self) -> usize {
        match self {
            LeafDist::Multinomial(m) => m.arity() - 1,
            LeafDist::Gaussian(_) => 2,
        }
    }
}

/// Log pmf / log pdf of `dist` at `x`.
pub fn leaf_log_pdf(dist: &LeafDist, x: f64) -> Result<f64, FitError> {
    match dist {
        LeafDist::Multinomial(m) => {
            if x.fract() != 0.0 || x < 0.0 || x >= m.arity() as f64 {
                return Err(FitError::OutOfRange { value: x, arity: m.arity() });
            }
            Ok(m.log_prob(x as usize))
        }
        LeafDist::Gaussian(g) => Ok(g.log_pdf(x)),
    }
}

pub fn leaf_cdf(dist: &Gaussian, x: f64) -> f64 {
    dist.cdf(x)
}

/// Weighted class frequencies with Laplace pseudo-count `alpha` per class:
/// `P(j) = (C_j + α) / (Σ_l C_l + kα)` with `C_j = Σ_{i: d_i = j} v_i`.
pub fn fit_multinomial(col: &WeightedColumn, arity: usize, alpha: f64) -> Result<Multinomial, FitError> {
    if col.is_empty() {
        return Err(FitError::Empty);
    }
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(FitError::InvalidParameters(format!("alpha = {alpha}")));
    }
    let mut counts = vec![0.0; arity];
    for (&d, &v) in col.values.iter().zip(&col.weights) {
        if d.fract() != 0.0 || d < 0.0 || d >= arity as f64 {
            return Err(FitError::OutOfRange { value: d, arity });
        }
        counts[d as usize] += v;
    }
    multinomial_from_counts(&counts, alpha)
}

/// Same estimate from precomputed weighted counts.
pub fn multinomial_from_counts(counts: &[f64], alpha: f64) -> Result<Multinomial, FitError> {
    let total: f64 = counts.iter().sum::<f64>() + alpha * counts.len() as f64;
    if !(total > 0.0) {
        return Err(FitError::Empty);
    }
    let probs = counts.iter().map(|c| (c + alpha) / total).collect();
    Multinomial::new(probs)
}

/// Weighted Gaussian with the Bessel-style correction for reliability weights.
/// Falls back to `sigma_floor` when the correction is undefined (a single
/// effective point) and clamps every estimate from below at `sigma_floor`.
pub fn fit_gaussian(col: &WeightedColumn, sigma_floor: f64) -> Result<Gaussian, FitError> {
    if col.is_empty() {
        return Err(FitError::Empty);
    }
    let s1: f64 = col.weights.iter().sum();
    let s2: f64 = col.weights.iter().map(|v| v * v).sum();
    let mu = col.values.iter().zip(&col.weights).map(|(d, v)| v * d).sum::<f64>() / s1;
    let denom = s1 * s1 - s2;
    let sigma = if col.len() < 2 || denom <= s1 * s1 * 1e-12 {
        sigma_floor
    } else {
        let ss: f64 = col.values.iter().zip(&col.weights).map(|(d, v)| v * (d - mu) * (d - mu)).sum();
        (s1 / denom * ss).sqrt().max(sigma_floor)
    };
    Gaussian::new(mu, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn col(values: &[f64], weights: &[f64]) -> WeightedColumn {
        WeightedColumn::new(values.to_vec(), weights.to_vec()).unwrap()
    }

    #[test]
    fn multinomial_weighted_counts() {
        let m = fit_multinomial(&col(&[0.0, 0.0, 1.0], &[1.0, 1.0, 2.0]), 2, 0.0).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
        let m = fit_multinomial(&col(&[0.0, 1.0], &[1.0, 1.0]), 2, 0.0).unwrap();
        assert_eq!(m.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn multinomial_smoothing() {
        let m = fit_multinomial(&col(&[0.0], &[1.0]), 2, 0.1).unwrap();
        assert_relative_eq!(m.probs()[0], 1.1 / 1.2, epsilon = 1e-15);
        assert_relative_eq!(m.probs()[1], 0.1 / 1.2, epsilon = 1e-15);
    }

    #[test]
    fn multinomial_errors() {
        assert_eq!(fit_multinomial(&col(&[2.0], &[1.0]), 2, 0.1), Err(FitError::OutOfRange { value: 2.0, arity: 2 }));
        assert_eq!(WeightedColumn::new(vec![], vec![]), Err(FitError::Empty));
        assert!(matches!(WeightedColumn::new(vec![0.0], vec![0.0]), Err(FitError::BadWeight(_))));
    }

    #[test]
    fn gaussian_examples() {
        let g = fit_gaussian(&col(&[0.0, 2.0], &[1.0, 1.0]), SIGMA_FLOOR).unwrap();
        assert_relative_eq!(g.mu(), 1.0);
        assert_relative_eq!(g.sigma(), 2f64.sqrt(), epsilon = 1e-15);
        let g = fit_gaussian(&col(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), SIGMA_FLOOR).unwrap();
        assert_relative_eq!(g.mu(), 2.0);
        assert_relative_eq!(g.sigma(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_doubled_weights_by_hand() {
        // Σv = 4, (Σv)² − Σv² = 16 − 8 = 8, Σ v (d − μ)² = 2 + 2 = 4 → σ² = 4/8 · 4 = 2
        let g = fit_gaussian(&col(&[0.0, 2.0], &[2.0, 2.0]), SIGMA_FLOOR).unwrap();
        assert_relative_eq!(g.mu(), 1.0);
        assert_relative_eq!(g.sigma(), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn gaussian_degenerate_inputs_hit_floor() {
        let g = fit_gaussian(&col(&[5.0], &[3.0]), SIGMA_FLOOR).unwrap();
        assert_eq!(g.sigma(), SIGMA_FLOOR);
        let g = fit_gaussian(&col(&[5.0, 5.0, 5.0], &[1.0, 2.0, 1.0]), SIGMA_FLOOR).unwrap();
        assert_eq!(g.sigma(), SIGMA_FLOOR);
        assert_eq!(g.mu(), 5.0);
    }

    #[test]
    fn thresholded_drops_tiny_weights() {
        let c = WeightedColumn::thresholded(vec![0.0, 1.0, 2.0], vec![1.0, 1e-9, 2.0], EPSILON_W).unwrap();
        assert_eq!(c.values(), &[0.0, 2.0]);
    }

    #[test]
    fn leaf_densities() {
        let m = LeafDist::Multinomial(Multinomial::new(vec![0.25, 0.75]).unwrap());
        assert_relative_eq!(leaf_log_pdf(&m, 1.0).unwrap(), 0.75f64.ln());
        assert!(leaf_log_pdf(&m, 2.0).is_err());
        let g = Gaussian::new(0.0, 1.0).unwrap();
        assert_relative_eq!(leaf_log_pdf(&LeafDist::Gaussian(g), 0.0).unwrap(), -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);
        assert_eq!(leaf_cdf(&g, 0.0), 0.5);
        assert_eq!(g.cdf(f64::NEG_INFINITY), 0.0);
        assert_eq!(g.cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn gaussian_cdf_reference_values() {
        let g = Gaussian::new(0.0, 1.0).unwrap();
        // Φ(1) and Φ(−3) to 16 digits
        assert_relative_eq!(g.cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-12);
        assert_relative_eq!(g.cdf(-3.0), 0.001_349_898_031_630_094_6, epsilon = 1e-12);
        let mut prev = 0.0;
        for i in -80..=80 {
            let c = g.cdf(i as f64 * 0.1);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn interval_far_tail_is_finite() {
        let g = Gaussian::new(0.0, 1.0).unwrap();
        let lp = g.log_interval(10.0, 11.0);
        assert!(lp.is_finite() && lp < -50.0);
        assert_relative_eq!(g.log_interval(f64::NEG_INFINITY, 0.0), 0.5f64.ln(), epsilon = 1e-12);
        assert_eq!(g.log_interval(f64::NEG_INFINITY, f64::INFINITY), 0.0);
    }
}
