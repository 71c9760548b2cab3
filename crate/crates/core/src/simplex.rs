//! Points of the probability simplex and the closed-form maps onto it.

use serde::Serialize;

use crate::error::{Error, Result};

/// A probability vector over `K` arms.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Absolute tolerance on the sum of the weights.
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain(
                "a simplex point needs at least one weight".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Domain(format!(
                "simplex weight {w} is negative or not finite"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Domain(format!(
                "simplex weights sum to {sum}, not 1"
            )));
        }
        Ok(SimplexPoint(weights))
    }

    /// Builds a point from weights known to be valid up to rounding, clipping
    /// tiny negatives and renormalising.
    pub(crate) fn from_normalized(mut weights: Vec<f64>) -> Self {
        debug_assert!(!weights.is_empty());
        for w in &mut weights {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > f64::EPSILON {
            for w in &mut weights {
                *w /= sum;
            }
        }
        SimplexPoint(weights)
    }

    pub fn uniform(k: usize) -> Self {
        SimplexPoint(vec![1.0 / k as f64; k])
    }

    pub fn vertex(k: usize, i: usize) -> Self {
        let mut w = vec![0.0; k];
        w[i] = 1.0;
        SimplexPoint(w)
    }

    /// `alpha * base + (1 - alpha) * inner`.
    pub fn mixture(alpha: f64, base: &SimplexPoint, inner: &SimplexPoint) -> Self {
        let w = base
            .0
            .iter()
            .zip(&inner.0)
            .map(|(b, q)| alpha * b + (1.0 - alpha) * q)
            .collect();
        SimplexPoint::from_normalized(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min_weight(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `log Σ exp(y_i)`, shifted by the maximum.
pub fn log_sum_exp(y: &[f64]) -> f64 {
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + y.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log Σ w_i exp(y_i)` for positive weights.
pub fn weighted_log_sum_exp(y: &[f64], w: &[f64]) -> f64 {
    let shifted: Vec<f64> = y.iter().zip(w).map(|(y, w)| y + w.ln()).collect();
    log_sum_exp(&shifted)
}

/// Stable softmax.
pub fn softmax(y: &[f64]) -> SimplexPoint {
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = y.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = e.iter().sum();
    SimplexPoint::from_normalized(e.into_iter().map(|v| v / z).collect())
}

/// Euclidean projection onto the simplex (sort-and-threshold, O(K log K)).
pub fn project(v: &[f64]) -> SimplexPoint {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    SimplexPoint::from_normalized(v.iter().map(|x| (x - threshold).max(0.0)).collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
