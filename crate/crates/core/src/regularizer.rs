//! Convex regularizers on the simplex, their conjugates, and the reduction of
//! context-dependent penalties to a context-free core plus a linear shift.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::simplex::{self, dot, sq_dist, SimplexPoint};

/// Smallest admissible component of a KL reference policy.
pub const MIN_REFERENCE_WEIGHT: f64 = 1e-6;

/// A built-in reference policy `q(x)` for the KL and squared-distance penalties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferencePolicy {
    Uniform,
    /// `q_i(x) = (1 + a cos(2π(x̄ + i/K))) / K`, where `x̄` is the mean coordinate.
    Cosine {
        amplitude: f64,
    },
}

impl ReferencePolicy {
    pub fn weights(&self, x: &[f64], k: usize) -> Vec<f64> {
        match *self {
            ReferencePolicy::Uniform => vec![1.0 / k as f64; k],
            ReferencePolicy::Cosine { .. } if k == 1 => vec![1.0],
            ReferencePolicy::Cosine { amplitude } => {
                let xbar = if x.is_empty() {
                    0.0
                } else {
                    x.iter().sum::<f64>() / x.len() as f64
                };
                (0..k)
                    .map(|i| {
                        (1.0 + amplitude * (2.0 * PI * (xbar + i as f64 / k as f64)).cos())
                            / k as f64
                    })
                    .collect()
            }
        }
    }
}

impl FromStr for ReferencePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name.trim(), arg) {
            ("uniform", None) => Ok(ReferencePolicy::Uniform),
            ("cosine", arg) => {
                let amplitude = match arg {
                    None => 0.5,
                    Some(a) => a.trim().parse::<f64>().map_err(|_| {
                        Error::validation("regularizer", format!("bad cosine amplitude `{a}`"))
                    })?,
                };
                // Keeps every component at least (1 - a) / K, well above the KL floor.
                if !(0.0..=0.99).contains(&amplitude) {
                    return Err(Error::validation(
                        "regularizer",
                        "cosine amplitude must be in [0, 0.99]",
                    ));
                }
                Ok(ReferencePolicy::Cosine { amplitude })
            }
            _ => Err(Error::validation(
                "regularizer",
                format!("unknown reference policy `{s}`"),
            )),
        }
    }
}

impl fmt::Display for ReferencePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferencePolicy::Uniform => write!(f, "uniform"),
            ReferencePolicy::Cosine { amplitude } => write!(f, "cosine:{amplitude}"),
        }
    }
}

/// Upper curvature certificate of a regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    Finite(f64),
    /// The Hessian blows up at the simplex boundary.
    UnboundedOnBoundary,
}

/// The three penalty families: negative entropy, KL to a reference, and the
/// squared Euclidean distance to a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Entropy,
    Kl(ReferencePolicy),
    L2(ReferencePolicy),
}

/// A context-free regularizer `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreRegularizer {
    /// `Σ p_i log p_i`
    Entropy,
    /// `‖p‖²`
    SquaredNorm,
}

/// `ρ(p, x) = H(p) + ⟨p, k(x)⟩ + c(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedRegularizer {
    pub core: CoreRegularizer,
    source: Regularizer,
}

fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

fn require_interior(p: &SimplexPoint) -> Result<()> {
    if p.as_slice().iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain(
            "entropy-type gradient requested at a boundary point of the simplex".into(),
        ));
    }
    Ok(())
}

impl CoreRegularizer {
    pub fn value(&self, p: &[f64]) -> f64 {
        match self {
            CoreRegularizer::Entropy => p.iter().map(|&v| xlogx(v)).sum(),
            CoreRegularizer::SquaredNorm => dot(p, p),
        }
    }

    /// Gradient without a domain check; entropy components are `-inf` at zero.
    pub fn grad_component(&self, p: &[f64], i: usize) -> f64 {
        match self {
            CoreRegularizer::Entropy => 1.0 + p[i].ln(),
            CoreRegularizer::SquaredNorm => 2.0 * p[i],
        }
    }

    pub fn conjugate(&self, y: &[f64]) -> f64 {
        match self {
            CoreRegularizer::Entropy => simplex::log_sum_exp(y),
            CoreRegularizer::SquaredNorm => {
                let p = self.conjugate_grad(y);
                dot(p.as_slice(), y) - dot(p.as_slice(), p.as_slice())
            }
        }
    }

    pub fn conjugate_grad(&self, y: &[f64]) -> SimplexPoint {
        match self {
            CoreRegularizer::Entropy => simplex::softmax(y),
            CoreRegularizer::SquaredNorm => {
                let half: Vec<f64> = y.iter().map(|v| v / 2.0).collect();
                simplex::project(&half)
            }
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        match self {
            CoreRegularizer::Entropy => 1.0,
            CoreRegularizer::SquaredNorm => 2.0,
        }
    }
}

impl Regularizer {
    pub fn strong_convexity(&self) -> f64 {
        match self {
            Regularizer::Entropy | Regularizer::Kl(_) => 1.0,
            Regularizer::L2(_) => 2.0,
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match self {
            Regularizer::Entropy | Regularizer::Kl(_) => Smoothness::UnboundedOnBoundary,
            Regularizer::L2(_) => Smoothness::Finite(2.0),
        }
    }

    /// True when the penalty's curvature is bounded on the whole simplex.
    pub fn is_smooth(&self) -> bool {
        matches!(self.smoothness(), Smoothness::Finite(_))
    }

    /// The reference policy `q(x)`, if the penalty has one.
    pub fn reference(&self, x: &[f64], k: usize) -> Option<Vec<f64>> {
        match self {
            Regularizer::Entropy => None,
            Regularizer::Kl(q) | Regularizer::L2(q) => Some(q.weights(x, k)),
        }
    }

    /// `ρ(p, x)`, with the `0 log 0 = 0` convention.
    pub fn value(&self, p: &SimplexPoint, x: &[f64]) -> Result<f64> {
        let p = p.as_slice();
        match self {
            Regularizer::Entropy => Ok(CoreRegularizer::Entropy.value(p)),
            Regularizer::Kl(r) => {
                let q = r.weights(x, p.len());
                let mut total = 0.0;
                for (&pi, &qi) in p.iter().zip(&q) {
                    if pi == 0.0 {
                        continue;
                    }
                    if qi <= 0.0 {
                        return Err(Error::Domain(
                            "KL reference has a zero component where p is positive".into(),
                        ));
                    }
                    total += pi * (pi / qi).ln();
                }
                Ok(total)
            }
            Regularizer::L2(r) => Ok(sq_dist(p, &r.weights(x, p.len()))),
        }
    }

    /// `∇_p ρ(p, x)`; entropy-type penalties require an interior point.
    pub fn grad(&self, p: &SimplexPoint, x: &[f64]) -> Result<Vec<f64>> {
        let k = p.len();
        match self {
            Regularizer::Entropy => {
                require_interior(p)?;
                Ok(p.as_slice().iter().map(|v| 1.0 + v.ln()).collect())
            }
            Regularizer::Kl(r) => {
                require_interior(p)?;
                let q = r.weights(x, k);
                Ok(p.as_slice()
                    .iter()
                    .zip(&q)
                    .map(|(v, qi)| 1.0 + v.ln() - qi.ln())
                    .collect())
            }
            Regularizer::L2(r) => {
                let q = r.weights(x, k);
                Ok(p.as_slice()
                    .iter()
                    .zip(&q)
                    .map(|(v, qi)| 2.0 * (v - qi))
                    .collect())
            }
        }
    }

    /// `ρ*(y) = sup_{p ∈ Δ} ⟨p, y⟩ − ρ(p, x)`.
    pub fn conjugate(&self, y: &[f64], x: &[f64]) -> f64 {
        match self {
            Regularizer::Entropy => simplex::log_sum_exp(y),
            Regularizer::Kl(r) => simplex::weighted_log_sum_exp(y, &r.weights(x, y.len())),
            Regularizer::L2(r) => {
                let q = r.weights(x, y.len());
                let p = self.conjugate_grad(y, x);
                dot(p.as_slice(), y) - sq_dist(p.as_slice(), &q)
            }
        }
    }

    /// `∇ρ*(y) = argmin_{p ∈ Δ} ρ(p, x) − ⟨p, y⟩`.
    pub fn conjugate_grad(&self, y: &[f64], x: &[f64]) -> SimplexPoint {
        match self {
            Regularizer::Entropy => simplex::softmax(y),
            Regularizer::Kl(r) => {
                let q = r.weights(x, y.len());
                let tilted: Vec<f64> = y.iter().zip(&q).map(|(v, qi)| v + qi.ln()).collect();
                simplex::softmax(&tilted)
            }
            Regularizer::L2(r) => {
                let q = r.weights(x, y.len());
                let target: Vec<f64> = q.iter().zip(y).map(|(qi, v)| qi + v / 2.0).collect();
                simplex::project(&target)
            }
        }
    }

    pub fn reduce(&self) -> ReducedRegularizer {
        let core = match self {
            Regularizer::Entropy | Regularizer::Kl(_) => CoreRegularizer::Entropy,
            Regularizer::L2(_) => CoreRegularizer::SquaredNorm,
        };
        ReducedRegularizer {
            core,
            source: *self,
        }
    }
}

impl ReducedRegularizer {
    /// `k(x)`.
    pub fn linear_shift(&self, x: &[f64], k: usize) -> Vec<f64> {
        match self.source {
            Regularizer::Entropy => vec![0.0; k],
            Regularizer::Kl(r) => r.weights(x, k).iter().map(|q| -q.ln()).collect(),
            Regularizer::L2(r) => r.weights(x, k).iter().map(|q| -2.0 * q).collect(),
        }
    }

    /// `c(x)`.
    pub fn offset(&self, x: &[f64], k: usize) -> f64 {
        match self.source {
            Regularizer::Entropy | Regularizer::Kl(_) => 0.0,
            Regularizer::L2(r) => {
                let q = r.weights(x, k);
                dot(&q, &q)
            }
        }
    }

    /// `H(p) + ⟨p, k(x)⟩ + c(x)`.
    pub fn value(&self, p: &SimplexPoint, x: &[f64]) -> f64 {
        let k = p.len();
        self.core.value(p.as_slice())
            + dot(p.as_slice(), &self.linear_shift(x, k))
            + self.offset(x, k)
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "entropy" {
            return Ok(Regularizer::Entropy);
        }
        if let Some(rest) = s.strip_prefix("kl:") {
            return Ok(Regularizer::Kl(rest.parse()?));
        }
        if let Some(rest) = s.strip_prefix("l2:") {
            return Ok(Regularizer::L2(rest.parse()?));
        }
        Err(Error::validation(
            "regularizer",
            format!("`{s}` is not one of entropy, kl:<reference>, l2:<reference>"),
        ))
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::Entropy => write!(f, "entropy"),
            Regularizer::Kl(r) => write!(f, "kl:{r}"),
            Regularizer::L2(r) => write!(f, "l2:{r}"),
        }
    }
}
