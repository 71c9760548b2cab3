//! The synthetic world: uniform contexts on `[0,1]^d`, Hölder mean losses, and
//! `[0,1]`-bounded loss samplers whose exact mean is the mean function.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of levels of the truncated Poisson family: losses are `min(N, m) / m`.
pub const POISSON_LEVELS: u32 = 3;

const BISECTION_TOL: f64 = 1e-13;

/// `μ(x) = clamp(a + s ‖x − c‖₂^β, lo, hi)`; (β, |s|)-Hölder by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderMeanFunction {
    pub beta: f64,
    pub anchor: Vec<f64>,
    pub slope: f64,
    pub offset: f64,
    pub lo: f64,
    pub hi: f64,
}

impl HolderMeanFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dist = x
            .iter()
            .zip(&self.anchor)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        (self.offset + self.slope * dist.powf(self.beta)).clamp(self.lo, self.hi)
    }

    /// The Hölder constant `|s|` of this function.
    pub fn holder_constant(&self) -> f64 {
        self.slope.abs()
    }
}

/// Noise family of an arm's losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Bernoulli,
    /// `min(1, E)` with `E ~ Exp(θ)`.
    TruncatedExponential,
    /// `min(N, 3) / 3` with `N ~ Poisson(ν)`.
    TruncatedPoisson,
}

impl NoiseFamily {
    /// Means this family can produce.
    pub fn attainable(&self, mean: f64) -> bool {
        match self {
            NoiseFamily::Bernoulli => (0.0..=1.0).contains(&mean),
            _ => mean > 0.0 && mean < 1.0,
        }
    }
}

/// Mean of `min(1, Exp(θ))`: `(1 − e^{−θ}) / θ`.
pub fn truncated_exponential_mean(theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        -(-theta).exp_m1() / theta
    }
}

/// Solves `(1 − e^{−θ}) / θ = mean` for the rate `θ` by bisection.
pub fn truncated_exponential_rate(mean: f64) -> f64 {
    debug_assert!(mean > 0.0 && mean < 1.0);
    // The mean lies below 1/θ, so θ = 1/mean + 1 brackets the root.
    bisect_decreasing(truncated_exponential_mean, mean, 0.0, 1.0 / mean + 1.0)
}

fn poisson_head(nu: f64) -> [f64; POISSON_LEVELS as usize] {
    let mut probs = [0.0; POISSON_LEVELS as usize];
    let mut term = (-nu).exp();
    for (n, slot) in probs.iter_mut().enumerate() {
        *slot = term;
        term *= nu / (n + 1) as f64;
    }
    probs
}

/// Exact mean of `min(N, m) / m` for `N ~ Poisson(ν)`.
pub fn truncated_poisson_mean(nu: f64) -> f64 {
    let m = POISSON_LEVELS as f64;
    let deficit: f64 = poisson_head(nu)
        .iter()
        .enumerate()
        .map(|(n, p)| (m - n as f64) * p)
        .sum();
    1.0 - deficit / m
}

/// Solves `E[min(N, 3)] / 3 = mean` for the Poisson intensity by bisection.
pub fn truncated_poisson_intensity(mean: f64) -> f64 {
    debug_assert!(mean > 0.0 && mean < 1.0);
    let mut hi = 1.0;
    while truncated_poisson_mean(hi) < mean {
        hi *= 2.0;
    }
    bisect_increasing(truncated_poisson_mean, mean, 0.0, hi)
}

fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_TOL * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64) -> f64 {
    bisect_increasing(|t| -f(t), -target, lo, hi)
}

/// One arm: a mean function plus a noise family.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub mean: HolderMeanFunction,
    pub family: NoiseFamily,
}

impl ArmModel {
    pub fn new(mean: HolderMeanFunction, family: NoiseFamily) -> Result<Self> {
        if !(mean.lo <= mean.hi && family.attainable(mean.lo) && family.attainable(mean.hi)) {
            return Err(Error::Config(format!(
                "mean range [{}, {}] is not attainable by the {family:?} family",
                mean.lo, mean.hi
            )));
        }
        Ok(ArmModel { mean, family })
    }

    pub fn mean_loss(&self, x: &[f64]) -> f64 {
        self.mean.eval(x)
    }

    pub fn sample_loss<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        let mean = self.mean_loss(x);
        match self.family {
            NoiseFamily::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseFamily::TruncatedExponential => {
                let theta = truncated_exponential_rate(mean);
                match Exp::new(theta) {
                    Ok(dist) => dist.sample(rng).min(1.0),
                    Err(_) => 1.0,
                }
            }
            NoiseFamily::TruncatedPoisson => {
                let u: f64 = rng.random();
                let mut cumulative = 0.0;
                for (n, p) in poisson_head(truncated_poisson_intensity(mean))
                    .iter()
                    .enumerate()
                {
                    cumulative += p;
                    if u < cumulative {
                        return n as f64 / POISSON_LEVELS as f64;
                    }
                }
                1.0
            }
        }
    }
}

/// The regularization weight field `λ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaFunction {
    Constant(f64),
    /// `offset + amplitude · mean_i cos(2π x_i)`.
    CosField {
        amplitude: f64,
        offset: f64,
    },
    /// `offset + slope · mean_i x_i`.
    Ramp {
        slope: f64,
        offset: f64,
    },
}

impl LambdaFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mean = |f: &dyn Fn(f64) -> f64| {
            if x.is_empty() {
                0.0
            } else {
                x.iter().map(|&v| f(v)).sum::<f64>() / x.len() as f64
            }
        };
        match *self {
            LambdaFunction::Constant(v) => v,
            LambdaFunction::CosField { amplitude, offset } => {
                offset + amplitude * mean(&|v| (2.0 * PI * v).cos())
            }
            LambdaFunction::Ramp { slope, offset } => offset + slope * mean(&|v| v),
        }
    }

    /// Bound on `‖∇λ‖₂` over the cube.
    pub fn grad_bound(&self, d: usize) -> f64 {
        let root = (d.max(1) as f64).sqrt();
        match *self {
            LambdaFunction::Constant(_) => 0.0,
            LambdaFunction::CosField { amplitude, .. } => 2.0 * PI * amplitude.abs() / root,
            LambdaFunction::Ramp { slope, .. } => slope.abs() / root,
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            LambdaFunction::Constant(v) => Some(v),
            _ => None,
        }
    }
}

fn parse_pair(key: &str, args: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = args.split(',').collect();
    let bad = || Error::validation("lambda", format!("`{key}:{args}` needs two numbers"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
    let b = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
    Ok((a, b))
}

impl FromStr for LambdaFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.trim().split_once(':').ok_or_else(|| {
            Error::validation("lambda", format!("`{s}` is not of the form kind:args"))
        })?;
        let parsed = match kind {
            "const" => {
                let v = args
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::validation("lambda", format!("bad constant `{args}`")))?;
                LambdaFunction::Constant(v)
            }
            "cosfield" => {
                let (amplitude, offset) = parse_pair(kind, args)?;
                if offset <= amplitude.abs() {
                    return Err(Error::validation(
                        "lambda",
                        "cosfield needs offset > |amplitude| to stay positive",
                    ));
                }
                LambdaFunction::CosField { amplitude, offset }
            }
            "ramp" => {
                let (slope, offset) = parse_pair(kind, args)?;
                if offset < 0.0 || offset + slope.min(0.0) < 0.0 {
                    return Err(Error::validation(
                        "lambda",
                        "ramp must be nonnegative on the cube",
                    ));
                }
                LambdaFunction::Ramp { slope, offset }
            }
            _ => {
                return Err(Error::validation(
                    "lambda",
                    format!("unknown lambda kind `{kind}`"),
                ))
            }
        };
        if let LambdaFunction::Constant(v) = parsed {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(
                    "lambda",
                    "constant lambda must be finite and nonnegative",
                ));
            }
        }
        Ok(parsed)
    }
}

impl fmt::Display for LambdaFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaFunction::Constant(v) => write!(f, "const:{v}"),
            LambdaFunction::CosField { amplitude, offset } => {
                write!(f, "cosfield:{amplitude},{offset}")
            }
            LambdaFunction::Ramp { slope, offset } => write!(f, "ramp:{slope},{offset}"),
        }
    }
}

/// Per-arm entry of an environment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub family: NoiseFamily,
    pub offset: f64,
    pub slope: f64,
    /// One coordinate per dimension, or a single value broadcast to all.
    pub anchor: Vec<f64>,
}

/// Serializable environment description; `beta` is supplied per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_holder_constant")]
    pub holder_constant: f64,
    #[serde(default = "default_clamp")]
    pub clamp: [f64; 2],
    pub arms: Vec<ArmSpec>,
}

fn default_dim() -> usize {
    1
}

fn default_holder_constant() -> f64 {
    1.0
}

fn default_clamp() -> [f64; 2] {
    [0.05, 0.95]
}

impl Default for EnvironmentSpec {
    /// Three arms, one per noise family, with crossing mean functions.
    fn default() -> Self {
        EnvironmentSpec {
            dim: 1,
            holder_constant: 1.0,
            clamp: default_clamp(),
            arms: vec![
                ArmSpec {
                    family: NoiseFamily::TruncatedPoisson,
                    offset: 0.25,
                    slope: 0.6,
                    anchor: vec![0.2],
                },
                ArmSpec {
                    family: NoiseFamily::TruncatedExponential,
                    offset: 0.3,
                    slope: 0.55,
                    anchor: vec![0.8],
                },
                ArmSpec {
                    family: NoiseFamily::Bernoulli,
                    offset: 0.45,
                    slope: 0.4,
                    anchor: vec![0.5],
                },
            ],
        }
    }
}

impl EnvironmentSpec {
    pub fn build(&self, beta: f64, lambda: LambdaFunction) -> Result<Environment> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::validation("beta", "beta must be in (0,1]"));
        }
        if self.dim == 0 {
            return Err(Error::validation(
                "environment.dim",
                "dimension must be at least 1",
            ));
        }
        if self.arms.is_empty() {
            return Err(Error::validation(
                "environment.arms",
                "at least one arm is required",
            ));
        }
        let [lo, hi] = self.clamp;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::validation(
                "environment.clamp",
                "clamp range must satisfy 0 < lo <= hi < 1",
            ));
        }
        if !(self.holder_constant.is_finite() && self.holder_constant > 0.0) {
            return Err(Error::validation(
                "environment.holder_constant",
                "must be positive",
            ));
        }
        let mut arms = Vec::with_capacity(self.arms.len());
        for (i, arm) in self.arms.iter().enumerate() {
            let anchor = match arm.anchor.len() {
                1 => vec![arm.anchor[0]; self.dim],
                n if n == self.dim => arm.anchor.clone(),
                n => {
                    return Err(Error::validation(
                        format!("environment.arms[{i}].anchor"),
                        format!("has {n} coordinates, expected 1 or {}", self.dim),
                    ))
                }
            };
            if arm.slope.abs() > self.holder_constant {
                return Err(Error::validation(
                    format!("environment.arms[{i}].slope"),
                    format!(
                        "|slope| must not exceed holder_constant {}",
                        self.holder_constant
                    ),
                ));
            }
            let mean = HolderMeanFunction {
                beta,
                anchor,
                slope: arm.slope,
                offset: arm.offset,
                lo,
                hi,
            };
            arms.push(ArmModel::new(mean, arm.family)?);
        }
        Environment::new(self.dim, beta, self.holder_constant, arms, lambda)
    }
}

/// Context sampler, arms and regularization weight field.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    dim: usize,
    beta: f64,
    holder_constant: f64,
    arms: Vec<ArmModel>,
    lambda: LambdaFunction,
}

impl Environment {
    pub fn new(
        dim: usize,
        beta: f64,
        holder_constant: f64,
        arms: Vec<ArmModel>,
        lambda: LambdaFunction,
    ) -> Result<Self> {
        if arms.iter().any(|a| a.mean.anchor.len() != dim) {
            return Err(Error::Config(
                "arm anchors must match the context dimension".into(),
            ));
        }
        Ok(Environment {
            dim,
            beta,
            holder_constant,
            arms,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn holder_constant(&self) -> f64 {
        self.holder_constant
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn arms(&self) -> &[ArmModel] {
        &self.arms
    }

    pub fn lambda(&self) -> &LambdaFunction {
        &self.lambda
    }

    /// One uniform draw from `[0,1]^d`.
    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| rng.random::<f64>()).collect()
    }

    pub fn mean_loss(&self, arm: usize, x: &[f64]) -> f64 {
        self.arms[arm].mean_loss(x)
    }

    pub fn mean_losses(&self, x: &[f64]) -> Vec<f64> {
        self.arms.iter().map(|a| a.mean_loss(x)).collect()
    }

    pub fn sample_loss<R: Rng + ?Sized>(&self, arm: usize, x: &[f64], rng: &mut R) -> f64 {
        self.arms[arm].sample_loss(x, rng)
    }
}
