//! Ground truth: the pointwise oracle, the loss functional by quadrature, and
//! regret with its estimation/approximation split.
//!
//! All integrals over `[0,1]^d` are node averages on a [`NodeSet`] whose nodes
//! are grouped by policy bin. Bin averages `μ̄`, `λ̄` and the reduced shifts are
//! taken over the same nodes as the loss itself, so the best piecewise-constant
//! policy is exactly optimal for the discretised functional and the
//! approximation error is nonnegative up to rounding.

use rand::Rng;
use serde::Serialize;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::orchestrator::PolicyResult;
use crate::parallel::{map_range, pairwise_sum};
use crate::partition::BinGrid;
use crate::regularizer::Regularizer;
use crate::rng::{stream, Purpose};
use crate::simplex::{dot, SimplexPoint};
use crate::stats;
use crate::ucfw::BinObjective;

/// Entropic mirror descent over the simplex.
///
/// The step at iteration `t` is `s / sqrt(t)`. The scale `s` starts at
/// `step_scale`, doubles after every accepted step and halves (rejecting the
/// step) whenever the objective would increase or stop being finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorDescent {
    pub max_iter: usize,
    /// Stop once an accepted step moves no coordinate by more than this.
    pub tolerance: f64,
    pub step_scale: f64,
}

impl Default for MirrorDescent {
    fn default() -> Self {
        MirrorDescent {
            max_iter: 100_000,
            tolerance: 1e-10,
            step_scale: 1.0,
        }
    }
}

impl MirrorDescent {
    pub fn minimize(
        &self,
        k: usize,
        objective: impl Fn(&[f64]) -> f64,
        gradient: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<SimplexPoint> {
        if k == 0 {
            return Err(Error::Input("cannot minimise over an empty simplex".into()));
        }
        let mut theta = vec![0.0; k];
        let mut p = SimplexPoint::uniform(k).into_inner();
        let mut value = objective(&p);
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "objective is {value} at the simplex center"
            )));
        }
        let mut scale = self.step_scale;
        for t in 1..=self.max_iter {
            let g = gradient(&p);
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(
                    "gradient is not finite at an accepted iterate".into(),
                ));
            }
            let eta = scale / (t as f64).sqrt();
            let candidate_theta: Vec<f64> =
                theta.iter().zip(&g).map(|(th, gi)| th - eta * gi).collect();
            let candidate = softmax_vec(&candidate_theta);
            let candidate_value = objective(&candidate);
            if candidate_value.is_finite() && candidate_value <= value {
                let movement = p
                    .iter()
                    .zip(&candidate)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                theta = recenter(candidate_theta);
                p = candidate;
                value = candidate_value;
                scale = (scale * 2.0).min(1e12);
                if movement < self.tolerance {
                    break;
                }
            } else {
                scale *= 0.5;
                if scale < 1e-300 {
                    break;
                }
            }
        }
        Ok(SimplexPoint::from_normalized(p))
    }
}

fn softmax_vec(theta: &[f64]) -> Vec<f64> {
    crate::simplex::softmax(theta).into_inner()
}

/// Shifts the dual iterate so its maximum is zero and floors it, keeping
/// `exp` in range without changing the primal point.
fn recenter(mut theta: Vec<f64>) -> Vec<f64> {
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in &mut theta {
        *v = (*v - max).max(-1e4);
    }
    theta
}

/// [`MirrorDescent::minimize`] with default settings.
pub fn simplex_minimize(
    k: usize,
    objective: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<SimplexPoint> {
    MirrorDescent::default().minimize(k, objective, gradient)
}

/// `p*(x) = ∇ρ*(−μ(x)/λ(x))`.
pub fn oracle_pstar(
    x: &[f64],
    means: &[f64],
    lambda: f64,
    regularizer: &Regularizer,
) -> Result<SimplexPoint> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Domain(format!(
            "oracle needs a positive weight, got {lambda}"
        )));
    }
    let y: Vec<f64> = means.iter().map(|m| -m / lambda).collect();
    Ok(regularizer.conjugate_grad(&y, x))
}

/// `η = sqrt(K/(K−1)) min_i p_i`, the scaled distance of `p` to the simplex boundary.
pub fn eta(p: &SimplexPoint) -> Result<f64> {
    let k = p.len();
    if k < 2 {
        return Err(Error::Input("η needs at least two arms".into()));
    }
    Ok((k as f64 / (k as f64 - 1.0)).sqrt() * p.min_weight())
}

/// `η(x)` for the environment's oracle; zero where `λ(x) = 0` (vertex optimum).
pub fn eta_at(env: &Environment, regularizer: &Regularizer, x: &[f64]) -> Result<f64> {
    let lambda = env.lambda().eval(x);
    if lambda <= 0.0 {
        if env.num_arms() < 2 {
            return Err(Error::Input("η needs at least two arms".into()));
        }
        return Ok(0.0);
    }
    eta(&oracle_pstar(x, &env.mean_losses(x), lambda, regularizer)?)
}

/// Default midpoint nodes per axis, or `None` when tensor quadrature is refused.
pub fn default_nodes_per_axis(dim: usize) -> Option<usize> {
    match dim {
        1 => Some(512),
        2 => Some(64),
        3 => Some(16),
        _ => None,
    }
}

/// Default Monte-Carlo sample count.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Evaluation nodes grouped by policy bin; every node has the same weight.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    grid: BinGrid,
    /// Per bin, node coordinates flattened with stride `d`.
    per_bin: Vec<Vec<f64>>,
    total: usize,
    nodes_per_axis: Option<usize>,
}

impl NodeSet {
    /// Midpoint nodes: `B·ceil(G/B)` per axis, so every bin gets the same
    /// `ceil(G/B)^d` nodes. Refused for `d > 3`.
    pub fn quadrature(grid: BinGrid, nodes_per_axis: usize) -> Result<Self> {
        if grid.dim() > 3 {
            return Err(Error::Config(format!(
                "tensor quadrature in dimension {} is refused; enable monte_carlo evaluation",
                grid.dim()
            )));
        }
        let m = nodes_per_axis.max(1).div_ceil(grid.bins_per_axis());
        let per_bin: Vec<Vec<f64>> = map_range(grid.total_bins(), |b| {
            grid.midpoint_nodes(b, m).into_iter().flatten().collect()
        });
        let total = per_bin.iter().map(|v| v.len()).sum::<usize>() / grid.dim();
        Ok(NodeSet {
            grid,
            per_bin,
            total,
            nodes_per_axis: Some(m * grid.bins_per_axis()),
        })
    }

    /// Quadrature with the default resolution for the grid's dimension.
    pub fn default_for(grid: BinGrid) -> Result<Self> {
        match default_nodes_per_axis(grid.dim()) {
            Some(g) => NodeSet::quadrature(grid, g),
            None => NodeSet::quadrature(grid, 0),
        }
    }

    /// `samples` uniform points, grouped by the bin they land in.
    pub fn monte_carlo(grid: BinGrid, samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Config(
                "Monte-Carlo evaluation needs at least one sample".into(),
            ));
        }
        let mut rng = stream(seed, Purpose::MonteCarlo);
        let d = grid.dim();
        let mut per_bin = vec![Vec::new(); grid.total_bins()];
        let mut x = vec![0.0; d];
        for _ in 0..samples {
            for xi in &mut x {
                *xi = rng.random::<f64>();
            }
            per_bin[grid.bin_index(&x)?].extend_from_slice(&x);
        }
        Ok(NodeSet {
            grid,
            per_bin,
            total: samples,
            nodes_per_axis: None,
        })
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn total_nodes(&self) -> usize {
        self.total
    }

    /// Nodes per axis for quadrature, `None` for Monte-Carlo.
    pub fn nodes_per_axis(&self) -> Option<usize> {
        self.nodes_per_axis
    }

    pub fn is_monte_carlo(&self) -> bool {
        self.nodes_per_axis.is_none()
    }

    pub fn bin_nodes(&self, bin: usize) -> impl Iterator<Item = &[f64]> {
        self.per_bin[bin].chunks_exact(self.grid.dim())
    }

    pub fn bin_node_count(&self, bin: usize) -> usize {
        self.per_bin[bin].len() / self.grid.dim()
    }
}

/// Environment quantities tabulated on the nodes of one bin.
#[derive(Debug, Clone)]
struct BinTable {
    nodes: Vec<Vec<f64>>,
    means: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    /// `λ(x) k(x)`.
    weighted_shift: Vec<Vec<f64>>,
    /// `λ(x) c(x)`.
    weighted_offset: Vec<f64>,
}

/// Per-bin averages used by the best piecewise-constant policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BinAverages {
    pub means: Vec<f64>,
    pub lambda: f64,
    pub shift: Vec<f64>,
    pub offset: f64,
}

/// Regret of one policy and its decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub regret: f64,
    pub estimation_error: f64,
    pub approximation_error: f64,
    /// `R / (T / log² T)^{−2β/(2β+d)}`.
    pub normalized_regret: f64,
    /// Nodes per axis, or `None` for Monte-Carlo evaluation.
    pub nodes_per_axis: Option<usize>,
    /// Standard error of the regret under Monte-Carlo evaluation.
    pub standard_error: Option<f64>,
    pub empty_bins: usize,
}

/// `(T / log² T)^{−2β/(2β+d)}`.
pub fn fast_rate(horizon: u64, beta: f64, dim: usize) -> f64 {
    let t = horizon as f64;
    (t / t.ln().powi(2)).powf(-2.0 * beta / (2.0 * beta + dim as f64))
}

/// `(T / log T)^{−β/(2β+d)}`.
pub fn slow_rate(horizon: u64, beta: f64, dim: usize) -> f64 {
    let t = horizon as f64;
    (t / t.ln()).powf(-beta / (2.0 * beta + dim as f64))
}

/// Evaluates policies against one environment on a fixed node set.
#[derive(Debug, Clone)]
pub struct Evaluator {
    env: Environment,
    regularizer: Regularizer,
    nodes: NodeSet,
    tables: Vec<BinTable>,
}

impl Evaluator {
    pub fn new(env: Environment, regularizer: Regularizer, nodes: NodeSet) -> Result<Self> {
        if nodes.grid().dim() != env.dim() {
            return Err(Error::Input(
                "node set and environment dimensions differ".into(),
            ));
        }
        let k = env.num_arms();
        let reduced = regularizer.reduce();
        let tables = map_range(nodes.grid().total_bins(), |b| {
            let points: Vec<Vec<f64>> = nodes.bin_nodes(b).map(|x| x.to_vec()).collect();
            let means = points.iter().map(|x| env.mean_losses(x)).collect();
            let lambda: Vec<f64> = points.iter().map(|x| env.lambda().eval(x)).collect();
            let weighted_shift = points
                .iter()
                .zip(&lambda)
                .map(|(x, l)| {
                    reduced
                        .linear_shift(x, k)
                        .into_iter()
                        .map(|s| l * s)
                        .collect()
                })
                .collect();
            let weighted_offset = points
                .iter()
                .zip(&lambda)
                .map(|(x, l)| l * reduced.offset(x, k))
                .collect();
            BinTable {
                nodes: points,
                means,
                lambda,
                weighted_shift,
                weighted_offset,
            }
        });
        Ok(Evaluator {
            env,
            regularizer,
            nodes,
            tables,
        })
    }

    /// Evaluator on the default quadrature for `grid`.
    pub fn with_default_nodes(
        env: Environment,
        regularizer: Regularizer,
        grid: BinGrid,
    ) -> Result<Self> {
        let nodes = NodeSet::default_for(grid)?;
        Evaluator::new(env, regularizer, nodes)
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    fn weight(&self) -> f64 {
        1.0 / self.nodes.total_nodes() as f64
    }

    /// Node average of `f(bin, node)` over all nodes, bin by bin in a fixed
    /// summation order.
    fn integrate(&self, f: impl Fn(usize, usize) -> Result<f64> + Sync + Send) -> Result<f64> {
        let per_bin: Vec<Result<f64>> = map_range(self.tables.len(), |b| {
            let values: Result<Vec<f64>> =
                (0..self.tables[b].nodes.len()).map(|i| f(b, i)).collect();
            Ok(pairwise_sum(&values?))
        });
        let sums: Result<Vec<f64>> = per_bin.into_iter().collect();
        Ok(pairwise_sum(&sums?) * self.weight())
    }

    /// Integrand `⟨μ(x), p⟩ + λ(x) ρ(p, x)` at one node.
    fn pointwise_loss(&self, b: usize, i: usize, p: &SimplexPoint) -> Result<f64> {
        let table = &self.tables[b];
        let lambda = table.lambda[i];
        let reg = if lambda == 0.0 {
            0.0
        } else {
            lambda * self.regularizer.value(p, &table.nodes[i])?
        };
        Ok(dot(&table.means[i], p.as_slice()) + reg)
    }

    /// Best achievable integrand value at one node, through the conjugate.
    fn pointwise_optimum(&self, b: usize, i: usize) -> f64 {
        let table = &self.tables[b];
        let lambda = table.lambda[i];
        if lambda <= 0.0 {
            return table.means[i].iter().copied().fold(f64::INFINITY, f64::min);
        }
        let y: Vec<f64> = table.means[i].iter().map(|m| -m / lambda).collect();
        -lambda * self.regularizer.conjugate(&y, &table.nodes[i])
    }

    fn check_policy(&self, policy: &[SimplexPoint]) -> Result<()> {
        if policy.len() != self.tables.len() {
            return Err(Error::Input(format!(
                "policy has {} bins, evaluation grid has {}",
                policy.len(),
                self.tables.len()
            )));
        }
        if policy.iter().any(|p| p.len() != self.env.num_arms()) {
            return Err(Error::Input(
                "policy and environment disagree on the number of arms".into(),
            ));
        }
        Ok(())
    }

    /// `L(p)` for a policy constant on each bin of the node grid.
    pub fn piecewise_loss(&self, policy: &[SimplexPoint]) -> Result<f64> {
        self.check_policy(policy)?;
        self.integrate(|b, i| self.pointwise_loss(b, i, &policy[b]))
    }

    /// `L` in reduced form, `∫⟨μ + λk, p⟩ + λ H(p)`, which omits `∫λc`.
    pub fn piecewise_loss_reduced(&self, policy: &[SimplexPoint]) -> Result<f64> {
        self.check_policy(policy)?;
        let core = self.regularizer.reduce().core;
        self.integrate(|b, i| {
            let t = &self.tables[b];
            let p = policy[b].as_slice();
            let tilted: f64 = t.means[i]
                .iter()
                .zip(&t.weighted_shift[i])
                .zip(p)
                .map(|((m, s), q)| (m + s) * q)
                .sum();
            let reg = if t.lambda[i] == 0.0 {
                0.0
            } else {
                t.lambda[i] * core.value(p)
            };
            Ok(tilted + reg)
        })
    }

    /// `∫ λ(x) c(x) dx`.
    pub fn offset_integral(&self) -> Result<f64> {
        self.integrate(|b, i| Ok(self.tables[b].weighted_offset[i]))
    }

    /// `L(p*) = ∫ −λ ρ*(−μ/λ)` (and `∫ min_k μ_k` where `λ = 0`).
    pub fn oracle_loss(&self) -> Result<f64> {
        self.integrate(|b, i| Ok(self.pointwise_optimum(b, i)))
    }

    /// `L(p*)` computed by plugging the closed-form oracle into the integrand.
    pub fn oracle_loss_direct(&self) -> Result<f64> {
        self.integrate(|b, i| {
            let t = &self.tables[b];
            if t.lambda[i] <= 0.0 {
                return Ok(self.pointwise_optimum(b, i));
            }
            let p = oracle_pstar(&t.nodes[i], &t.means[i], t.lambda[i], &self.regularizer)?;
            self.pointwise_loss(b, i, &p)
        })
    }

    /// `μ̄(b)`, `λ̄(b)`, `avg(λk)` and `avg(λc)` over the bin's nodes.
    pub fn bin_averages(&self, bin: usize) -> BinAverages {
        let t = &self.tables[bin];
        let n = t.nodes.len().max(1) as f64;
        let k = self.env.num_arms();
        let column = |rows: &Vec<Vec<f64>>, j: usize| rows.iter().map(|r| r[j]).sum::<f64>() / n;
        BinAverages {
            means: (0..k).map(|j| column(&t.means, j)).collect(),
            lambda: t.lambda.iter().sum::<f64>() / n,
            shift: (0..k).map(|j| column(&t.weighted_shift, j)).collect(),
            offset: t.weighted_offset.iter().sum::<f64>() / n,
        }
    }

    /// `p̃*`: per-bin minimiser of the bin-averaged objective.
    pub fn best_piecewise_policy(&self) -> Vec<SimplexPoint> {
        let core = self.regularizer.reduce().core;
        (0..self.tables.len())
            .map(|b| {
                if self.tables[b].nodes.is_empty() {
                    return SimplexPoint::uniform(self.env.num_arms());
                }
                let avg = self.bin_averages(b);
                BinObjective {
                    shift: avg.shift,
                    lambda_bar: avg.lambda,
                    core,
                }
                .optimum(&avg.means)
            })
            .collect()
    }

    /// `A = L(p̃*) − L(p*)`.
    pub fn approximation_error(&self) -> Result<f64> {
        Ok(self.piecewise_loss(&self.best_piecewise_policy())? - self.oracle_loss()?)
    }

    /// `A` through conjugates only:
    /// `Σ_b ∫_b λρ*(−μ/λ) − |b| (λ̄ H*(−(μ̄ + avg λk)/λ̄) − avg λc)`.
    pub fn approximation_error_conjugate(&self) -> Result<f64> {
        let core = self.regularizer.reduce().core;
        let per_bin: Vec<f64> = (0..self.tables.len())
            .map(|b| {
                let n = self.tables[b].nodes.len();
                if n == 0 {
                    return 0.0;
                }
                let pointwise: Vec<f64> = (0..n).map(|i| -self.pointwise_optimum(b, i)).collect();
                let avg = self.bin_averages(b);
                let tilted: Vec<f64> = avg
                    .means
                    .iter()
                    .zip(&avg.shift)
                    .map(|(m, s)| m + s)
                    .collect();
                let bin_value = if avg.lambda > 0.0 {
                    let y: Vec<f64> = tilted.iter().map(|v| -v / avg.lambda).collect();
                    avg.lambda * core.conjugate(&y) - avg.offset
                } else {
                    -tilted.iter().copied().fold(f64::INFINITY, f64::min)
                };
                pairwise_sum(&pointwise) - n as f64 * bin_value
            })
            .collect();
        Ok(pairwise_sum(&per_bin) * self.weight())
    }

    /// Regret of a learned policy and its decomposition.
    pub fn regret(&self, result: &PolicyResult, horizon: u64) -> Result<RegretReport> {
        if result.grid != *self.nodes.grid() {
            return Err(Error::Input(
                "policy grid differs from the evaluation grid".into(),
            ));
        }
        let policy = result.proportions();
        let mut report = self.regret_of(&policy, horizon)?;
        report.empty_bins = result.empty_bin_count();
        Ok(report)
    }

    /// Regret of an arbitrary piecewise-constant policy on the node grid.
    pub fn regret_of(&self, policy: &[SimplexPoint], horizon: u64) -> Result<RegretReport> {
        let learned = self.piecewise_loss(policy)?;
        let best_piecewise = self.piecewise_loss(&self.best_piecewise_policy())?;
        let optimum = self.oracle_loss()?;
        let regret = learned - optimum;
        let standard_error = if self.nodes.is_monte_carlo() {
            let mut diffs = Vec::with_capacity(self.nodes.total_nodes());
            for (b, t) in self.tables.iter().enumerate() {
                for i in 0..t.nodes.len() {
                    diffs.push(
                        self.pointwise_loss(b, i, &policy[b])? - self.pointwise_optimum(b, i),
                    );
                }
            }
            Some(stats::standard_error(&diffs))
        } else {
            None
        };
        Ok(RegretReport {
            regret,
            estimation_error: learned - best_piecewise,
            approximation_error: best_piecewise - optimum,
            normalized_regret: regret / fast_rate(horizon, self.env.beta(), self.env.dim()),
            nodes_per_axis: self.nodes.nodes_per_axis(),
            standard_error,
            empty_bins: 0,
        })
    }
}

/// Tail probabilities of `λ` and `η` on a threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginProbe {
    pub deltas: Vec<f64>,
    pub lambda_tail: Vec<f64>,
    pub eta_tail: Vec<f64>,
    /// Log-log slope over thresholds whose estimate lies in `[1e-3, 1e-1]`.
    pub lambda_exponent: Option<f64>,
    pub eta_exponent: Option<f64>,
    pub samples: usize,
}

/// Minimum Monte-Carlo sample count for [`margin_probe`].
pub const MIN_PROBE_SAMPLES: usize = 10_000;

/// Monte-Carlo estimates of `P(λ(X) < δ)` and `P(η(X) < δ)` for `X` uniform.
pub fn margin_probe(
    env: &Environment,
    regularizer: &Regularizer,
    deltas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MarginProbe> {
    if samples < MIN_PROBE_SAMPLES {
        return Err(Error::validation(
            "probe.samples",
            format!("must be at least {MIN_PROBE_SAMPLES}"),
        ));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::validation(
            "probe.deltas",
            "thresholds must be positive and finite",
        ));
    }
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut rng = stream(seed, Purpose::Probe);
    let mut lambdas = Vec::with_capacity(samples);
    let mut etas = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = env.sample_context(&mut rng);
        lambdas.push(env.lambda().eval(&x));
        etas.push(eta_at(env, regularizer, &x)?);
    }
    lambdas.sort_by(f64::total_cmp);
    etas.sort_by(f64::total_cmp);
    let tail = |sorted_values: &[f64]| -> Vec<f64> {
        sorted
            .iter()
            .map(|d| sorted_values.partition_point(|v| v < d) as f64 / samples as f64)
            .collect()
    };
    let lambda_tail = tail(&lambdas);
    let eta_tail = tail(&etas);
    Ok(MarginProbe {
        lambda_exponent: tail_exponent(&sorted, &lambda_tail),
        eta_exponent: tail_exponent(&sorted, &eta_tail),
        deltas: sorted,
        lambda_tail,
        eta_tail,
        samples,
    })
}

fn tail_exponent(deltas: &[f64], probabilities: &[f64]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = deltas
        .iter()
        .zip(probabilities)
        .filter(|(_, &p)| (1e-3..=1e-1).contains(&p))
        .map(|(d, p)| (d.ln(), p.ln()))
        .unzip();
    stats::ols_slope(&x, &y).ok().map(|(slope, _)| slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{ArmSpec, EnvironmentSpec, LambdaFunction, NoiseFamily};
    use approx::assert_abs_diff_eq;

    fn constant_env(means: &[f64], lambda: LambdaFunction) -> Environment {
        let spec = EnvironmentSpec {
            dim: 1,
            holder_constant: 1.0,
            clamp: [0.01, 0.99],
            arms: means
                .iter()
                .map(|&m| ArmSpec {
                    family: NoiseFamily::Bernoulli,
                    offset: m,
                    slope: 0.0,
                    anchor: vec![0.5],
                })
                .collect(),
        };
        spec.build(0.5, lambda).unwrap()
    }

    #[allow(clippy::type_complexity)]
    fn entropy_objective(
        mu: Vec<f64>,
        lambda: f64,
    ) -> (impl Fn(&[f64]) -> f64, impl Fn(&[f64]) -> Vec<f64>) {
        let m2 = mu.clone();
        (
            move |p: &[f64]| {
                dot(&mu, p) + lambda * crate::regularizer::CoreRegularizer::Entropy.value(p)
            },
            move |p: &[f64]| {
                m2.iter()
                    .zip(p)
                    .map(|(m, q)| m + lambda * (1.0 + q.ln()))
                    .collect()
            },
        )
    }

    #[test]
    fn minimize_linear_goes_to_vertex() {
        let mu = [0.2, 0.8];
        let p = simplex_minimize(2, |p| dot(&mu, p), |_| mu.to_vec()).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn minimize_matches_softmax() {
        let (f, g) = entropy_objective(vec![0.0, 1.0], 1.0);
        let p = simplex_minimize(2, f, g).unwrap();
        assert_abs_diff_eq!(p[0], 0.7311, epsilon = 1e-4);
        assert_abs_diff_eq!(p[0], 1.0 / (1.0 + (-1f64).exp()), epsilon = 1e-6);
    }

    #[test]
    fn minimize_rejects_non_finite_objective() {
        assert!(simplex_minimize(2, |_| f64::NAN, |_| vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn minimize_beats_a_fine_grid() {
        // ℓ2 objective with a boundary optimum on K = 3.
        let mu = [0.0, 0.4, 0.9];
        let q = [1.0 / 3.0; 3];
        let lambda = 0.3;
        let f = |p: &[f64]| dot(&mu, p) + lambda * crate::simplex::sq_dist(p, &q);
        let g = |p: &[f64]| {
            mu.iter()
                .zip(p)
                .zip(&q)
                .map(|((m, pi), qi)| m + 2.0 * lambda * (pi - qi))
                .collect()
        };
        let p = simplex_minimize(3, f, g).unwrap();
        let best = f(p.as_slice());
        let n = 140; // about 10⁴ grid points
        for i in 0..=n {
            for j in 0..=(n - i) {
                let point = [
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    (n - i - j) as f64 / n as f64,
                ];
                assert!(best <= f(&point) + 1e-8);
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let p = oracle_pstar(&[0.3], &[0.5, 0.5, 0.5], 0.7, &Regularizer::Entropy).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(p[i], 1.0 / 3.0, epsilon = 1e-15);
        }
        let p = oracle_pstar(&[0.3], &[0.0, 1.0], 1.0, &Regularizer::Entropy).unwrap();
        assert_abs_diff_eq!(p[0], 0.7311, epsilon = 1e-4);
        assert!(matches!(
            oracle_pstar(&[0.3], &[0.0, 1.0], 0.0, &Regularizer::Entropy),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn eta_examples() {
        assert_abs_diff_eq!(
            eta(&SimplexPoint::uniform(2)).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            eta(&SimplexPoint::uniform(3)).unwrap(),
            0.4082,
            epsilon = 1e-4
        );
        assert!(eta(&SimplexPoint::uniform(1)).is_err());
        let near = SimplexPoint::new(vec![0.999, 0.0005, 0.0005]).unwrap();
        assert!(eta(&near).unwrap() < 1e-3);
    }

    #[test]
    fn eta_is_distance_to_boundary() {
        // K = 2: the boundary of the segment is its endpoints.
        let p = SimplexPoint::new(vec![0.3, 0.7]).unwrap();
        let to_vertex = crate::simplex::sq_dist(p.as_slice(), &[0.0, 1.0]).sqrt();
        assert_abs_diff_eq!(eta(&p).unwrap(), to_vertex, epsilon = 1e-12);
        // K = 3: distance to the edge p_0 = 0 inside the plane Σp = 1.
        let p = SimplexPoint::new(vec![0.2, 0.5, 0.3]).unwrap();
        let foot = [0.0, 0.5 + 0.1, 0.3 + 0.1];
        let d = crate::simplex::sq_dist(p.as_slice(), &foot).sqrt();
        assert_abs_diff_eq!(eta(&p).unwrap(), d, epsilon = 1e-12);
    }

    #[test]
    fn loss_functional_examples() {
        let env = constant_env(&[0.5], LambdaFunction::Constant(0.3));
        let grid = BinGrid::new(4, 1).unwrap();
        let ev = Evaluator::with_default_nodes(env, Regularizer::Entropy, grid).unwrap();
        let policy = vec![SimplexPoint::uniform(1); 4];
        assert_abs_diff_eq!(ev.piecewise_loss(&policy).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            ev.regret_of(&policy, 1000).unwrap().regret,
            0.0,
            epsilon = 1e-10
        );

        let means = [0.2, 0.5, 0.6];
        let env = constant_env(&means, LambdaFunction::Constant(0.1));
        let ev = Evaluator::with_default_nodes(env, Regularizer::Entropy, grid).unwrap();
        let policy = vec![SimplexPoint::uniform(3); 4];
        let expected = means.iter().sum::<f64>() / 3.0 - 0.1 * 3f64.ln();
        assert_abs_diff_eq!(
            ev.piecewise_loss(&policy).unwrap(),
            expected,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(ev.approximation_error().unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn oracle_loss_two_ways() {
        let env = EnvironmentSpec::default()
            .build(
                0.7,
                LambdaFunction::CosField {
                    amplitude: 0.2,
                    offset: 0.5,
                },
            )
            .unwrap();
        for reg in ["entropy", "kl:cosine:0.4", "l2:uniform"] {
            let reg: Regularizer = reg.parse().unwrap();
            let ev = Evaluator::with_default_nodes(env.clone(), reg, BinGrid::new(8, 1).unwrap())
                .unwrap();
            assert_abs_diff_eq!(
                ev.oracle_loss().unwrap(),
                ev.oracle_loss_direct().unwrap(),
                epsilon = 1e-8
            );
            let a = ev.approximation_error().unwrap();
            assert!(a >= -1e-10);
            assert_abs_diff_eq!(
                a,
                ev.approximation_error_conjugate().unwrap(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn monte_carlo_refusal_and_fallback() {
        let grid = BinGrid::new(2, 4).unwrap();
        assert!(matches!(NodeSet::default_for(grid), Err(Error::Config(_))));
        let nodes = NodeSet::monte_carlo(grid, 20_000, 3).unwrap();
        assert_eq!(nodes.total_nodes(), 20_000);
        let spec = EnvironmentSpec {
            dim: 4,
            ..EnvironmentSpec::default()
        };
        let env = spec.build(0.5, LambdaFunction::Constant(0.2)).unwrap();
        let ev = Evaluator::new(env, Regularizer::Entropy, nodes).unwrap();
        let report = ev
            .regret_of(&vec![SimplexPoint::uniform(3); 16], 10_000)
            .unwrap();
        assert!(report.standard_error.unwrap() > 0.0);
        assert!(report.regret > 0.0);
    }

    #[test]
    fn margin_probe_examples() {
        let env = constant_env(&[0.2, 0.6], LambdaFunction::Constant(0.1));
        let probe =
            margin_probe(&env, &Regularizer::Entropy, &[0.01, 0.05, 0.09], 10_000, 1).unwrap();
        assert!(probe.lambda_tail.iter().all(|&p| p == 0.0));

        let env = constant_env(
            &[0.2, 0.6],
            LambdaFunction::Ramp {
                slope: 1.0,
                offset: 0.0,
            },
        );
        let deltas: Vec<f64> = (0..20)
            .map(|i| 10f64.powf(-3.0 + i as f64 * 0.15))
            .collect();
        let probe = margin_probe(&env, &Regularizer::Entropy, &deltas, 200_000, 2).unwrap();
        assert!(
            (probe.lambda_exponent.unwrap() - 1.0).abs() <= 0.1,
            "{:?}",
            probe.lambda_exponent
        );
        for w in probe
            .lambda_tail
            .windows(2)
            .chain(probe.eta_tail.windows(2))
        {
            assert!(w[0] <= w[1]);
        }
        assert!(margin_probe(&env, &Regularizer::Entropy, &deltas, 10, 2).is_err());
    }
}
