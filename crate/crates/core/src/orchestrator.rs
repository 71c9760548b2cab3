//! One full run: grid construction, presampling, the `T`-step context loop,
//! and the resulting piecewise-constant policy.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::environment::{Environment, EnvironmentSpec, LambdaFunction};
use crate::error::{Error, Result};
use crate::partition::{
    bin_average_lambda, bin_average_vector, select_bin_count, BinGrid, Regime, DEFAULT_QUAD_NODES,
};
use crate::regularizer::Regularizer;
use crate::rng::{stream, Purpose};
use crate::simplex::SimplexPoint;
use crate::ucfw::{
    presample_schedule_capped, BinObjective, LearnerSettings, ScheduleInput, UcfwState,
};

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub horizon: u64,
    pub beta: f64,
    pub regime: Regime,
    pub regularizer: Regularizer,
    pub lambda: LambdaFunction,
    pub environment: EnvironmentSpec,
    pub seed: u64,
    pub learner: LearnerSettings,
    /// Explicit bins per axis; `None` uses the regime's rule.
    pub bins: Option<usize>,
    pub theta_constant: f64,
    /// Midpoint nodes per axis for the learner's `λ̄` and shift averages.
    pub quad_nodes: usize,
    /// Keep every context in the result (for audits and tests).
    pub record_contexts: bool,
}

impl RunConfig {
    pub fn new(horizon: u64, beta: f64) -> Self {
        RunConfig {
            horizon,
            beta,
            regime: Regime::Fast,
            regularizer: Regularizer::Entropy,
            lambda: LambdaFunction::Constant(0.1),
            environment: EnvironmentSpec::default(),
            seed: 0,
            learner: LearnerSettings::default(),
            bins: None,
            theta_constant: 1.0,
            quad_nodes: DEFAULT_QUAD_NODES,
            record_contexts: false,
        }
    }

    pub fn environment(&self) -> Result<Environment> {
        self.environment.build(self.beta, self.lambda)
    }

    pub fn bins_per_axis(&self) -> usize {
        self.bins.unwrap_or_else(|| {
            select_bin_count(
                self.horizon,
                self.beta,
                self.environment.dim,
                self.regime,
                self.theta_constant,
            )
        })
    }

    /// Builds the environment and grid, enforcing `T >= K B^d`.
    pub fn validate(&self) -> Result<(Environment, BinGrid)> {
        if self.horizon < 3 {
            return Err(Error::validation(
                "T",
                format!("horizon {} must be at least 3", self.horizon),
            ));
        }
        if !(self.theta_constant.is_finite() && self.theta_constant > 0.0) {
            return Err(Error::validation(
                "learner.theta_constant",
                "must be positive",
            ));
        }
        if !(self.learner.presample_cap > 0.0 && self.learner.presample_cap < 0.5) {
            return Err(Error::validation(
                "learner.presample_cap",
                "must be in (0, 0.5)",
            ));
        }
        if !(self.learner.confidence_constant >= 0.0
            && self.learner.confidence_constant.is_finite())
        {
            return Err(Error::validation(
                "learner.confidence_constant",
                "must be nonnegative",
            ));
        }
        let env = self.environment()?;
        let grid = BinGrid::new(self.bins_per_axis(), env.dim())?;
        let needed = env.num_arms() as u64 * grid.total_bins() as u64;
        if self.horizon < needed {
            return Err(Error::Sizing(format!(
                "T = {} cannot afford one pull per arm in {} bins with {} arms",
                self.horizon,
                grid.total_bins(),
                env.num_arms()
            )));
        }
        Ok((env, grid))
    }
}

/// What one bin ended with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinRecord {
    pub bin: usize,
    /// Contexts routed to the bin, `T_b`.
    pub contexts: u64,
    pub pulls: Vec<u64>,
    pub presample_pulls: Vec<u64>,
    pub empirical_means: Vec<f64>,
    pub lambda_bar: f64,
    pub mixture_weight: f64,
    pub proportion: SimplexPoint,
    /// No context landed in the bin; its proportion is the uniform point.
    pub empty: bool,
    pub capped: bool,
}

/// The learned piecewise-constant policy plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResult {
    pub grid: BinGrid,
    pub bins: Vec<BinRecord>,
    pub steps: u64,
    pub presample_pulls: u64,
    pub elapsed: Duration,
    pub contexts: Option<Vec<Vec<f64>>>,
}

impl PolicyResult {
    pub fn proportions(&self) -> Vec<SimplexPoint> {
        self.bins.iter().map(|b| b.proportion.clone()).collect()
    }

    pub fn policy_at(&self, x: &[f64]) -> Result<&SimplexPoint> {
        Ok(&self.bins[self.grid.bin_index(x)?].proportion)
    }

    pub fn empty_bin_count(&self) -> usize {
        self.bins.iter().filter(|b| b.empty).count()
    }

    pub fn capped_bin_count(&self) -> usize {
        self.bins.iter().filter(|b| b.capped).count()
    }

    pub fn total_pulls(&self) -> u64 {
        self.bins
            .iter()
            .map(|b| b.pulls.iter().chain(&b.presample_pulls).sum::<u64>())
            .sum()
    }

    /// One JSON object per bin.
    pub fn write_run_log(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for record in &self.bins {
            let line =
                serde_json::to_string(record).map_err(|e| Error::Numerical(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Per-bin objectives and presampling schedules, fixed before any context arrives.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub environment: Environment,
    pub grid: BinGrid,
    pub objectives: Vec<BinObjective>,
    pub states: Vec<UcfwState>,
    pub capped: Vec<bool>,
}

pub fn plan_run(config: &RunConfig) -> Result<RunPlan> {
    let (env, grid) = config.validate()?;
    let k = env.num_arms();
    let reduced = config.regularizer.reduce();
    let nodes = config.quad_nodes.max(1);
    let lambda = env.lambda();
    let total = grid.total_bins();

    let objectives: Vec<BinObjective> = (0..total)
        .map(|b| {
            let lambda_bar = bin_average_lambda(&grid, b, lambda, nodes);
            let shift = if config.regularizer == Regularizer::Entropy {
                vec![0.0; k]
            } else {
                bin_average_vector(&grid, b, nodes, k, |x| {
                    let l = lambda.eval(x);
                    reduced
                        .linear_shift(x, k)
                        .into_iter()
                        .map(|s| l * s)
                        .collect()
                })
            };
            BinObjective {
                shift,
                lambda_bar,
                core: reduced.core,
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        objectives[a]
            .lambda_bar
            .total_cmp(&objectives[b].lambda_bar)
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; total];
    for (position, &bin) in order.iter().enumerate() {
        rank[bin] = position + 1;
    }

    let occupancy = config.horizon as f64 / total as f64;
    let mut states = Vec::with_capacity(total);
    let mut capped = Vec::with_capacity(total);
    for b in 0..total {
        let input = ScheduleInput {
            regime: config.regime,
            core: reduced.core,
            lambda_bar: objectives[b].lambda_bar,
            occupancy,
            arms: k,
            rank: rank[b],
            bins_per_axis: grid.bins_per_axis(),
            dim: grid.dim(),
            beta: config.beta,
            margin: config.learner.margin,
        };
        let (schedule, was_capped) =
            presample_schedule_capped(&input, config.learner.presample_cap)?;
        states.push(UcfwState::new(schedule));
        capped.push(was_capped);
    }
    Ok(RunPlan {
        environment: env,
        grid,
        objectives,
        states,
        capped,
    })
}

/// Draws every bin's presample losses at the bin center.
pub fn apply_presampling(plan: &mut RunPlan, seed: u64) -> Result<u64> {
    let mut rng = stream(seed, Purpose::Presample);
    let mut total = 0;
    for (b, state) in plan.states.iter_mut().enumerate() {
        let center = plan.grid.center(b);
        let counts = state.schedule().per_arm_counts.clone();
        for (arm, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                let loss = plan.environment.sample_loss(arm, &center, &mut rng);
                state.record_presample(arm, loss)?;
            }
            total += n;
        }
    }
    Ok(total)
}

/// Runs the learner for `T` contexts and returns the final policy.
pub fn run_algorithm(config: &RunConfig) -> Result<PolicyResult> {
    run_with_observer(config, |_, _| {})
}

/// Like [`run_algorithm`], calling `observe(bin, state)` after every step.
pub fn run_with_observer(
    config: &RunConfig,
    mut observe: impl FnMut(usize, &UcfwState),
) -> Result<PolicyResult> {
    let started = Instant::now();
    let mut plan = plan_run(config)?;
    let presample_pulls = apply_presampling(&mut plan, config.seed)?;
    let RunPlan {
        environment: env,
        grid,
        objectives,
        mut states,
        capped,
    } = plan;

    let mut context_rng = stream(config.seed, Purpose::Context);
    let mut loss_rng = stream(config.seed, Purpose::Loss);
    let mut routed = vec![0u64; grid.total_bins()];
    let mut log = config
        .record_contexts
        .then(|| Vec::with_capacity(config.horizon as usize));
    let confidence = config.learner.confidence_constant;

    for _ in 0..config.horizon {
        let x = env.sample_context(&mut context_rng);
        let b = grid.bin_index(&x)?;
        routed[b] += 1;
        states[b].step(&objectives[b], confidence, |arm| {
            env.sample_loss(arm, &x, &mut loss_rng)
        })?;
        observe(b, &states[b]);
        if let Some(log) = log.as_mut() {
            log.push(x);
        }
    }

    let bins = states
        .iter()
        .enumerate()
        .map(|(b, state)| {
            let (proportion, _) = state.final_proportion();
            BinRecord {
                bin: b,
                contexts: routed[b],
                pulls: state.pulls().to_vec(),
                presample_pulls: state.presample_pulls().to_vec(),
                empirical_means: state.empirical_means(),
                lambda_bar: objectives[b].lambda_bar,
                mixture_weight: state.schedule().mixture_weight,
                proportion,
                empty: routed[b] == 0,
                capped: capped[b],
            }
        })
        .collect();
    let empty = states.iter().filter(|s| s.step_count() == 0).count();
    if empty > 0 {
        log::debug!("{empty} of {} bins received no context", grid.total_bins());
    }
    Ok(PolicyResult {
        grid,
        bins,
        steps: config.horizon,
        presample_pulls,
        elapsed: started.elapsed(),
        contexts: log,
    })
}
