//! Per-bin Upper-Confidence Frank-Wolfe learner.
//!
//! Each bin minimises `L_b(p) = ⟨μ̄(b) + s(b), p⟩ + λ̄(b) H(p)` from bandit
//! feedback, where `s(b)` is the known linear shift of a reduced regularizer
//! (zero for entropy). Every step pulls the arm minimising a lower-confidence
//! estimate of the gradient, so the Frank-Wolfe iterate with step `1/(t+1)` is
//! exactly the vector of pull frequencies.
//!
//! Presampling is realised as a fixed mixture: the learner optimises
//! `q ↦ L_b(α p° + (1 − α) q)` and reports `p = α p° + (1 − α) q`, which keeps
//! every component above `α p°_i` for the whole run. The presample draws
//! themselves only seed the mean estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Regime;
use crate::regularizer::CoreRegularizer;
use crate::simplex::SimplexPoint;

/// Knobs of the intermediate-regime schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarginSettings {
    /// Margin parameter `α` of the tail condition.
    pub alpha: f64,
    /// Exponent of `γ_j = C_γ (j / B^d)^e`; defaults to `1 / (6α)`.
    pub exponent: Option<f64>,
    /// `C_γ`.
    pub constant: f64,
    /// `C_I` in the ill-behaved bin count `ĵ = C_I B^d B^{-αβ}`.
    pub ill_behaved_constant: f64,
}

impl Default for MarginSettings {
    fn default() -> Self {
        MarginSettings {
            alpha: 0.5,
            exponent: None,
            constant: 0.1,
            ill_behaved_constant: 1.0,
        }
    }
}

impl MarginSettings {
    pub fn exponent(&self) -> f64 {
        self.exponent.unwrap_or(1.0 / (6.0 * self.alpha))
    }
}

/// Learner-side settings shared by all bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSettings {
    /// `c` in the confidence radius `sqrt(c log t / n_k)`.
    pub confidence_constant: f64,
    /// Mixture weight used when a schedule asks for `α >= 1/2`.
    pub presample_cap: f64,
    pub margin: MarginSettings,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        LearnerSettings {
            confidence_constant: 2.0,
            presample_cap: 0.49,
            margin: MarginSettings::default(),
        }
    }
}

/// Presampling as a mixture `α p°` plus the literal per-arm draw counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresampleSchedule {
    pub mixture_weight: f64,
    pub base_point: SimplexPoint,
    pub per_arm_counts: Vec<u64>,
}

impl PresampleSchedule {
    pub fn empty(arms: usize) -> Self {
        PresampleSchedule {
            mixture_weight: 0.0,
            base_point: SimplexPoint::uniform(arms),
            per_arm_counts: vec![0; arms],
        }
    }

    fn uniform(arms: usize, alpha: f64, per_arm: u64) -> Self {
        PresampleSchedule {
            mixture_weight: alpha,
            base_point: SimplexPoint::uniform(arms),
            per_arm_counts: vec![per_arm; arms],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mixture_weight == 0.0 && self.per_arm_counts.iter().all(|&c| c == 0)
    }

    pub fn total_count(&self) -> u64 {
        self.per_arm_counts.iter().sum()
    }
}

/// Everything a bin's schedule depends on.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleInput {
    pub regime: Regime,
    pub core: CoreRegularizer,
    pub lambda_bar: f64,
    /// Expected contexts in the bin, `T / B^d`.
    pub occupancy: f64,
    pub arms: usize,
    /// 1-based rank of the bin when bins are sorted by `λ̄` ascending.
    pub rank: usize,
    pub bins_per_axis: usize,
    pub dim: usize,
    pub beta: f64,
    pub margin: MarginSettings,
}

fn slow_rule(input: &ScheduleInput) -> PresampleSchedule {
    let per_arm = (input.lambda_bar * input.occupancy.sqrt()).ceil();
    let alpha = input.arms as f64 * per_arm / input.occupancy;
    PresampleSchedule::uniform(input.arms, alpha, per_arm as u64)
}

/// Builds the presampling schedule of one bin.
///
/// Fails with [`Error::PresampleTooLarge`] when the rule asks for a mixture
/// weight of one half or more; see [`presample_schedule_capped`].
pub fn make_presample_schedule(input: &ScheduleInput) -> Result<PresampleSchedule> {
    if input.occupancy < 1.0 {
        return Err(Error::Config(format!(
            "expected bin occupancy {} is below 1",
            input.occupancy
        )));
    }
    let k = input.arms;
    if input.core == CoreRegularizer::SquaredNorm || input.lambda_bar <= 0.0 || k < 2 {
        return Ok(PresampleSchedule::empty(k));
    }
    let schedule = match input.regime {
        Regime::Fast => {
            let alpha = (-1.0 / input.lambda_bar).exp();
            let per_arm = (input.occupancy * alpha / k as f64).ceil() as u64;
            PresampleSchedule::uniform(k, alpha, per_arm)
        }
        Regime::Slow => slow_rule(input),
        Regime::Intermediate => {
            let total_bins = (input.bins_per_axis as f64).powi(input.dim as i32);
            let ill_behaved = input.margin.ill_behaved_constant
                * total_bins
                * (input.bins_per_axis as f64).powf(-input.margin.alpha * input.beta);
            if (input.rank as f64) <= ill_behaved.floor() {
                slow_rule(input)
            } else {
                let gamma = input.margin.constant
                    * (input.rank as f64 / total_bins).powf(input.margin.exponent());
                let per_arm = (input.occupancy * gamma / 2.0).ceil() as u64;
                PresampleSchedule::uniform(k, k as f64 * gamma / 2.0, per_arm)
            }
        }
    };
    if schedule.mixture_weight >= 0.5 {
        return Err(Error::PresampleTooLarge {
            alpha: schedule.mixture_weight,
        });
    }
    Ok(schedule)
}

/// Like [`make_presample_schedule`], but replaces an oversized mixture weight
/// by `cap`. The flag reports whether capping happened.
pub fn presample_schedule_capped(
    input: &ScheduleInput,
    cap: f64,
) -> Result<(PresampleSchedule, bool)> {
    match make_presample_schedule(input) {
        Ok(s) => Ok((s, false)),
        Err(Error::PresampleTooLarge { alpha }) => {
            log::warn!(
                "presampling weight {alpha:.4} capped at {cap} (lambda_bar = {})",
                input.lambda_bar
            );
            let per_arm = (input.occupancy * cap / input.arms as f64).ceil() as u64;
            Ok((PresampleSchedule::uniform(input.arms, cap, per_arm), true))
        }
        Err(e) => Err(e),
    }
}

/// The per-bin objective `⟨m + shift, p⟩ + λ̄ H(p)` as known to the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct BinObjective {
    pub shift: Vec<f64>,
    pub lambda_bar: f64,
    pub core: CoreRegularizer,
}

impl BinObjective {
    pub fn plain(arms: usize, lambda_bar: f64, core: CoreRegularizer) -> Self {
        BinObjective {
            shift: vec![0.0; arms],
            lambda_bar,
            core,
        }
    }

    pub fn value(&self, means: &[f64], p: &[f64]) -> f64 {
        let linear: f64 = means
            .iter()
            .zip(&self.shift)
            .zip(p)
            .map(|((m, s), q)| (m + s) * q)
            .sum();
        let reg = if self.lambda_bar == 0.0 {
            0.0
        } else {
            self.lambda_bar * self.core.value(p)
        };
        linear + reg
    }

    /// Closed-form minimiser for known means (lowest-index vertex when λ̄ = 0).
    pub fn optimum(&self, means: &[f64]) -> SimplexPoint {
        let tilted: Vec<f64> = means.iter().zip(&self.shift).map(|(m, s)| m + s).collect();
        if self.lambda_bar <= 0.0 {
            let best = argmin(&tilted);
            return SimplexPoint::vertex(tilted.len(), best);
        }
        let y: Vec<f64> = tilted.iter().map(|v| -v / self.lambda_bar).collect();
        self.core.conjugate_grad(&y)
    }
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Learner state of one bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UcfwState {
    schedule: PresampleSchedule,
    /// Post-presample pulls `N_k`; they sum to `step`.
    pulls: Vec<u64>,
    presample_pulls: Vec<u64>,
    loss_sums: Vec<f64>,
    step: u64,
}

impl UcfwState {
    pub fn new(schedule: PresampleSchedule) -> Self {
        let k = schedule.base_point.len();
        UcfwState {
            schedule,
            pulls: vec![0; k],
            presample_pulls: vec![0; k],
            loss_sums: vec![0.0; k],
            step: 0,
        }
    }

    pub fn arms(&self) -> usize {
        self.pulls.len()
    }

    pub fn schedule(&self) -> &PresampleSchedule {
        &self.schedule
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    pub fn presample_pulls(&self) -> &[u64] {
        &self.presample_pulls
    }

    /// Observations of an arm, presample draws included.
    pub fn observations(&self, arm: usize) -> u64 {
        self.pulls[arm] + self.presample_pulls[arm]
    }

    pub fn empirical_mean(&self, arm: usize) -> f64 {
        let n = self.observations(arm);
        if n == 0 {
            0.0
        } else {
            self.loss_sums[arm] / n as f64
        }
    }

    pub fn empirical_means(&self) -> Vec<f64> {
        (0..self.arms()).map(|k| self.empirical_mean(k)).collect()
    }

    /// Records one presampling draw.
    pub fn record_presample(&mut self, arm: usize, loss: f64) -> Result<()> {
        check_loss(loss)?;
        self.presample_pulls[arm] += 1;
        self.loss_sums[arm] += loss;
        Ok(())
    }

    /// `q_t`, the pull frequencies since presampling (the base point before
    /// the first step).
    pub fn inner_proportion(&self) -> SimplexPoint {
        if self.step == 0 {
            return self.schedule.base_point.clone();
        }
        let t = self.step as f64;
        SimplexPoint::from_normalized(self.pulls.iter().map(|&n| n as f64 / t).collect())
    }

    /// `p_t = α p° + (1 − α) q_t`.
    pub fn effective_proportion(&self) -> SimplexPoint {
        SimplexPoint::mixture(
            self.schedule.mixture_weight,
            &self.schedule.base_point,
            &self.inner_proportion(),
        )
    }

    fn lcb_at(&self, objective: &BinObjective, confidence: f64, p: &[f64], arm: usize) -> f64 {
        let n = self.observations(arm);
        if n == 0 {
            return f64::NEG_INFINITY;
        }
        let t = (self.step.max(1)) as f64;
        let radius = (confidence * t.ln() / n as f64).sqrt();
        let reg = if objective.lambda_bar == 0.0 {
            0.0
        } else {
            objective.lambda_bar * objective.core.grad_component(p, arm)
        };
        (1.0 - self.schedule.mixture_weight)
            * (self.empirical_mean(arm) - radius + objective.shift[arm] + reg)
    }

    /// Lower-confidence estimate of `∂/∂q_k L_b(α p° + (1 − α) q_t)`; arms
    /// never observed return `-inf` so they are pulled first.
    pub fn lcb_gradient(&self, objective: &BinObjective, confidence: f64, arm: usize) -> f64 {
        let p = self.effective_proportion();
        self.lcb_at(objective, confidence, p.as_slice(), arm)
    }

    /// The arm the next step would pull (ties go to the lowest index).
    pub fn select_arm(&self, objective: &BinObjective, confidence: f64) -> usize {
        let p = self.effective_proportion();
        let scores: Vec<f64> = (0..self.arms())
            .map(|k| self.lcb_at(objective, confidence, p.as_slice(), k))
            .collect();
        argmin(&scores)
    }

    /// One Frank-Wolfe step: pick the arm, observe its loss, update the state.
    pub fn step(
        &mut self,
        objective: &BinObjective,
        confidence: f64,
        mut sample_loss: impl FnMut(usize) -> f64,
    ) -> Result<usize> {
        let arm = self.select_arm(objective, confidence);
        let loss = sample_loss(arm);
        check_loss(loss)?;
        self.pulls[arm] += 1;
        self.loss_sums[arm] += loss;
        self.step += 1;
        Ok(arm)
    }

    /// `p_T(b)`, plus whether the bin never saw a context nor a presample.
    pub fn final_proportion(&self) -> (SimplexPoint, bool) {
        if self.step == 0 && self.schedule.is_empty() {
            return (SimplexPoint::uniform(self.arms()), true);
        }
        (self.effective_proportion(), false)
    }

    /// `L_b` at the current effective proportion for known means.
    pub fn objective_gap(&self, objective: &BinObjective, means: &[f64]) -> f64 {
        let p = self.effective_proportion();
        let best = objective.optimum(means);
        objective.value(means, p.as_slice()) - objective.value(means, best.as_slice())
    }
}

fn check_loss(loss: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&loss) {
        return Err(Error::Data(format!("loss {loss} outside [0,1]")));
    }
    Ok(())
}
