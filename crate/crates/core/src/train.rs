//! Training loops for the four compared update rules.
//!
//! Every step draws one input (round-robin), samples `k` prompts, rolls out
//! `k_hat` outputs per prompt and then either
//!
//! - reduces each prompt's outputs to one scalar reward (Average, Product,
//!   HVI) and takes an Adam step on the soft-Q loss, or
//! - computes one soft-Q loss gradient per objective, combines them with the
//!   min-norm weights and takes an Adam step along the combination (MGDA).
//!
//! Random streams are keyed by `(seed, step, role, index)`, so a run is a
//! pure function of its configuration.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::aggregate::{evaluation_metrics, AggregationMethod, EvaluationMetrics};
use crate::env::{EnvParams, Environment, OutputSample};
use crate::mgda::{self, min_norm_point};
use crate::optim::{Adam, AdamConfig};
use crate::pareto::{ReferencePoint, RewardVector};
use crate::policy::{
    init_policy, per_objective_loss_grads, sample_prompts, sql_loss_and_grad, PolicyConfig,
    PolicyParams,
};
use crate::rng::{derive_seed, Role};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Average,
    Product,
    Hvi,
    Mgda,
}

impl Method {
    pub const ALL: [Method; 4] = [Self::Average, Self::Hvi, Self::Product, Self::Mgda];

    pub fn name(self) -> &'static str {
        match self {
            Self::Average => "average",
            Self::Product => "product",
            Self::Hvi => "hvi",
            Self::Mgda => "mgda",
        }
    }

    pub fn aggregation(self, num_objectives: usize) -> AggregationMethod {
        match self {
            Self::Average => AggregationMethod::Average,
            Self::Product => AggregationMethod::Product,
            Self::Hvi => AggregationMethod::Hvi(ReferencePoint::origin(num_objectives)),
            Self::Mgda => AggregationMethod::MgdaPassthrough,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown method `{s}`")))
    }
}

/// Policy settings that do not follow from the environment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PolicySettings {
    pub hidden_dim: usize,
    pub temperature: f64,
    pub reward_scale: f64,
}

impl Default for PolicySettings {
    fn default() -> Self {
        let d = PolicyConfig::default();
        Self {
            hidden_dim: d.hidden_dim,
            temperature: d.temperature,
            reward_scale: d.reward_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: mgda::DEFAULT_TOLERANCE,
            max_iter: mgda::DEFAULT_MAX_ITER,
        }
    }
}

/// Named sets of defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Profile {
    /// Small enough to run the full comparison on a laptop in minutes.
    Desk,
    /// 12000 steps and 128 outputs per prompt.
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            _ => Err(Error::InvalidConfig(alloc::format!(
                "unknown profile `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub env: EnvParams,
    pub policy: PolicySettings,
    /// Prompts sampled per step.
    pub k: usize,
    /// Outputs generated per prompt.
    pub k_hat: usize,
    pub steps: usize,
    pub eval_every: usize,
    /// Outputs per evaluation batch, spread over all inputs.
    pub eval_samples: usize,
    pub optimizer: AdamConfig,
    pub solver: SolverSettings,
    pub seeds: Vec<u64>,
}

/// Desk-profile learning rate; see the README for how it was chosen.
pub const DESK_LEARNING_RATE: f64 = 3e-3;
/// Desk-profile reward scale. Large enough that the soft-value entropy term
/// does not swamp product-sized reward gaps at T = 5 with m = 3.
pub const DESK_REWARD_SCALE: f64 = 1000.0;
/// Desk-profile prompts per update; twice the paper profile's to offset
/// the smaller `k_hat`.
pub const DESK_PROMPTS_PER_STEP: usize = 16;
pub const PAPER_PROMPTS_PER_STEP: usize = 8;
pub const PAPER_LEARNING_RATE: f64 = 1e-4;

impl TrainConfig {
    pub fn profile(profile: Profile, method: Method, env: EnvParams) -> Self {
        let (steps, k, k_hat, learning_rate, reward_scale) = match profile {
            Profile::Desk => (
                2000,
                DESK_PROMPTS_PER_STEP,
                32,
                DESK_LEARNING_RATE,
                DESK_REWARD_SCALE,
            ),
            Profile::Paper => (
                12_000,
                PAPER_PROMPTS_PER_STEP,
                128,
                PAPER_LEARNING_RATE,
                PolicySettings::default().reward_scale,
            ),
        };
        Self {
            method,
            env,
            policy: PolicySettings {
                reward_scale,
                ..PolicySettings::default()
            },
            k,
            k_hat,
            steps,
            eval_every: 100,
            eval_samples: 128,
            optimizer: AdamConfig {
                learning_rate,
                ..AdamConfig::default()
            },
            solver: SolverSettings::default(),
            seeds: vec![0, 1, 2],
        }
    }

    pub fn desk(method: Method, env: EnvParams) -> Self {
        Self::profile(Profile::Desk, method, env)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("k", self.k),
            ("k_hat", self.k_hat),
            ("steps", self.steps),
            ("eval_every", self.eval_every),
            ("eval_samples", self.eval_samples),
            ("solver.max_iter", self.solver.max_iter),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(alloc::format!(
                    "{name} must be positive"
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if !(self.solver.tolerance > 0.0) {
            return Err(Error::InvalidConfig(
                "solver.tolerance must be positive".into(),
            ));
        }
        self.optimizer.validate()?;
        self.policy_config_for(
            self.env.prompt_length,
            self.env.vocab_size.unwrap_or(2 * self.env.objectives),
            self.env.context_dim,
        )
        .validate()
    }

    pub fn policy_config_for(
        &self,
        prompt_length: usize,
        vocab_size: usize,
        context_dim: usize,
    ) -> PolicyConfig {
        PolicyConfig {
            vocab_size,
            prompt_length,
            hidden_dim: self.policy.hidden_dim,
            context_dim,
            temperature: self.policy.temperature,
            reward_scale: self.policy.reward_scale,
        }
    }

    /// Number of metric rows one seed produces.
    pub fn evals_per_seed(&self) -> usize {
        self.steps / self.eval_every + 1
    }
}

/// One evaluation of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub step: usize,
    pub seed: u64,
    pub method: Method,
    pub metrics: EvaluationMetrics,
    /// Min-norm value of the most recent MGDA step.
    pub mgda_norm_sq: Option<f64>,
    pub wall_clock: Option<f64>,
}

/// One evaluation output together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub input_index: usize,
    pub tokens: Vec<usize>,
    pub rollout_seed: u64,
    pub output: OutputSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalBatch {
    pub method: Method,
    pub seed: u64,
    pub step: usize,
    pub samples: Vec<EvalSample>,
}

impl EvalBatch {
    pub fn rewards(&self) -> Vec<RewardVector> {
        self.samples
            .iter()
            .map(|s| s.output.rewards.clone())
            .collect()
    }
}

/// How often each update path ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub aggregator_calls: u64,
    pub solver_calls: u64,
    pub updates: u64,
}

impl core::ops::AddAssign for Counters {
    fn add_assign(&mut self, rhs: Self) {
        self.aggregator_calls += rhs.aggregator_calls;
        self.solver_calls += rhs.solver_calls;
        self.updates += rhs.updates;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub seed: u64,
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    pub eval_batches: Vec<EvalBatch>,
    pub final_params: PolicyParams,
    pub counters: Counters,
    pub abort: Option<Abort>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainOutcome {
    pub records: Vec<MetricsRecord>,
    pub eval_batches: Vec<EvalBatch>,
    pub final_params: Vec<(u64, PolicyParams)>,
    pub counters: Counters,
    pub aborts: Vec<Abort>,
}

impl TrainOutcome {
    pub fn push(&mut self, seed: SeedOutcome) {
        self.records.extend(seed.records);
        self.eval_batches.extend(seed.eval_batches);
        self.final_params.push((seed.seed, seed.final_params));
        self.counters += seed.counters;
        self.aborts.extend(seed.abort);
    }
}

/// Source of elapsed time for [`MetricsRecord::wall_clock`].
pub trait Clock {
    fn elapsed_secs(&self) -> Option<f64>;
}

/// Leaves `wall_clock` empty.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_secs(&self) -> Option<f64> {
        None
    }
}

/// Trains every configured seed sequentially on the environment described
/// by `cfg.env`.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let env = cfg.env.build()?;
    let policy = cfg.policy_config_for(env.prompt_length, env.vocab_size, cfg.env.context_dim);
    let mut out = TrainOutcome::default();
    for &seed in &cfg.seeds {
        out.push(train_seed(cfg, &env, &policy, seed, &NoClock)?);
    }
    Ok(out)
}

/// Trains one seed. Numerical failures end the seed early and are reported
/// in [`SeedOutcome::abort`]; configuration problems are errors.
pub fn train_seed<E: Environment + ?Sized>(
    cfg: &TrainConfig,
    env: &E,
    policy: &PolicyConfig,
    seed: u64,
    clock: &dyn Clock,
) -> Result<SeedOutcome> {
    cfg.validate()?;
    policy.validate()?;
    if env.num_inputs() == 0 {
        return Err(Error::InvalidConfig("environment has no inputs".into()));
    }
    let m = env.num_objectives();
    let aggregation = cfg.method.aggregation(m);
    let mut params = init_policy(policy, seed)?;
    let mut adam = Adam::new(cfg.optimizer, params.flat().len());
    let mut counters = Counters::default();
    let mut records = Vec::with_capacity(cfg.evals_per_seed());
    let mut eval_batches = Vec::with_capacity(cfg.evals_per_seed());
    let mut last_norm = None;
    let mut abort = None;

    let mut evaluate_at =
        |step: usize, params: &PolicyParams, last_norm: Option<f64>| -> Result<()> {
            let batch = evaluate(cfg, env, params, seed, step)?;
            let metrics = evaluation_metrics(&batch.rewards(), &ReferencePoint::origin(m))?;
            records.push(MetricsRecord {
                step,
                seed,
                method: cfg.method,
                metrics,
                mgda_norm_sq: last_norm,
                wall_clock: clock.elapsed_secs(),
            });
            eval_batches.push(batch);
            Ok(())
        };
    evaluate_at(0, &params, None)?;

    for step in 0..cfg.steps {
        let result = update_direction(cfg, env, &aggregation, &params, seed, step, &mut counters);
        let (grad, norm) = match result {
            Ok(v) => v,
            Err(Error::NonFinite(what)) => {
                abort = Some(Abort {
                    seed,
                    step,
                    reason: alloc::format!("non-finite {what}"),
                });
                break;
            }
            Err(e) => return Err(e),
        };
        adam.step(params.flat_mut(), &grad)?;
        counters.updates += 1;
        if params.flat().iter().any(|v| !v.is_finite()) {
            abort = Some(Abort {
                seed,
                step,
                reason: "non-finite parameters after update".to_string(),
            });
            break;
        }
        if norm.is_some() {
            last_norm = norm;
        }
        if (step + 1) % cfg.eval_every == 0 {
            evaluate_at(step + 1, &params, last_norm)?;
        }
    }
    Ok(SeedOutcome {
        seed,
        records,
        eval_batches,
        final_params: params,
        counters,
        abort,
    })
}

/// Per-prompt mean of each objective over that prompt's outputs.
fn objective_means(outputs: &[OutputSample]) -> Result<RewardVector> {
    let m = outputs[0].rewards.dim();
    let n = outputs.len() as f64;
    let means = (0..m)
        .map(|i| outputs.iter().map(|o| o.rewards.values()[i]).sum::<f64>() / n)
        .collect();
    RewardVector::new(means)
}

/// Loss gradient to descend along, plus the min-norm value for MGDA.
fn update_direction<E: Environment + ?Sized>(
    cfg: &TrainConfig,
    env: &E,
    aggregation: &AggregationMethod,
    params: &PolicyParams,
    seed: u64,
    step: usize,
    counters: &mut Counters,
) -> Result<(Vec<f64>, Option<f64>)> {
    let input = step % env.num_inputs();
    let context = env.context(input)?;
    let step64 = step as u64;
    let prompts = sample_prompts(
        params,
        context,
        cfg.k,
        derive_seed(seed, step64, Role::PromptSampling, 0),
    )?;
    let rollouts = prompts
        .iter()
        .enumerate()
        .map(|(j, p)| {
            env.rollout(
                &p.tokens,
                input,
                cfg.k_hat,
                derive_seed(seed, step64, Role::Rollout, j as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    if cfg.method == Method::Mgda {
        let targets = rollouts
            .iter()
            .map(|outs| objective_means(outs))
            .collect::<Result<Vec<_>>>()?;
        let (losses, grads) = per_objective_loss_grads(params, context, &prompts, &targets)?;
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("loss"));
        }
        counters.solver_calls += 1;
        let result = min_norm_point(&grads, cfg.solver.tolerance, cfg.solver.max_iter)?;
        let combined: Vec<f64> = result.direction.iter().map(|d| -d).collect();
        Ok((combined, Some(result.combined_norm_sq)))
    } else {
        let rewards = rollouts
            .iter()
            .map(|outs| {
                counters.aggregator_calls += 1;
                let batch: Vec<RewardVector> = outs.iter().map(|o| o.rewards.clone()).collect();
                aggregation.assign(&batch).map(|a| a.batch_scalar)
            })
            .collect::<Result<Vec<f64>>>()?;
        let lg = sql_loss_and_grad(params, context, &prompts, &rewards)?;
        if !lg.loss.is_finite() || lg.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("loss gradient"));
        }
        Ok((lg.grad, None))
    }
}

/// Held-out evaluation batch: one fresh prompt per input, outputs spread so
/// the batch holds at least `eval_samples` outputs.
pub fn evaluate<E: Environment + ?Sized>(
    cfg: &TrainConfig,
    env: &E,
    params: &PolicyParams,
    seed: u64,
    step: usize,
) -> Result<EvalBatch> {
    let n_inputs = env.num_inputs();
    let per_input = cfg.eval_samples.div_ceil(n_inputs);
    let step64 = step as u64;
    let mut samples = Vec::with_capacity(per_input * n_inputs);
    for input in 0..n_inputs {
        let context = env.context(input)?;
        let prompt_seed = derive_seed(seed, step64, Role::EvalPrompt, input as u64);
        let prompt = sample_prompts(params, context, 1, prompt_seed)?.remove(0);
        let rollout_seed = derive_seed(seed, step64, Role::EvalRollout, input as u64);
        for output in env.rollout(&prompt.tokens, input, per_input, rollout_seed)? {
            samples.push(EvalSample {
                input_index: input,
                tokens: prompt.tokens.clone(),
                rollout_seed,
                output,
            });
        }
    }
    Ok(EvalBatch {
        method: cfg.method,
        seed,
        step,
        samples,
    })
}

/// The checkpoint chosen for one seed of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub seed: u64,
    pub step: usize,
    pub metrics: EvaluationMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub per_seed: Vec<Selection>,
    /// Seed average of the selected checkpoints.
    pub mean: EvaluationMetrics,
}

/// Per seed, the evaluation with the highest expected product; earlier
/// steps win ties.
pub fn select_checkpoints(records: &[MetricsRecord]) -> Vec<Selection> {
    let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
        .into_iter()
        .filter_map(|seed| {
            records
                .iter()
                .filter(|r| r.seed == seed)
                .fold(None::<&MetricsRecord>, |best, r| match best {
                    Some(b) if b.metrics.expected_product >= r.metrics.expected_product => Some(b),
                    _ => Some(r),
                })
                .map(|r| Selection {
                    seed,
                    step: r.step,
                    metrics: r.metrics.clone(),
                })
        })
        .collect()
}

pub fn summarize(method: Method, records: &[MetricsRecord]) -> Result<MethodSummary> {
    let per_seed = select_checkpoints(records);
    let first = per_seed.first().ok_or(Error::Empty("metrics records"))?;
    let m = first.metrics.per_objective_means.len();
    let n = per_seed.len() as f64;
    let mut mean = EvaluationMetrics {
        per_objective_means: vec![0.0; m],
        mean_of_means: 0.0,
        expected_product: 0.0,
        hvi: 0.0,
    };
    for s in &per_seed {
        for (acc, v) in mean
            .per_objective_means
            .iter_mut()
            .zip(&s.metrics.per_objective_means)
        {
            *acc += v / n;
        }
        mean.mean_of_means += s.metrics.mean_of_means / n;
        mean.expected_product += s.metrics.expected_product / n;
        mean.hvi += s.metrics.hvi / n;
    }
    Ok(MethodSummary {
        method,
        per_seed,
        mean,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub summaries: Vec<MethodSummary>,
    pub outcomes: Vec<(Method, TrainOutcome)>,
}

/// Runs all four methods on the same environment and seeds.
pub fn compare_methods(base: &TrainConfig) -> Result<Comparison> {
    compare_with(base, train)
}

/// Like [`compare_methods`] with a caller-supplied training routine, e.g.
/// one that runs seeds in parallel.
pub fn compare_with<F>(base: &TrainConfig, mut run: F) -> Result<Comparison>
where
    F: FnMut(&TrainConfig) -> Result<TrainOutcome>,
{
    base.validate()?;
    let mut summaries = Vec::with_capacity(Method::ALL.len());
    let mut outcomes = Vec::with_capacity(Method::ALL.len());
    for method in Method::ALL {
        let cfg = TrainConfig {
            method,
            ..base.clone()
        };
        let outcome = run(&cfg)?;
        summaries.push(summarize(method, &outcome.records)?);
        outcomes.push((method, outcome));
    }
    Ok(Comparison {
        summaries,
        outcomes,
    })
}
