//! Autoregressive MLP policy over fixed-length token sequences.
//!
//! At position `t` the network sees the concatenation of the input context,
//! a one-hot position code and a one-hot code of the previous token (with an
//! extra slot for "no previous token"). Two tanh layers and a linear head
//! produce one action value per vocabulary entry; the sampling distribution
//! is `softmax(q / temperature)`.
//!
//! The training loss is the on-policy soft-Q regression: each chosen action
//! value is pulled toward the soft value of the next position, and the last
//! one toward the scaled sequence reward. Targets are constants.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::mgda::GradientSet;
use crate::pareto::RewardVector;
use crate::rng::{self, Role};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct PolicyConfig {
    pub vocab_size: usize,
    pub prompt_length: usize,
    pub hidden_dim: usize,
    pub context_dim: usize,
    /// Soft-value temperature.
    pub temperature: f64,
    /// Multiplier applied to sequence rewards before they become targets.
    pub reward_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            vocab_size: 6,
            prompt_length: 5,
            hidden_dim: 32,
            context_dim: 8,
            temperature: 1.0,
            reward_scale: 10.0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("prompt_length", self.prompt_length),
            ("hidden_dim", self.hidden_dim),
            ("context_dim", self.context_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::InvalidConfig(alloc::format!(
                    "{name} must be positive"
                )));
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig("temperature must be positive".into()));
        }
        if !self.reward_scale.is_finite() {
            return Err(Error::NonFinite("reward_scale"));
        }
        Ok(())
    }

    /// Context, position one-hot, previous-token one-hot plus a start slot.
    pub fn input_dim(&self) -> usize {
        self.context_dim + self.prompt_length + self.vocab_size + 1
    }

    pub fn layout(&self) -> Layout {
        let (d, h, v) = (self.input_dim(), self.hidden_dim, self.vocab_size);
        let w_in = 0;
        let w_hidden = w_in + h * d;
        let b_hidden = w_hidden + h * h;
        let w_out = b_hidden + h;
        let b_out = w_out + v * h;
        Layout {
            w_in,
            w_hidden,
            b_hidden,
            w_out,
            b_out,
            len: b_out + v,
        }
    }

    pub fn num_params(&self) -> usize {
        self.layout().len
    }
}

/// Offsets of each block in the flat parameter vector. Matrices are
/// row-major with one row per output unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub w_in: usize,
    pub w_hidden: usize,
    pub b_hidden: usize,
    pub w_out: usize,
    pub b_out: usize,
    pub len: usize,
}

/// Structured view of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyWeights {
    /// `hidden_dim x input_dim`
    pub w_in: Vec<Vec<f64>>,
    /// `hidden_dim x hidden_dim`
    pub w_hidden: Vec<Vec<f64>>,
    pub b_hidden: Vec<f64>,
    /// `vocab_size x hidden_dim`
    pub w_out: Vec<Vec<f64>>,
    pub b_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    config: PolicyConfig,
    values: Vec<f64>,
}

impl PolicyParams {
    pub fn from_flat(config: PolicyConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let expected = config.num_params();
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                what: "policy parameters",
                expected,
                found: values.len(),
            });
        }
        Ok(Self { config, values })
    }

    pub fn zeros(config: PolicyConfig) -> Result<Self> {
        let n = config.num_params();
        Self::from_flat(config, vec![0.0; n])
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }

    pub fn weights(&self) -> PolicyWeights {
        let c = &self.config;
        let l = c.layout();
        let (d, h, v) = (c.input_dim(), c.hidden_dim, c.vocab_size);
        let rows = |start: usize, n_rows: usize, n_cols: usize| -> Vec<Vec<f64>> {
            (0..n_rows)
                .map(|r| self.values[start + r * n_cols..start + (r + 1) * n_cols].to_vec())
                .collect()
        };
        PolicyWeights {
            w_in: rows(l.w_in, h, d),
            w_hidden: rows(l.w_hidden, h, h),
            b_hidden: self.values[l.b_hidden..l.b_hidden + h].to_vec(),
            w_out: rows(l.w_out, v, h),
            b_out: self.values[l.b_out..l.b_out + v].to_vec(),
        }
    }

    pub fn from_weights(config: PolicyConfig, w: &PolicyWeights) -> Result<Self> {
        let mut values = Vec::with_capacity(config.num_params());
        for row in &w.w_in {
            values.extend_from_slice(row);
        }
        for row in &w.w_hidden {
            values.extend_from_slice(row);
        }
        values.extend_from_slice(&w.b_hidden);
        for row in &w.w_out {
            values.extend_from_slice(row);
        }
        values.extend_from_slice(&w.b_out);
        Self::from_flat(config, values)
    }
}

/// Uniform `[-s, s]` weights with `s = 1/sqrt(fan_in)`, zero biases.
pub fn init_policy(config: &PolicyConfig, seed: u64) -> Result<PolicyParams> {
    config.validate()?;
    let l = config.layout();
    let (d, h) = (config.input_dim(), config.hidden_dim);
    let mut rng = rng::stream(seed, 0, Role::Init, 0);
    let mut values = vec![0.0; l.len];
    let mut fill = |range: core::ops::Range<usize>, fan_in: usize| {
        let s = 1.0 / libm::sqrt(fan_in as f64);
        for v in &mut values[range] {
            *v = rng.random_range(-s..=s);
        }
    };
    fill(l.w_in..l.w_hidden, d);
    fill(l.w_hidden..l.b_hidden, h);
    fill(l.w_out..l.b_out, h);
    PolicyParams::from_flat(config.clone(), values)
}

/// One sampled prompt with the action values seen while sampling it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PromptSample {
    pub tokens: Vec<usize>,
    pub token_logits: Vec<Vec<f64>>,
    /// `sum_t log softmax(token_logits[t] / temperature)[tokens[t]]`
    pub log_prob: f64,
}

pub fn log_softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let lse = logsumexp(logits, temperature);
    logits.iter().map(|q| q / temperature - lse).collect()
}

pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    log_softmax(logits, temperature)
        .into_iter()
        .map(libm::exp)
        .collect()
}

/// `log sum_a exp(q_a / temperature)`
fn logsumexp(logits: &[f64], temperature: f64) -> f64 {
    let max = logits
        .iter()
        .map(|q| q / temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits
        .iter()
        .map(|q| libm::exp(q / temperature - max))
        .sum();
    max + libm::log(sum)
}

/// Soft state value `temperature * logsumexp(q / temperature)`.
pub fn soft_value(logits: &[f64], temperature: f64) -> f64 {
    temperature * logsumexp(logits, temperature)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Activations at one position, kept for the backward pass.
#[derive(Debug, Clone)]
struct Activations {
    position: usize,
    previous: usize,
    z1: Vec<f64>,
    z2: Vec<f64>,
    q: Vec<f64>,
}

/// Borrowed network bound to a context vector.
struct Network<'a> {
    config: &'a PolicyConfig,
    layout: Layout,
    p: &'a [f64],
    context: &'a [f64],
}

impl<'a> Network<'a> {
    fn new(params: &'a PolicyParams, context: &'a [f64]) -> Result<Self> {
        let config = params.config();
        if context.len() != config.context_dim {
            return Err(Error::DimensionMismatch {
                expected: config.context_dim,
                found: context.len(),
            });
        }
        Ok(Self {
            config,
            layout: config.layout(),
            p: params.flat(),
            context,
        })
    }

    /// Index of the start slot in the previous-token code.
    fn start_token(&self) -> usize {
        self.config.vocab_size
    }

    fn forward(&self, position: usize, previous: usize) -> Activations {
        let c = self.config;
        let l = self.layout;
        let (d, h, v) = (c.input_dim(), c.hidden_dim, c.vocab_size);
        let pos_col = c.context_dim + position;
        let prev_col = c.context_dim + c.prompt_length + previous;
        let z1: Vec<f64> = (0..h)
            .map(|r| {
                let row = &self.p[l.w_in + r * d..l.w_in + (r + 1) * d];
                let a = dot(&row[..c.context_dim], self.context) + row[pos_col] + row[prev_col];
                libm::tanh(a)
            })
            .collect();
        let z2: Vec<f64> = (0..h)
            .map(|r| {
                let row = &self.p[l.w_hidden + r * h..l.w_hidden + (r + 1) * h];
                libm::tanh(dot(row, &z1) + self.p[l.b_hidden + r])
            })
            .collect();
        let q: Vec<f64> = (0..v)
            .map(|r| {
                let row = &self.p[l.w_out + r * h..l.w_out + (r + 1) * h];
                dot(row, &z2) + self.p[l.b_out + r]
            })
            .collect();
        Activations {
            position,
            previous,
            z1,
            z2,
            q,
        }
    }

    /// Adds the parameter gradient for a loss whose derivative with respect
    /// to `q[action]` is `dq` (and zero for other actions).
    fn backward_single(&self, act: &Activations, action: usize, dq: f64, grad: &mut [f64]) {
        let c = self.config;
        let l = self.layout;
        let (d, h) = (c.input_dim(), c.hidden_dim);
        let out_row = l.w_out + action * h;
        grad[l.b_out + action] += dq;
        let mut da2 = vec![0.0; h];
        for k in 0..h {
            grad[out_row + k] += dq * act.z2[k];
            let dz2 = dq * self.p[out_row + k];
            da2[k] = dz2 * (1.0 - act.z2[k] * act.z2[k]);
        }
        let mut dz1 = vec![0.0; h];
        for (r, &g) in da2.iter().enumerate() {
            grad[l.b_hidden + r] += g;
            let row = l.w_hidden + r * h;
            for k in 0..h {
                grad[row + k] += g * act.z1[k];
                dz1[k] += g * self.p[row + k];
            }
        }
        let pos_col = c.context_dim + act.position;
        let prev_col = c.context_dim + c.prompt_length + act.previous;
        for (r, (&dz, &z)) in dz1.iter().zip(&act.z1).enumerate() {
            let da1 = dz * (1.0 - z * z);
            let row = l.w_in + r * d;
            for (k, &x) in self.context.iter().enumerate() {
                grad[row + k] += da1 * x;
            }
            grad[row + pos_col] += da1;
            grad[row + prev_col] += da1;
        }
    }
}

/// Per-position action values and next-token distribution.
pub fn action_values(
    params: &PolicyParams,
    context: &[f64],
    position: usize,
    previous: Option<usize>,
) -> Result<Vec<f64>> {
    let net = Network::new(params, context)?;
    let c = params.config();
    if position >= c.prompt_length {
        return Err(Error::LengthMismatch {
            what: "prompt position",
            expected: c.prompt_length,
            found: position,
        });
    }
    let previous = match previous {
        Some(t) if t >= c.vocab_size => {
            return Err(Error::TokenOutOfRange {
                token: t,
                vocab_size: c.vocab_size,
            })
        }
        Some(t) => t,
        None => net.start_token(),
    };
    Ok(net.forward(position, previous).q)
}

pub fn token_distribution(
    params: &PolicyParams,
    context: &[f64],
    position: usize,
    previous: Option<usize>,
) -> Result<Vec<f64>> {
    let q = action_values(params, context, position, previous)?;
    Ok(softmax(&q, params.config().temperature))
}

fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Samples `k` prompts autoregressively. Prompt `i` uses its own stream
/// derived from `(seed, i)`.
pub fn sample_prompts(
    params: &PolicyParams,
    context: &[f64],
    k: usize,
    seed: u64,
) -> Result<Vec<PromptSample>> {
    let net = Network::new(params, context)?;
    let c = params.config();
    (0..k as u64)
        .map(|i| {
            let mut rng = rng::stream(seed, 0, Role::PromptSampling, i);
            let mut tokens = Vec::with_capacity(c.prompt_length);
            let mut token_logits = Vec::with_capacity(c.prompt_length);
            let mut log_prob = 0.0;
            let mut previous = net.start_token();
            for t in 0..c.prompt_length {
                let q = net.forward(t, previous).q;
                let lp = log_softmax(&q, c.temperature);
                let probs: Vec<f64> = lp.iter().map(|&x| libm::exp(x)).collect();
                let a = draw(&probs, rng.random::<f64>());
                log_prob += lp[a];
                tokens.push(a);
                token_logits.push(q);
                previous = a;
            }
            Ok(PromptSample {
                tokens,
                token_logits,
                log_prob,
            })
        })
        .collect()
}

/// Recomputes `log pi(tokens | context)` under `params`.
pub fn sequence_log_prob(params: &PolicyParams, context: &[f64], tokens: &[usize]) -> Result<f64> {
    let cache = ForwardCache::new(params, context, &[tokens.to_vec()])?;
    let tau = params.config().temperature;
    Ok(cache.acts[0]
        .iter()
        .zip(tokens)
        .map(|(act, &a)| log_softmax(&act.q, tau)[a])
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Forward activations and bootstrapped interior targets for a batch.
struct ForwardCache<'a> {
    net: Network<'a>,
    tokens: Vec<Vec<usize>>,
    acts: Vec<Vec<Activations>>,
    /// `targets[j][t]` for `t < T - 1`: soft value of position `t + 1`.
    interior_targets: Vec<Vec<f64>>,
}

impl<'a> ForwardCache<'a> {
    fn new(params: &'a PolicyParams, context: &'a [f64], tokens: &[Vec<usize>]) -> Result<Self> {
        let net = Network::new(params, context)?;
        let c = params.config();
        let mut acts = Vec::with_capacity(tokens.len());
        let mut interior_targets = Vec::with_capacity(tokens.len());
        for seq in tokens {
            if seq.len() != c.prompt_length {
                return Err(Error::LengthMismatch {
                    what: "prompt tokens",
                    expected: c.prompt_length,
                    found: seq.len(),
                });
            }
            if let Some(&bad) = seq.iter().find(|&&a| a >= c.vocab_size) {
                return Err(Error::TokenOutOfRange {
                    token: bad,
                    vocab_size: c.vocab_size,
                });
            }
            let mut previous = net.start_token();
            let row: Vec<Activations> = seq
                .iter()
                .enumerate()
                .map(|(t, &a)| {
                    let act = net.forward(t, previous);
                    previous = a;
                    act
                })
                .collect();
            let targets = row[1..]
                .iter()
                .map(|act| soft_value(&act.q, c.temperature))
                .collect();
            acts.push(row);
            interior_targets.push(targets);
        }
        Ok(Self {
            net,
            tokens: tokens.to_vec(),
            acts,
            interior_targets,
        })
    }

    /// `targets[j][t]`; the last entry is the scaled terminal reward.
    fn targets(&self, rewards: &[f64]) -> Result<Vec<Vec<f64>>> {
        if rewards.len() != self.tokens.len() {
            return Err(Error::LengthMismatch {
                what: "per-sample rewards",
                expected: self.tokens.len(),
                found: rewards.len(),
            });
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("reward"));
        }
        let scale = self.net.config.reward_scale;
        Ok(self
            .interior_targets
            .iter()
            .zip(rewards)
            .map(|(interior, r)| {
                let mut row = interior.clone();
                row.push(scale * r);
                row
            })
            .collect())
    }

    fn check_targets(&self, targets: &[Vec<f64>]) -> Result<()> {
        if targets.len() != self.tokens.len() {
            return Err(Error::LengthMismatch {
                what: "target rows",
                expected: self.tokens.len(),
                found: targets.len(),
            });
        }
        let t_len = self.net.config.prompt_length;
        if let Some(row) = targets.iter().find(|row| row.len() != t_len) {
            return Err(Error::LengthMismatch {
                what: "targets per prompt",
                expected: t_len,
                found: row.len(),
            });
        }
        if targets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target"));
        }
        Ok(())
    }

    fn loss_and_grad(&self, rewards: &[f64]) -> Result<LossAndGrad> {
        let targets = self.targets(rewards)?;
        Ok(self.loss_and_grad_with(&targets))
    }

    fn loss_and_grad_with(&self, targets: &[Vec<f64>]) -> LossAndGrad {
        let count = (self.tokens.len() * self.net.config.prompt_length) as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.net.layout.len];
        for ((seq, row), target_row) in self.tokens.iter().zip(&self.acts).zip(targets) {
            for ((act, &a), &target) in row.iter().zip(seq).zip(target_row) {
                let residual = act.q[a] - target;
                loss += 0.5 * residual * residual;
                self.net
                    .backward_single(act, a, residual / count, &mut grad);
            }
        }
        LossAndGrad {
            loss: loss / count,
            grad,
        }
    }

    fn loss_with(&self, targets: &[Vec<f64>]) -> f64 {
        let count = (self.tokens.len() * self.net.config.prompt_length) as f64;
        let mut loss = 0.0;
        for ((seq, row), target_row) in self.tokens.iter().zip(&self.acts).zip(targets) {
            for ((act, &a), &target) in row.iter().zip(seq).zip(target_row) {
                let residual = act.q[a] - target;
                loss += 0.5 * residual * residual;
            }
        }
        loss / count
    }
}

fn prompt_tokens(samples: &[PromptSample]) -> Vec<Vec<usize>> {
    samples.iter().map(|s| s.tokens.clone()).collect()
}

/// Soft-Q loss `mean_{j,t} 0.5 (q_t(a_t) - target_t)^2` and its gradient.
/// `context` is the input the prompts were sampled for.
pub fn sql_loss_and_grad(
    params: &PolicyParams,
    context: &[f64],
    samples: &[PromptSample],
    per_sample_reward: &[f64],
) -> Result<LossAndGrad> {
    if samples.is_empty() {
        return Err(Error::Empty("prompt samples"));
    }
    ForwardCache::new(params, context, &prompt_tokens(samples))?.loss_and_grad(per_sample_reward)
}

/// Targets `sql_loss_and_grad` regresses onto, evaluated at `params`.
/// Row `j` holds one target per position; the last is the scaled reward.
pub fn sql_targets(
    params: &PolicyParams,
    context: &[f64],
    samples: &[PromptSample],
    per_sample_reward: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::Empty("prompt samples"));
    }
    ForwardCache::new(params, context, &prompt_tokens(samples))?.targets(per_sample_reward)
}

/// The soft-Q loss with `targets` held constant. Its gradient at the
/// parameters that produced `targets` is the one `sql_loss_and_grad` returns.
pub fn sql_loss_with_targets(
    params: &PolicyParams,
    context: &[f64],
    samples: &[PromptSample],
    targets: &[Vec<f64>],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("prompt samples"));
    }
    let cache = ForwardCache::new(params, context, &prompt_tokens(samples))?;
    cache.check_targets(targets)?;
    Ok(cache.loss_with(targets))
}

/// One loss gradient per objective, sharing a single forward pass.
pub fn per_objective_loss_grads(
    params: &PolicyParams,
    context: &[f64],
    samples: &[PromptSample],
    reward_vectors: &[RewardVector],
) -> Result<(Vec<f64>, GradientSet)> {
    if samples.is_empty() {
        return Err(Error::Empty("prompt samples"));
    }
    if reward_vectors.len() != samples.len() {
        return Err(Error::LengthMismatch {
            what: "reward vectors",
            expected: samples.len(),
            found: reward_vectors.len(),
        });
    }
    let m = reward_vectors[0].dim();
    if let Some(bad) = reward_vectors.iter().find(|r| r.dim() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: bad.dim(),
        });
    }
    let cache = ForwardCache::new(params, context, &prompt_tokens(samples))?;
    let mut losses = Vec::with_capacity(m);
    let mut grads = Vec::with_capacity(m);
    for i in 0..m {
        let rewards: Vec<f64> = reward_vectors.iter().map(|r| r.values()[i]).collect();
        let lg = cache.loss_and_grad(&rewards)?;
        losses.push(lg.loss);
        grads.push(lg.grad);
    }
    Ok((losses, GradientSet::new(grads)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> PolicyConfig {
        PolicyConfig {
            vocab_size: 3,
            prompt_length: 3,
            hidden_dim: 4,
            context_dim: 2,
            temperature: 0.7,
            reward_scale: 2.0,
        }
    }

    #[test]
    fn layout_is_a_pure_function_of_config() {
        let c = small_config();
        let (d, h, v) = (2 + 3 + 3 + 1, 4, 3);
        assert_eq!(c.num_params(), h * d + h * h + h + v * h + v);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let c = small_config();
        let a = init_policy(&c, 9).unwrap();
        assert_eq!(a, init_policy(&c, 9).unwrap());
        assert_ne!(a, init_policy(&c, 10).unwrap());
        let w = a.weights();
        assert!(w.b_hidden.iter().all(|&b| b == 0.0));
        assert!(w.b_out.iter().all(|&b| b == 0.0));
        let bound = 1.0 / libm::sqrt(c.input_dim() as f64);
        assert!(w.w_in.iter().flatten().all(|x| x.abs() <= bound));
    }

    #[test]
    fn weights_round_trip() {
        let c = small_config();
        let p = init_policy(&c, 3).unwrap();
        assert_eq!(PolicyParams::from_weights(c, &p.weights()).unwrap(), p);
    }

    #[test]
    fn rejects_zero_dimensions() {
        let mut c = small_config();
        c.hidden_dim = 0;
        assert!(init_policy(&c, 1).is_err());
        let mut c = small_config();
        c.temperature = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_weights_give_uniform_distribution() {
        let p = PolicyParams::zeros(small_config()).unwrap();
        for t in 0..3 {
            let probs = token_distribution(&p, &[0.3, -1.0], t, Some(1)).unwrap();
            for pr in probs {
                assert!((pr - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn recorded_log_prob_matches_recomputation() {
        let c = small_config();
        let p = init_policy(&c, 5).unwrap();
        let ctx = [0.5, -0.2];
        for s in sample_prompts(&p, &ctx, 6, 77).unwrap() {
            let lp = sequence_log_prob(&p, &ctx, &s.tokens).unwrap();
            assert!((lp - s.log_prob).abs() < 1e-12);
            for row in &s.token_logits {
                let sum: f64 = softmax(row, c.temperature).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let p = init_policy(&small_config(), 5).unwrap();
        let a = sample_prompts(&p, &[0.1, 0.2], 1, 4).unwrap();
        assert_eq!(a, sample_prompts(&p, &[0.1, 0.2], 1, 4).unwrap());
        assert!(sample_prompts(&p, &[0.1], 1, 4).is_err());
    }

    #[test]
    fn loss_rejects_misaligned_rewards() {
        let p = init_policy(&small_config(), 5).unwrap();
        let s = sample_prompts(&p, &[0.1, 0.2], 2, 4).unwrap();
        assert!(matches!(
            sql_loss_and_grad(&p, &[0.1, 0.2], &s, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(sql_loss_and_grad(&p, &[0.1, 0.2], &s, &[1.0, f64::NAN]).is_err());
    }
}
