//! Synthetic reward channels standing in for a frozen language model and its
//! reward scorers.
//!
//! A prompt (token sequence) and an input index produce `k_hat` output
//! samples. Each sample has a latent vector in `R^m`; its rewards are the
//! latent clamped to `[0, 1]`.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::pareto::RewardVector;
use crate::rng::{self, Role};
use crate::{Error, Result};

/// Latent level of an outlier sample in every objective.
pub const OUTLIER_LEVEL: f64 = 0.95;
pub const DEFAULT_NOISE_SCALE: f64 = 0.05;
pub const DEFAULT_OUTLIER_PROB: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum EnvKind {
    /// Every token votes for one objective; the mean latent is the vote
    /// fraction vector, so objectives trade off exactly.
    TugOfWar,
    /// Every token sequence hashes to its own mean vector on a
    /// negatively correlated family.
    GaussianArms,
    /// Tug-of-war where a small fraction of samples are replaced by a
    /// point that is strong in every objective.
    OutlierProne,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [Self::TugOfWar, Self::GaussianArms, Self::OutlierProne];

    pub fn name(self) -> &'static str {
        match self {
            Self::TugOfWar => "tug-of-war",
            Self::GaussianArms => "gaussian-arms",
            Self::OutlierProne => "outlier-prone",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownEnvironment(s.to_string()))
    }
}

/// A generated output and its rewards.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutputSample {
    pub latent: Vec<f64>,
    pub rewards: RewardVector,
}

/// Anything that turns prompts into rewarded output samples.
pub trait Environment {
    fn num_objectives(&self) -> usize;

    fn num_inputs(&self) -> usize;

    /// Fixed embedding of input `index`, fed to the policy.
    fn context(&self, index: usize) -> Result<&[f64]>;

    /// Draws `k_hat` outputs for `tokens` on input `input_index`.
    /// Deterministic in `seed`.
    fn rollout(
        &self,
        tokens: &[usize],
        input_index: usize,
        k_hat: usize,
        seed: u64,
    ) -> Result<Vec<OutputSample>>;
}

/// Construction parameters, as they appear in experiment configs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct EnvParams {
    pub name: EnvKind,
    pub objectives: usize,
    pub seed: u64,
    /// Defaults to two tokens per objective.
    #[cfg_attr(feature = "serde", serde(default))]
    pub vocab_size: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default = "defaults::prompt_length"))]
    pub prompt_length: usize,
    #[cfg_attr(feature = "serde", serde(default = "defaults::num_inputs"))]
    pub num_inputs: usize,
    #[cfg_attr(feature = "serde", serde(default = "defaults::context_dim"))]
    pub context_dim: usize,
    #[cfg_attr(feature = "serde", serde(default = "defaults::noise_scale"))]
    pub noise_scale: f64,
    /// Defaults to 0.02 for `outlier-prone`, 0 otherwise.
    #[cfg_attr(feature = "serde", serde(default))]
    pub outlier_prob: Option<f64>,
    /// Copy objective 0 into every objective, removing all conflict.
    #[cfg_attr(feature = "serde", serde(default))]
    pub mirror_objectives: bool,
}

#[cfg(feature = "serde")]
mod defaults {
    pub(super) fn prompt_length() -> usize {
        5
    }
    pub(super) fn num_inputs() -> usize {
        16
    }
    pub(super) fn context_dim() -> usize {
        8
    }
    pub(super) fn noise_scale() -> f64 {
        super::DEFAULT_NOISE_SCALE
    }
}

impl EnvParams {
    pub fn new(name: EnvKind, objectives: usize, seed: u64) -> Self {
        Self {
            name,
            objectives,
            seed,
            vocab_size: None,
            prompt_length: 5,
            num_inputs: 16,
            context_dim: 8,
            noise_scale: DEFAULT_NOISE_SCALE,
            outlier_prob: None,
            mirror_objectives: false,
        }
    }

    pub fn build(&self) -> Result<EnvSpec> {
        let m = self.objectives;
        if m < 2 {
            return Err(Error::InvalidConfig(
                "environments need at least two objectives".into(),
            ));
        }
        if self.prompt_length == 0 || self.num_inputs == 0 || self.context_dim == 0 {
            return Err(Error::InvalidConfig(
                "prompt_length, num_inputs and context_dim must be positive".into(),
            ));
        }
        let vocab_size = self.vocab_size.unwrap_or(2 * m);
        if vocab_size == 0 {
            return Err(Error::InvalidConfig("vocab_size must be positive".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidConfig(
                "noise_scale must be nonnegative".into(),
            ));
        }
        let outlier_prob = self.outlier_prob.unwrap_or(match self.name {
            EnvKind::OutlierProne => DEFAULT_OUTLIER_PROB,
            _ => 0.0,
        });
        if !(0.0..=1.0).contains(&outlier_prob) {
            return Err(Error::InvalidConfig(
                "outlier_prob must lie in [0, 1]".into(),
            ));
        }
        let mut rng = rng::stream(self.seed, 0, Role::Environment, 0);
        let inputs = (0..self.num_inputs)
            .map(|_| {
                (0..self.context_dim)
                    .map(|_| rng.random_range(-1.0..=1.0))
                    .collect()
            })
            .collect();
        Ok(EnvSpec {
            kind: self.name,
            num_objectives: m,
            vocab_size,
            prompt_length: self.prompt_length,
            inputs,
            noise_scale: self.noise_scale,
            outlier_prob,
            arm_seed: self.seed,
            mirror_objectives: self.mirror_objectives,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub num_objectives: usize,
    pub vocab_size: usize,
    pub prompt_length: usize,
    pub inputs: Vec<Vec<f64>>,
    pub noise_scale: f64,
    pub outlier_prob: f64,
    /// Keys the gaussian-arms mean table.
    pub arm_seed: u64,
    pub mirror_objectives: bool,
}

/// Built-in environment with default parameters.
pub fn builtin_env(name: &str, m: usize, seed: u64) -> Result<EnvSpec> {
    EnvParams::new(name.parse()?, m, seed).build()
}

impl EnvSpec {
    /// Objective that `token` votes for in the tug-of-war family.
    pub fn vote_axis(&self, token: usize) -> usize {
        token % self.num_objectives
    }

    pub fn vote_fractions(&self, tokens: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.num_objectives];
        for &t in tokens {
            counts[self.vote_axis(t)] += 1.0;
        }
        let n = tokens.len() as f64;
        counts.into_iter().map(|c| c / n).collect()
    }

    fn arm_mean(&self, tokens: &[usize]) -> Vec<f64> {
        let m = self.num_objectives;
        let key = rng::hash_words(self.arm_seed, tokens.iter().map(|&t| t as u64));
        let mut rng = rng::stream(key, 0, Role::Environment, 1);
        // uniform point on the simplex from normalized exponentials
        let e: Vec<f64> = (0..m)
            .map(|_| -libm::log(1.0 - rng.random::<f64>()))
            .collect();
        let total: f64 = e.iter().sum();
        let spread = m as f64 / 2.0;
        e.iter().map(|x| (spread * x / total).min(1.0)).collect()
    }

    /// Noise-free latent of a prompt.
    pub fn mean_latent(&self, tokens: &[usize]) -> Vec<f64> {
        let mut mean = match self.kind {
            EnvKind::TugOfWar | EnvKind::OutlierProne => self.vote_fractions(tokens),
            EnvKind::GaussianArms => self.arm_mean(tokens),
        };
        if self.mirror_objectives {
            let first = mean[0];
            mean.iter_mut().for_each(|v| *v = first);
        }
        mean
    }

    fn check_prompt(&self, tokens: &[usize]) -> Result<()> {
        if tokens.len() != self.prompt_length {
            return Err(Error::LengthMismatch {
                what: "prompt tokens",
                expected: self.prompt_length,
                found: tokens.len(),
            });
        }
        if let Some(&t) = tokens.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::TokenOutOfRange {
                token: t,
                vocab_size: self.vocab_size,
            });
        }
        Ok(())
    }
}

/// Clamps a latent into `[0, 1]^m`.
pub fn rewards_from_latent(latent: &[f64]) -> Result<RewardVector> {
    RewardVector::new(latent.iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

impl Environment for EnvSpec {
    fn num_objectives(&self) -> usize {
        self.num_objectives
    }

    fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    fn context(&self, index: usize) -> Result<&[f64]> {
        self.inputs
            .get(index)
            .map(Vec::as_slice)
            .ok_or(Error::InputIndexOutOfRange {
                index,
                len: self.inputs.len(),
            })
    }

    fn rollout(
        &self,
        tokens: &[usize],
        input_index: usize,
        k_hat: usize,
        seed: u64,
    ) -> Result<Vec<OutputSample>> {
        self.context(input_index)?;
        self.check_prompt(tokens)?;
        let m = self.num_objectives;
        let mean = self.mean_latent(tokens);
        // Outlier draws use their own stream so that outlier_prob = 0
        // reproduces the tug-of-war stream exactly.
        let mut noise = rng::stream(seed, 0, Role::Noise, 0);
        let mut outliers = rng::stream(seed, 0, Role::Outlier, 0);
        (0..k_hat)
            .map(|_| {
                let mut latent: Vec<f64> = mean
                    .iter()
                    .map(|mu| {
                        let z: f64 = noise.sample(StandardNormal);
                        mu + self.noise_scale * z
                    })
                    .collect();
                if self.kind == EnvKind::OutlierProne
                    && outliers.random::<f64>() < self.outlier_prob
                {
                    latent = vec![OUTLIER_LEVEL; m];
                }
                if self.mirror_objectives {
                    let first = latent[0];
                    latent.iter_mut().for_each(|v| *v = first);
                }
                let rewards = rewards_from_latent(&latent)?;
                Ok(OutputSample { latent, rewards })
            })
            .collect()
    }
}

/// Human-readable name of an environment, e.g. `tug-of-war/m3`.
pub fn describe(spec: &EnvSpec) -> String {
    alloc::format!("{}/m{}", spec.kind, spec.num_objectives)
}
