//! Experiment configuration: profile defaults, then the config file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use moprompt_core::env::{EnvKind, EnvParams};
use moprompt_core::train::{Method, Profile, TrainConfig};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_OUT_DIR: &str = "moprompt-out";
pub const DEFAULT_OBJECTIVES: usize = 3;

/// On-disk config. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub profile: Option<Profile>,
    pub method: Option<Method>,
    pub seeds: Option<Vec<u64>>,
    pub steps: Option<usize>,
    pub k: Option<usize>,
    pub k_hat: Option<usize>,
    pub eval_every: Option<usize>,
    pub eval_samples: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub wall_clock: Option<bool>,
    pub env: Option<EnvSection>,
    pub policy: Option<PolicySection>,
    pub optimizer: Option<OptimizerSection>,
    pub solver: Option<SolverSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub name: Option<EnvKind>,
    pub objectives: Option<usize>,
    pub seed: Option<u64>,
    pub vocab_size: Option<usize>,
    pub prompt_length: Option<usize>,
    pub num_inputs: Option<usize>,
    pub context_dim: Option<usize>,
    pub noise_scale: Option<f64>,
    pub outlier_prob: Option<f64>,
    pub mirror_objectives: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub hidden_dim: Option<usize>,
    pub temperature: Option<f64>,
    pub reward_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tolerance: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub method: Option<Method>,
    pub env: Option<EnvKind>,
    pub objectives: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub steps: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub wall_clock: bool,
}

/// Everything a run needs.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub train: TrainConfig,
    /// Whether the file or flags named a method; `compare` ignores it.
    pub method_given: bool,
    pub out_dir: PathBuf,
    pub wall_clock: bool,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Layers `file` and `flags` over the selected profile and validates.
pub fn resolve(file: FileConfig, flags: Overrides) -> CliResult<RunSpec> {
    let profile = flags.profile.or(file.profile).unwrap_or(Profile::Desk);
    let env_file = file.env.unwrap_or_default();
    let name = flags.env.or(env_file.name).unwrap_or(EnvKind::TugOfWar);
    let objectives = flags
        .objectives
        .or(env_file.objectives)
        .unwrap_or(DEFAULT_OBJECTIVES);
    let mut env = EnvParams::new(name, objectives, env_file.seed.unwrap_or(0));
    if env_file.vocab_size.is_some() {
        env.vocab_size = env_file.vocab_size;
    }
    set(&mut env.prompt_length, env_file.prompt_length);
    set(&mut env.num_inputs, env_file.num_inputs);
    set(&mut env.context_dim, env_file.context_dim);
    set(&mut env.noise_scale, env_file.noise_scale);
    if env_file.outlier_prob.is_some() {
        env.outlier_prob = env_file.outlier_prob;
    }
    set(&mut env.mirror_objectives, env_file.mirror_objectives);

    let method = flags.method.or(file.method);
    let mut cfg = TrainConfig::profile(profile, method.unwrap_or(Method::Product), env);
    set(&mut cfg.seeds, file.seeds);
    set(&mut cfg.steps, file.steps);
    set(&mut cfg.k, file.k);
    set(&mut cfg.k_hat, file.k_hat);
    set(&mut cfg.eval_every, file.eval_every);
    set(&mut cfg.eval_samples, file.eval_samples);
    if let Some(p) = file.policy {
        set(&mut cfg.policy.hidden_dim, p.hidden_dim);
        set(&mut cfg.policy.temperature, p.temperature);
        set(&mut cfg.policy.reward_scale, p.reward_scale);
    }
    if let Some(o) = file.optimizer {
        set(&mut cfg.optimizer.learning_rate, o.learning_rate);
        set(&mut cfg.optimizer.beta1, o.beta1);
        set(&mut cfg.optimizer.beta2, o.beta2);
        set(&mut cfg.optimizer.eps, o.eps);
    }
    if let Some(s) = file.solver {
        set(&mut cfg.solver.tolerance, s.tolerance);
        set(&mut cfg.solver.max_iter, s.max_iter);
    }
    set(&mut cfg.seeds, flags.seeds);
    set(&mut cfg.steps, flags.steps);
    if cfg.seeds.is_empty() {
        return Err(CliError::Config("at least one seed is required".into()));
    }
    cfg.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.env
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;

    Ok(RunSpec {
        train: cfg,
        method_given: method.is_some(),
        out_dir: flags
            .out_dir
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        wall_clock: flags.wall_clock || file.wall_clock.unwrap_or(false),
    })
}

/// Parses `"0,1,2"`.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>, String> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<u64>()
                .map_err(|e| format!("bad seed {part:?}: {e}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use moprompt_core::train::DESK_REWARD_SCALE;

    #[test]
    fn empty_file_gives_desk_defaults() {
        let spec = resolve(FileConfig::default(), Overrides::default()).unwrap();
        assert_eq!(spec.train.steps, 2000);
        assert_eq!(spec.train.k_hat, 32);
        assert_eq!(spec.train.env.objectives, DEFAULT_OBJECTIVES);
        assert_eq!(spec.train.policy.reward_scale, DESK_REWARD_SCALE);
        assert!(!spec.method_given);
        assert!(!spec.wall_clock);
    }

    #[test]
    fn partial_sections_keep_profile_values() {
        let file = FileConfig::parse(
            r#"
            method = "hvi"
            steps = 40
            [policy]
            hidden_dim = 8
            [env]
            name = "outlier-prone"
            objectives = 2
            outlier_prob = 0.5
            "#,
        )
        .unwrap();
        let spec = resolve(file, Overrides::default()).unwrap();
        assert_eq!(spec.train.method, Method::Hvi);
        assert_eq!(spec.train.policy.hidden_dim, 8);
        assert_eq!(spec.train.policy.reward_scale, DESK_REWARD_SCALE);
        assert_eq!(spec.train.env.name, EnvKind::OutlierProne);
        assert_eq!(spec.train.env.outlier_prob, Some(0.5));
        assert_eq!(spec.train.steps, 40);
    }

    #[test]
    fn flags_override_file() {
        let file = FileConfig::parse("steps = 40\nseeds = [4]\nmethod = \"average\"").unwrap();
        let flags = Overrides {
            steps: Some(20),
            seeds: Some(vec![1, 2]),
            method: Some(Method::Mgda),
            profile: Some(Profile::Paper),
            ..Overrides::default()
        };
        let spec = resolve(file, flags).unwrap();
        assert_eq!(spec.train.steps, 20);
        assert_eq!(spec.train.seeds, vec![1, 2]);
        assert_eq!(spec.train.method, Method::Mgda);
        assert_eq!(spec.train.k_hat, 128);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(FileConfig::parse("stepz = 3").is_err());
        assert!(FileConfig::parse("[policy]\nwidth = 3").is_err());
        assert!(FileConfig::parse("[env]\nname = \"nope\"").is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let file = FileConfig::parse("k = 0").unwrap();
        assert!(matches!(
            resolve(file, Overrides::default()),
            Err(CliError::Config(_))
        ));
        let file = FileConfig::parse("[env]\nobjectives = 1").unwrap();
        assert!(matches!(
            resolve(file, Overrides::default()),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("0, 1,2").unwrap(), vec![0, 1, 2]);
        assert!(parse_seed_list("1,x").is_err());
    }
}
