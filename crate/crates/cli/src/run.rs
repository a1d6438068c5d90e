//! Runs (method, seed) jobs on worker threads and writes the outputs.
//! Results are collected by job index, so files never depend on thread
//! scheduling.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use moprompt_core::env::EnvSpec;
use moprompt_core::policy::PolicyConfig;
use moprompt_core::train::{
    summarize, train_seed, Abort, Clock, Method, MethodSummary, MetricsRecord, NoClock,
    SeedOutcome, TrainConfig,
};

use crate::config::RunSpec;
use crate::error::{CliError, CliResult};
use crate::output::{
    self, checkpoint_file_name, sample_lines, Checkpoint, ABORTS_FILE, METRICS_FILE, SAMPLES_FILE,
    SELECTION_FILE, TABLE_FILE,
};

struct WallClock(Instant);

impl Clock for WallClock {
    fn elapsed_secs(&self) -> Option<f64> {
        Some(self.0.elapsed().as_secs_f64())
    }
}

/// All seeds of one method, in config order.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub seeds: Vec<SeedOutcome>,
}

impl MethodRun {
    pub fn records(&self) -> Vec<MetricsRecord> {
        self.seeds.iter().flat_map(|s| s.records.clone()).collect()
    }

    pub fn aborts(&self) -> Vec<Abort> {
        self.seeds.iter().filter_map(|s| s.abort.clone()).collect()
    }
}

fn worker_count(jobs: usize) -> usize {
    let cores = thread::available_parallelism().map_or(1, |n| n.get());
    cores.min(jobs).max(1)
}

/// Trains every method in `methods` on every seed of `base`.
pub fn run_methods(
    base: &TrainConfig,
    methods: &[Method],
    wall_clock: bool,
) -> CliResult<Vec<MethodRun>> {
    base.validate()?;
    let env: EnvSpec = base.env.build()?;
    let policy: PolicyConfig =
        base.policy_config_for(env.prompt_length, env.vocab_size, base.env.context_dim);
    let configs: Vec<TrainConfig> = methods
        .iter()
        .map(|&method| TrainConfig {
            method,
            ..base.clone()
        })
        .collect();
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| base.seeds.iter().map(move |&s| (c, s)))
        .collect();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<moprompt_core::Result<SeedOutcome>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..worker_count(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, seed)) = jobs.get(i) else { break };
                let outcome = if wall_clock {
                    train_seed(&configs[c], &env, &policy, seed, &WallClock(Instant::now()))
                } else {
                    train_seed(&configs[c], &env, &policy, seed, &NoClock)
                };
                results.lock().expect("result slot poisoned")[i] = Some(outcome);
            });
        }
    });

    let mut results = results
        .into_inner()
        .expect("result slot poisoned")
        .into_iter();
    let mut runs = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut seeds = Vec::with_capacity(base.seeds.len());
        for _ in &base.seeds {
            seeds.push(results.next().flatten().expect("every job ran")?);
        }
        runs.push(MethodRun { method, seeds });
    }
    Ok(runs)
}

/// What a command produced.
#[derive(Debug)]
pub struct Report {
    pub runs: Vec<MethodRun>,
    pub summaries: Vec<MethodSummary>,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn aborts(&self) -> Vec<(Method, Abort)> {
        self.runs
            .iter()
            .flat_map(|r| r.aborts().into_iter().map(move |a| (r.method, a)))
            .collect()
    }
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_checkpoints(
    dir: &Path,
    cfg: &TrainConfig,
    run: &MethodRun,
    files: &mut Vec<PathBuf>,
) -> CliResult<()> {
    let cfg = TrainConfig {
        method: run.method,
        ..cfg.clone()
    };
    for s in &run.seeds {
        let path = dir.join(checkpoint_file_name(s.seed));
        Checkpoint::new(&cfg, s.seed, s.counters.updates as usize, &s.final_params).write(&path)?;
        files.push(path);
    }
    Ok(())
}

fn write_common(dir: &Path, runs: &[MethodRun], files: &mut Vec<PathBuf>) -> CliResult<()> {
    let records: Vec<MetricsRecord> = runs.iter().flat_map(MethodRun::records).collect();
    let path = dir.join(METRICS_FILE);
    output::write_metrics(&path, &records)?;
    files.push(path);

    let batches: Vec<_> = runs
        .iter()
        .flat_map(|r| r.seeds.iter().flat_map(|s| s.eval_batches.iter().cloned()))
        .collect();
    let lines = sample_lines(&batches);
    let path = dir.join(SAMPLES_FILE);
    output::write_samples(&path, &lines)?;
    files.push(path);
    files.extend(output::write_scatter(dir, &lines)?);

    let aborts: Vec<(Method, Abort)> = runs
        .iter()
        .flat_map(|r| r.aborts().into_iter().map(move |a| (r.method, a)))
        .collect();
    if !aborts.is_empty() {
        let path = dir.join(ABORTS_FILE);
        output::write_aborts(&path, &aborts)?;
        files.push(path);
    }
    Ok(())
}

/// Trains the configured method and writes its outputs.
pub fn train_command(spec: &RunSpec) -> CliResult<Report> {
    if !spec.method_given {
        return Err(CliError::Config(
            "train needs a method (--method or `method` in the config)".into(),
        ));
    }
    let runs = run_methods(&spec.train, &[spec.train.method], spec.wall_clock)?;
    prepare_dir(&spec.out_dir)?;
    let mut files = Vec::new();
    write_common(&spec.out_dir, &runs, &mut files)?;
    write_checkpoints(&spec.out_dir, &spec.train, &runs[0], &mut files)?;
    let summaries = vec![summarize(runs[0].method, &runs[0].records())?];
    Ok(Report {
        runs,
        summaries,
        files,
    })
}

/// Trains all four methods on the same seeds and writes the comparison
/// table alongside the per-run outputs.
pub fn compare_command(spec: &RunSpec) -> CliResult<Report> {
    let runs = run_methods(&spec.train, &Method::ALL, spec.wall_clock)?;
    prepare_dir(&spec.out_dir)?;
    let mut files = Vec::new();
    write_common(&spec.out_dir, &runs, &mut files)?;
    for run in &runs {
        let dir = spec.out_dir.join(run.method.name());
        prepare_dir(&dir)?;
        write_checkpoints(&dir, &spec.train, run, &mut files)?;
    }
    let summaries = runs
        .iter()
        .map(|r| summarize(r.method, &r.records()))
        .collect::<moprompt_core::Result<Vec<_>>>()?;
    let path = spec.out_dir.join(TABLE_FILE);
    output::write_table(&path, &summaries)?;
    files.push(path);
    let path = spec.out_dir.join(SELECTION_FILE);
    output::write_selection(&path, &summaries)?;
    files.push(path);
    Ok(Report {
        runs,
        summaries,
        files,
    })
}

/// Rebuilds the pairwise scatter files from a dumped `samples.jsonl`.
pub fn scatter_command(out_dir: &Path, samples: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let default = out_dir.join(SAMPLES_FILE);
    let lines = output::read_samples(samples.unwrap_or(&default))?;
    prepare_dir(out_dir)?;
    output::write_scatter(out_dir, &lines)
}
