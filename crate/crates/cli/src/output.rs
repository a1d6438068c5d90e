//! File formats: metrics CSV, eval-sample JSONL, pairwise scatter JSONL,
//! the method-comparison table and policy checkpoints.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use moprompt_core::aggregate::EvaluationMetrics;
use moprompt_core::env::EnvParams;
use moprompt_core::optim::AdamConfig;
use moprompt_core::policy::{PolicyConfig, PolicyParams};
use moprompt_core::train::{
    Abort, EvalBatch, Method, MethodSummary, MetricsRecord, PolicySettings, SolverSettings,
    TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const TABLE_FILE: &str = "table1_analog.csv";
pub const SELECTION_FILE: &str = "checkpoints.csv";
pub const ABORTS_FILE: &str = "aborts.csv";

pub const METRICS_HEADER: [&str; 9] = [
    "step",
    "seed",
    "method",
    "per_objective_means",
    "mean_of_means",
    "expected_product",
    "hvi",
    "mgda_norm_sq",
    "wall_clock",
];

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(path: &Path, mut w: impl Write) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path.display().to_string(), format!("{other:?}")),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn scatter_file_name(i: usize, j: usize) -> String {
    format!("scatter_{i}_{j}.jsonl")
}

pub fn checkpoint_file_name(seed: u64) -> String {
    format!("checkpoint_{seed}.txt")
}

pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(METRICS_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in records {
        let means: Vec<String> = r
            .metrics
            .per_objective_means
            .iter()
            .map(f64::to_string)
            .collect();
        w.write_record([
            r.step.to_string(),
            r.seed.to_string(),
            r.method.name().to_string(),
            means.join(";"),
            r.metrics.mean_of_means.to_string(),
            r.metrics.expected_product.to_string(),
            r.metrics.hvi.to_string(),
            opt(r.mgda_norm_sq),
            opt(r.wall_clock),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    let inner = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    finish(path, inner)
}

pub fn read_metrics(path: &Path) -> CliResult<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(CliError::format(
            path.display().to_string(),
            "unexpected header",
        ));
    }
    let bad = |detail: String| CliError::format(path.display().to_string(), detail);
    let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
    let optional = |s: &str| {
        if s.is_empty() {
            Ok(None)
        } else {
            float(s).map(Some)
        }
    };
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let per_objective_means = row[3]
            .split(';')
            .map(float)
            .collect::<CliResult<Vec<_>>>()?;
        out.push(MetricsRecord {
            step: row[0].parse().map_err(|e| bad(format!("step: {e}")))?,
            seed: row[1].parse().map_err(|e| bad(format!("seed: {e}")))?,
            method: row[2].parse().map_err(|e| bad(format!("method: {e}")))?,
            metrics: EvaluationMetrics {
                per_objective_means,
                mean_of_means: float(&row[4])?,
                expected_product: float(&row[5])?,
                hvi: float(&row[6])?,
            },
            mgda_norm_sq: optional(&row[7])?,
            wall_clock: optional(&row[8])?,
        });
    }
    Ok(out)
}

/// One evaluation output, as written to `samples.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLine {
    pub method: Method,
    pub seed: u64,
    pub step: usize,
    pub input: usize,
    pub tokens: Vec<usize>,
    pub latent: Vec<f64>,
    pub rewards: Vec<f64>,
    pub rollout_seed: u64,
}

pub fn sample_lines(batches: &[EvalBatch]) -> Vec<SampleLine> {
    batches
        .iter()
        .flat_map(|b| {
            b.samples.iter().map(move |s| SampleLine {
                method: b.method,
                seed: b.seed,
                step: b.step,
                input: s.input_index,
                tokens: s.tokens.clone(),
                latent: s.output.latent.clone(),
                rewards: s.output.rewards.values().to_vec(),
                rollout_seed: s.rollout_seed,
            })
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)
            .map_err(|e| CliError::format(path.display().to_string(), e))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    finish(path, w)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| CliError::format(format!("{}:{}", path.display(), n + 1), e))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_samples(path: &Path, lines: &[SampleLine]) -> CliResult<()> {
    write_jsonl(path, lines)
}

pub fn read_samples(path: &Path) -> CliResult<Vec<SampleLine>> {
    read_jsonl(path)
}

/// Mean rewards of one eval batch on one pair of objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub method: Method,
    pub seed: u64,
    pub step: usize,
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
}

type BatchKey = (Method, u64, usize);

/// Per-batch objective means, batches in first-appearance order.
fn batch_means(lines: &[SampleLine]) -> CliResult<Vec<(BatchKey, Vec<f64>)>> {
    let mut order: Vec<BatchKey> = Vec::new();
    let mut sums: BTreeMap<BatchKey, (Vec<f64>, usize)> = BTreeMap::new();
    let m = lines
        .first()
        .ok_or_else(|| CliError::format("eval samples", "no samples to scatter"))?
        .rewards
        .len();
    for l in lines {
        if l.rewards.len() != m {
            return Err(CliError::format(
                "eval samples",
                "inconsistent objective count",
            ));
        }
        let key = (l.method, l.seed, l.step);
        let entry = sums.entry(key).or_insert_with(|| {
            order.push(key);
            (vec![0.0; m], 0)
        });
        for (acc, r) in entry.0.iter_mut().zip(&l.rewards) {
            *acc += r;
        }
        entry.1 += 1;
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let (s, n) = &sums[&key];
            (key, s.iter().map(|v| v / *n as f64).collect())
        })
        .collect())
}

/// One point list per unordered objective pair `(i, j)`, `i < j`.
pub fn scatter_points(
    lines: &[SampleLine],
) -> CliResult<BTreeMap<(usize, usize), Vec<ScatterPoint>>> {
    let batches = batch_means(lines)?;
    let m = batches[0].1.len();
    let mut out = BTreeMap::new();
    for i in 0..m {
        for j in i + 1..m {
            let points = batches
                .iter()
                .map(|&((method, seed, step), ref means)| ScatterPoint {
                    method,
                    seed,
                    step,
                    i,
                    j,
                    x: means[i],
                    y: means[j],
                })
                .collect();
            out.insert((i, j), points);
        }
    }
    Ok(out)
}

pub fn write_scatter(dir: &Path, lines: &[SampleLine]) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for ((i, j), points) in scatter_points(lines)? {
        let path = dir.join(scatter_file_name(i, j));
        write_jsonl(&path, &points)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_scatter(path: &Path) -> CliResult<Vec<ScatterPoint>> {
    read_jsonl(path)
}

/// Seed-averaged selected checkpoints, scaled by 100: one row per method,
/// then the per-objective means, the expected product and the average.
pub fn write_table(path: &Path, summaries: &[MethodSummary]) -> CliResult<()> {
    let m = summaries
        .first()
        .ok_or_else(|| CliError::format("comparison", "no methods"))?
        .mean
        .per_objective_means
        .len();
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["method".to_string()];
    header.extend((0..m).map(|i| format!("objective_{i}")));
    header.push("product".into());
    header.push("average".into());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for s in summaries {
        let mut row = vec![s.method.name().to_string()];
        row.extend(
            s.mean
                .per_objective_means
                .iter()
                .map(|v| format!("{:.2}", 100.0 * v)),
        );
        row.push(format!("{:.2}", 100.0 * s.mean.expected_product));
        row.push(format!("{:.2}", 100.0 * s.mean.mean_of_means));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    let inner = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    finish(path, inner)
}

/// Which step was selected for each method and seed.
pub fn write_selection(path: &Path, summaries: &[MethodSummary]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["method", "seed", "step", "expected_product"])
        .map_err(|e| csv_error(path, e))?;
    for s in summaries {
        for sel in &s.per_seed {
            w.write_record([
                s.method.name().to_string(),
                sel.seed.to_string(),
                sel.step.to_string(),
                sel.metrics.expected_product.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
    }
    let inner = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    finish(path, inner)
}

pub fn write_aborts(path: &Path, aborts: &[(Method, Abort)]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["method", "seed", "step", "reason"])
        .map_err(|e| csv_error(path, e))?;
    for (method, a) in aborts {
        w.write_record([
            method.name().to_string(),
            a.seed.to_string(),
            a.step.to_string(),
            a.reason.clone(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    let inner = w
        .into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?;
    finish(path, inner)
}

/// The resolved run configuration, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub method: Method,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub k: usize,
    pub k_hat: usize,
    pub eval_every: usize,
    pub eval_samples: usize,
    pub env: EnvParams,
    pub policy: PolicySettings,
    pub optimizer: AdamConfig,
    pub solver: SolverSettings,
}

impl From<&TrainConfig> for RunRecord {
    fn from(c: &TrainConfig) -> Self {
        Self {
            method: c.method,
            seeds: c.seeds.clone(),
            steps: c.steps,
            k: c.k,
            k_hat: c.k_hat,
            eval_every: c.eval_every,
            eval_samples: c.eval_samples,
            env: c.env.clone(),
            policy: c.policy.clone(),
            optimizer: c.optimizer,
            solver: c.solver,
        }
    }
}

/// Final parameters of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub seed: u64,
    pub step: usize,
    pub params: Vec<f64>,
    pub run: RunRecord,
    pub policy: PolicyConfig,
}

impl Checkpoint {
    pub fn new(cfg: &TrainConfig, seed: u64, step: usize, params: &PolicyParams) -> Self {
        Self {
            seed,
            step,
            params: params.flat().to_vec(),
            run: RunRecord::from(cfg),
            policy: params.config().clone(),
        }
    }

    pub fn to_params(&self) -> CliResult<PolicyParams> {
        Ok(PolicyParams::from_flat(
            self.policy.clone(),
            self.params.clone(),
        )?)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = toml::to_string(self).map_err(|e| CliError::format("checkpoint", e))?;
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::format(path.display().to_string(), e))
    }
}
