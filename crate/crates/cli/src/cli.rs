//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use moprompt_core::env::EnvKind;
use moprompt_core::train::{Method, Profile};

use crate::config::{self, FileConfig, Overrides};
use crate::error::{exit, CliError, CliResult};
use crate::run::{self, Report};

#[derive(Debug, Parser)]
#[command(
    name = "moprompt",
    version,
    about = "Multi-objective prompt optimization on synthetic environments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one method on every configured seed.
    Train(RunArgs),
    /// Train all four methods and write the comparison table.
    Compare(RunArgs),
    /// Rebuild pairwise scatter files from dumped eval samples.
    Scatter(ScatterArgs),
}

#[derive(Debug, Clone)]
pub struct SeedList(pub Vec<u64>);

fn seed_list(s: &str) -> Result<SeedList, String> {
    config::parse_seed_list(s).map(SeedList)
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML config file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub env: Option<EnvKind>,
    /// Number of objectives.
    #[arg(long)]
    pub objectives: Option<usize>,
    /// Comma-separated seeds, e.g. `0,1,2`.
    #[arg(long = "seed", value_parser = seed_list)]
    pub seeds: Option<SeedList>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub profile: Option<Profile>,
    /// Record elapsed seconds in metrics.csv (makes output nondeterministic).
    #[arg(long)]
    pub wall_clock: bool,
}

#[derive(Debug, Args)]
pub struct ScatterArgs {
    /// Directory to write scatter files into.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Samples file; defaults to `<out-dir>/samples.jsonl`.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> CliResult<config::RunSpec> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        config::resolve(
            file,
            Overrides {
                profile: self.profile,
                method: self.method,
                env: self.env,
                objectives: self.objectives,
                seeds: self.seeds.clone().map(|s| s.0),
                steps: self.steps,
                out_dir: self.out_dir.clone(),
                wall_clock: self.wall_clock,
            },
        )
    }
}

fn print_report(report: &Report, table: bool) {
    for s in &report.summaries {
        let steps: Vec<String> = s
            .per_seed
            .iter()
            .map(|p| format!("{}@{}", p.seed, p.step))
            .collect();
        let means: Vec<String> = s
            .mean
            .per_objective_means
            .iter()
            .map(|v| format!("{:.2}", 100.0 * v))
            .collect();
        if table {
            println!(
                "{:8} objectives [{}] product {:.2} average {:.2} (selected {})",
                s.method.name(),
                means.join(", "),
                100.0 * s.mean.expected_product,
                100.0 * s.mean.mean_of_means,
                steps.join(" ")
            );
        } else {
            println!(
                "{}: best checkpoints {} mean product {:.2}",
                s.method.name(),
                steps.join(" "),
                100.0 * s.mean.expected_product
            );
        }
    }
    for path in &report.files {
        println!("wrote {}", path.display());
    }
}

fn finish(report: CliResult<Report>, table: bool) -> CliResult<u8> {
    let report = report?;
    print_report(&report, table);
    let aborts = report.aborts();
    for (method, a) in &aborts {
        eprintln!(
            "{} seed {} aborted at step {}: {}",
            method.name(),
            a.seed,
            a.step,
            a.reason
        );
    }
    Ok(if aborts.is_empty() {
        exit::OK
    } else {
        exit::NUMERICAL_ABORT
    })
}

pub fn execute(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Train(args) => finish(run::train_command(&args.resolve()?), false),
        Command::Compare(args) => finish(run::compare_command(&args.resolve()?), true),
        Command::Scatter(args) => {
            for path in run::scatter_command(&args.out_dir, args.samples.as_deref())? {
                println!("wrote {}", path.display());
            }
            Ok(exit::OK)
        }
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::CONFIG_OR_IO
            } else {
                exit::OK
            });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                CliError::Core(moprompt_core::Error::NonFinite(_)) => exit::NUMERICAL_ABORT,
                _ => exit::CONFIG_OR_IO,
            };
            ExitCode::from(code)
        }
    }
}
