//! Command-line interface.
//!
//! ```text
//! pkgsv simulate   --config run.json --out trajectories.csv
//! pkgsv fit        --config run.json --data trajectories.csv --out posterior.json
//! pkgsv sv         --config run.json --out sv.csv [--json sv.json] [--engine analytic] [--exact]
//! pkgsv perm-study --dims 5,10,20 --count 100 --methods bmt,tfww --replications 36 --seed 1 --out study.csv
//! pkgsv bench      --tasks policy-predictive,policy-variance --horizons 4,8,16 --seed 1 --out bench.csv
//! ```

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    check_efficiency, cmd_bench, cmd_fit, cmd_perm_study, cmd_simulate, cmd_sv, exact_report, read_records, timed_batch,
    write_report, write_study_csv, StudyRow, StudySettings, SvOptions, EFFICIENCY_TOLERANCE,
};
pub use config::{AnalysisConfig, AnyModel, Engine, InputKind, ModelConfig, PolicyConfig, RunConfig};

use crate::analytic::{BenchSettings, BenchTask};
use crate::error::{Error, Result};
use crate::sampling::{CubeSource, PermutationMethod};

#[derive(Debug, Parser)]
#[command(name = "pkgsv", version, about = "Shapley-value sensitivity analysis of stochastic process models")]
pub struct Cli {
    /// Worker threads for the engines (default: all cores; `bench` defaults to 1).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories and write them as a trajectory table.
    Simulate(SimulateArgs),
    /// Fit a posterior ensemble to a trajectory table.
    Fit(FitArgs),
    /// Estimate Shapley values.
    Sv(SvArgs),
    /// Compare permutation samplers by discrepancy and running time.
    PermStudy(StudyArgs),
    /// Time the reuse engines against brute force.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `simulate.batches`.
    #[arg(long)]
    pub batches: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Trajectory table; overrides `io.data`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SvArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Long-form CSV: input_label, output_label, sv, mc_variance.
    #[arg(long)]
    pub out: PathBuf,
    /// Full report with diagnostics.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Inputs by outputs table.
    #[arg(long)]
    pub wide: Option<PathBuf>,
    #[arg(long, value_parser = parse_engine)]
    pub engine: Option<Engine>,
    /// Enumerate every coalition instead of sampling permutations.
    #[arg(long)]
    pub exact: bool,
    /// Posterior ensemble; overrides `io.posterior`.
    #[arg(long)]
    pub posterior: Option<PathBuf>,
    /// Save the permutation batch used.
    #[arg(long)]
    pub save_permutations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![5usize, 10, 20])]
    pub dims: Vec<usize>,
    /// Permutations per batch.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_values = ["bmt", "sct", "tfww", "tfww-vrt"])]
    pub methods: Vec<PermutationMethod>,
    #[arg(long, default_value_t = 36)]
    pub replications: usize,
    /// Cube source for every method (default: each method's own).
    #[arg(long, value_parser = parse_cube)]
    pub cube: Option<CubeSource>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_task, default_values = ["policy-predictive", "policy-variance"])]
    pub tasks: Vec<BenchTask>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 8, 16])]
    pub horizons: Vec<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 4)]
    pub permutations: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_engine(s: &str) -> std::result::Result<Engine, String> {
    match s {
        "simulation" => Ok(Engine::Simulation),
        "analytic" => Ok(Engine::Analytic),
        _ => Err(format!("unknown engine {s:?} (expected simulation or analytic)")),
    }
}

fn parse_method(s: &str) -> std::result::Result<PermutationMethod, String> {
    PermutationMethod::parse(s).map_err(|e| e.to_string())
}

fn parse_cube(s: &str) -> std::result::Result<CubeSource, String> {
    match s {
        "pseudo" => Ok(CubeSource::Pseudo),
        "sobol" => Ok(CubeSource::Sobol),
        _ => Err(format!("unknown cube source {s:?} (expected pseudo or sobol)")),
    }
}

fn parse_task(s: &str) -> std::result::Result<BenchTask, String> {
    BenchTask::parse(s).map_err(|e| e.to_string())
}

/// Run `f` on a dedicated pool when a thread count is given.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::invalid("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(f),
    }
}

pub fn run_from_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.print()?;
            return Ok(());
        }
        Err(e) => return Err(Error::invalid(e.to_string().trim_end().to_string())),
    };
    run(cli)
}

pub fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Simulate(a) => {
            let (cfg, _) = RunConfig::load(&a.config)?;
            with_threads(threads, || {
                let mut buf = Vec::new();
                cmd_simulate(&cfg, a.batches, &mut buf)?;
                std::fs::write(&a.out, buf)?;
                Ok(())
            })
        }
        Command::Fit(a) => {
            let (cfg, dir) = RunConfig::load(&a.config)?;
            let data = a
                .data
                .or_else(|| cfg.io.data.as_ref().map(|p| dir.join(p)))
                .ok_or_else(|| Error::invalid("fit needs --data or io.data"))?;
            let records = read_records(&cfg, &data)?;
            with_threads(threads, || {
                let mut buf = Vec::new();
                cmd_fit(&cfg, &records, &mut buf)?;
                std::fs::write(&a.out, buf)?;
                Ok(())
            })
        }
        Command::Sv(a) => {
            let (cfg, dir) = RunConfig::load(&a.config)?;
            let opts = SvOptions {
                engine: a.engine,
                exact: a.exact,
                posterior: a.posterior.clone(),
                permutations_out: a.save_permutations.clone(),
            };
            let report = with_threads(threads, || cmd_sv(&cfg, &dir, &opts))?;
            write_report(&report, &a.out, a.json.as_deref(), a.wide.as_deref())
        }
        Command::PermStudy(a) => {
            let settings = StudySettings {
                dims: a.dims,
                count: a.count,
                methods: a.methods,
                replications: a.replications,
                cube: a.cube,
                seed: a.seed,
            };
            let rows = with_threads(threads, || cmd_perm_study(&settings))?;
            let mut buf = Vec::new();
            write_study_csv(&mut buf, &rows, settings.count, settings.replications)?;
            std::fs::write(&a.out, buf)?;
            Ok(())
        }
        Command::Bench(a) => {
            let settings = BenchSettings { n: a.n, m: a.m, permutations: a.permutations, repeats: a.repeats };
            let mut buf = Vec::new();
            with_threads(threads.or(Some(1)), || cmd_bench(&a.tasks, &a.horizons, settings, a.seed, &mut buf))?;
            std::fs::write(&a.out, buf)?;
            Ok(())
        }
    }
}
