use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use persuasion_cli::config::{ConfigError, ExperimentConfig, SimulateSpec};
use persuasion_cli::experiments::{self, HeterogeneityParams};
use persuasion_cli::output;
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "persuasion", version, about = "Optimal information timing for a persuading sender")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Overrides `simulate.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps and searches (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Optimal policy for the configured sources and budget.
    Solve,
    /// Optimal value and active set over the `sweep_budget` grid.
    SweepBudget,
    /// Optimal value over the `heterogeneity` skew grid.
    SweepHeterogeneity,
    /// Monte-Carlo check of the equilibrium (or configured) policy.
    Simulate,
    /// Brute-force grid search compared with the analytical solver.
    Oracle,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] persuasion_core::Error),
    #[error("output error: {0}")]
    Io(#[from] io::Error),
    #[error("output error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Solver(e) if e.is_numerical() => 3,
            CliError::Config(ConfigError::Model(e)) if e.is_numerical() => 3,
            CliError::Config(_) | CliError::Solver(_) | CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn boundaries_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.boundaries.csv"))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {threads} threads: {e}")))?;
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let config = ExperimentConfig::from_path(path)?;
    let out_path = cli.output.as_deref();

    match cli.command {
        Command::Solve => {
            let instance = config.budgeted_instance()?;
            let report = experiments::run_solve(instance, config.max_sources)?;
            eprintln!(
                "active set {} | sender {:.6} | receiver {:.6}",
                report.active_set, report.sender_utility, report.receiver_utility
            );
            let mut out = open_output(out_path)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => output::write_json(&mut out, &report)?,
                Format::Csv => output::write_solve_rows(&mut out, &report)?,
            }
            out.flush()?;
        }
        Command::SweepBudget => {
            let instance = config.sources_instance()?;
            let grid = config.section(&config.sweep_budget, "sweep_budget")?;
            let sweep = experiments::sweep_budget(instance, grid, config.max_sources)?;
            for b in &sweep.boundaries {
                eprintln!("boundary {} -> {} at R = {:.4}", b.from, b.to, b.estimate);
            }
            let mut out = open_output(out_path)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => output::write_json(&mut out, &sweep)?,
                Format::Csv => {
                    output::write_budget_rows(&mut out, &sweep.rows)?;
                    if let Some(p) = out_path {
                        output::write_boundaries(File::create(boundaries_path(p))?, &sweep.boundaries)?;
                    }
                }
            }
            out.flush()?;
        }
        Command::SweepHeterogeneity => {
            let spec = config.section(&config.heterogeneity, "heterogeneity")?;
            let budget = config
                .instance
                .as_ref()
                .map(|i| i.budget())
                .filter(|_| config.has_budget)
                .ok_or_else(|| ConfigError::Invalid("missing top-level `budget`".into()))?;
            let params = HeterogeneityParams {
                n: spec.n,
                total: spec.total,
                lambda: spec.lambda,
                q: config.q,
                budget,
            };
            let rows = experiments::sweep_heterogeneity(&params, &spec.k, config.max_sources)?;
            let mut out = open_output(out_path)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => output::write_json(&mut out, &rows)?,
                Format::Csv => output::write_heterogeneity_rows(&mut out, &rows)?,
            }
            out.flush()?;
        }
        Command::Simulate => {
            let instance = config.budgeted_instance()?;
            let mut spec = config.simulate.clone().unwrap_or_else(SimulateSpec::default);
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let records = experiments::run_simulation(
                instance,
                config.simulate_policy.as_deref(),
                &spec,
                config.max_sources,
            )?;
            let mut out = open_output(out_path)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => output::write_json(&mut out, &records)?,
                Format::Csv => output::write_simulation_rows(&mut out, &records)?,
            }
            out.flush()?;
        }
        Command::Oracle => {
            let instance = config.budgeted_instance()?;
            let grid = config.oracle.unwrap_or_default();
            let report = experiments::run_oracle(instance, &grid)?;
            eprintln!(
                "oracle {:.6} | solver {:.6} | gap {:.3e}",
                report.oracle_utility, report.solver_utility, report.gap
            );
            let mut out = open_output(out_path)?;
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => output::write_json(&mut out, &report)?,
                Format::Csv => {
                    return Err(CliError::Usage("oracle output is JSON only".into()));
                }
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
