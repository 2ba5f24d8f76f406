//! `vlcsim` command-line front end: load a configuration, run one
//! experiment preset and write its tables.
//!
//! Exit codes: 0 on success, 2 for configuration errors (including unknown
//! experiment names), 3 for runtime failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use vlcsim::config::{load_config, save_config, SimulationConfig};
use vlcsim::experiment::{Experiment, ExperimentError};
use vlcsim::table::{export, Format, Provenance};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vlcsim", version, about = "Stochastic channel simulator for indoor visible light links")]
struct Args {
    /// TOML configuration; omitted sections and keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment preset to run.
    #[arg(long, required_unless_present = "list")]
    experiment: Option<String>,
    /// Master seed, overriding `ensemble.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Monte-Carlo ensemble size, overriding `ensemble.size`.
    #[arg(long)]
    ensemble: Option<usize>,
    /// Worker threads; defaults to the number of logical CPUs.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Print the available experiments and exit.
    #[arg(long)]
    list: bool,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::UnknownExperiment(_) | ExperimentError::Config(_) => Failure::Config(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn effective_config(args: &Args) -> Result<SimulationConfig> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => SimulationConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.ensemble.seed = seed;
    }
    if let Some(n) = args.ensemble {
        config.ensemble.size = n;
    }
    config.validate()?;
    Ok(config)
}

fn write_outputs(
    out: &Path,
    config: &SimulationConfig,
    experiment: Experiment,
    format: Format,
    tables: &[vlcsim::table::ResultTable],
) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let provenance = Provenance {
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: experiment.name().to_string(),
        seed: config.ensemble.seed,
        config_hash: config.hash(),
    };
    for table in tables {
        let path = out.join(format!("{}.{}", table.name, format.extension()));
        export(table, &provenance, &path, format).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    let path = out.join("config.toml");
    save_config(config, &path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run(args: Args) -> Result<(), Failure> {
    if args.list {
        for name in Experiment::names() {
            println!("{name}");
        }
        return Ok(());
    }
    let name = args.experiment.as_deref().expect("clap requires --experiment");
    let experiment: Experiment = name.parse().map_err(Failure::from)?;
    let config = effective_config(&args).map_err(Failure::Config)?;

    let tables = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .context("starting the worker pool")
            .map_err(Failure::Runtime)?
            .install(|| experiment.run(&config)),
        None => experiment.run(&config),
    }?;
    write_outputs(&args.out, &config, experiment, args.format.into(), &tables).map_err(Failure::Runtime)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
