use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use ris_core::em::{build_reference_scenario, Engine};
use ris_core::experiment::{evaluate, run_experiment, write_validation, ExperimentSpec, ValidationReport};
use ris_core::optimizer::CoordinateOrder;

const THREADS_ENV: &str = "RIS_TWINSOLVER_THREADS";

#[derive(Parser)]
#[command(name = "ris-twinsolver", version, about = "Analytical vs PEEC channel gain of RIS-assisted links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep RIS sizes and write gain tables, plot series and the validation report.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Also optimize the RIS terminations.
        #[arg(long)]
        optimize: bool,
        /// Output directory [default: config `out_dir`, else results].
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Fill the runtime_ms column (makes gains.csv run dependent).
        #[arg(long)]
        timings: bool,
    },
    /// Run both engines with optimization and check the cross-engine gates only.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Where to write validation.csv, block_discrepancy.csv and report.txt.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Built-in scenario utilities.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Print the built-in deployment as a scenario file.
    Print {
        #[arg(long, default_value_t = 4)]
        size: usize,
        /// Real part of every RIS termination (ohm).
        #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
        termination: f64,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated RIS sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Engine to run; repeat or use `both`.
    #[arg(long, value_enum)]
    engine: Vec<EngineArg>,
    /// Shuffle the coordinate order every sweep with this seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Analytical,
    Peec,
    Both,
}

impl CommonArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::from_toml_file(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(sizes) = &self.sizes {
            spec.ris_sizes = sizes.clone();
        }
        if !self.engine.is_empty() {
            spec.engines = self
                .engine
                .iter()
                .flat_map(|e| match e {
                    EngineArg::Analytical => vec![Engine::Analytical],
                    EngineArg::Peec => vec![Engine::Peec],
                    EngineArg::Both => vec![Engine::Analytical, Engine::Peec],
                })
                .collect();
        }
        if let Some(seed) = self.seed {
            spec.seed = seed;
            spec.optimizer.coordinate_order = CoordinateOrder::RandomPermutation { seed };
        }
        Ok(spec)
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value.trim().parse().with_context(|| format!("{THREADS_ENV}={value} is not a thread count"))?;
    if n == 0 {
        bail!("{THREADS_ENV} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn finish(report: &ValidationReport) -> ExitCode {
    print!("{report}");
    if report.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    match cli.command {
        Command::Run { common, optimize, out_dir, timings } => {
            let mut spec = common.spec()?;
            spec.optimize |= optimize;
            spec.timings |= timings;
            spec.out_dir = Some(out_dir.or(spec.out_dir.take()).unwrap_or_else(|| PathBuf::from("results")));
            let report = run_experiment(&spec)?;
            Ok(finish(&report))
        }
        Command::Validate { common, out_dir } => {
            let mut spec = common.spec()?;
            spec.engines = vec![Engine::Analytical, Engine::Peec];
            spec.optimize = true;
            let report = evaluate(&spec)?;
            if let Some(dir) = out_dir.or(spec.out_dir.take()) {
                write_validation(&report, &dir)?;
            }
            Ok(finish(&report))
        }
        Command::Scenario { action: ScenarioAction::Print { size, termination } } => {
            let s = build_reference_scenario(size, Complex64::new(termination, 0.0))?;
            print!("{}", s.to_toml_string()?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
