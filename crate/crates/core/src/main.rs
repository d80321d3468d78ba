use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mimo_sirp::harness::{
    crb_curve, is_iterative, simulate, sweep_with_progress, write_crb_csv, write_sweep_csv, EstimatorSelection,
    Experiment, ExperimentConfig,
};
use mimo_sirp::Error;

#[derive(Parser)]
#[command(name = "mimo-sirp", version, about = "MIMO radar DOD/DOA estimation in compound-Gaussian clutter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound curve only: CSV with columns sweep_value,crb_db.
    Crb(Common),
    /// One trial with full estimator output as JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Index into the sweep values.
        #[arg(long, default_value_t = 0)]
        sweep_index: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Full Monte Carlo sweep to CSV.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (JSON). Built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated estimator names.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    /// Comma-separated iteration counts for the iterative estimators.
    #[arg(long, value_delimiter = ',')]
    iterations: Option<Vec<usize>>,
    #[arg(long)]
    quiet: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Config(msg),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<(Experiment, Option<PathBuf>), Failure> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = common.trials {
        config.trials = t;
    }
    if let Some(s) = common.seed {
        config.base_seed = s;
    }
    if let Some(names) = &common.estimators {
        config.estimators = names
            .iter()
            .map(|n| n.trim())
            .filter(|n| !n.is_empty())
            .map(|n| {
                let iterations = config
                    .estimators
                    .iter()
                    .find(|e| e.name == n)
                    .map(|e| e.iterations.clone())
                    .unwrap_or_else(|| vec![2]);
                EstimatorSelection {
                    name: n.to_string(),
                    iterations,
                }
            })
            .collect();
    }
    if let Some(iters) = &common.iterations {
        for sel in config.estimators.iter_mut().filter(|s| is_iterative(&s.name)) {
            sel.iterations = iters.clone();
        }
    }
    let out = common.out.clone().or_else(|| config.output.clone());
    Ok((config.build()?, out))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Crb(common) => {
            let (exp, out) = load(&common)?;
            let rows = crb_curve(&exp)?;
            write_crb_csv(&rows, open_output(out.as_deref())?)?;
        }
        Command::Simulate {
            common,
            sweep_index,
            trial,
        } => {
            let (exp, out) = load(&common)?;
            let report = simulate(&exp, sweep_index, trial)?;
            let mut w = open_output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Failure::Runtime(e.to_string()))?;
            writeln!(w).and_then(|_| w.flush()).map_err(|e| Failure::Runtime(e.to_string()))?;
        }
        Command::Sweep(common) => {
            let (exp, out) = load(&common)?;
            let quiet = common.quiet;
            let result = sweep_with_progress(&exp, |done, total| {
                if !quiet {
                    eprintln!("sweep value {done}/{total} done");
                }
            })?;
            write_sweep_csv(&result, open_output(out.as_deref())?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
