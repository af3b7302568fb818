mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use adact_core::burden::BurdenInput;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

/// Train and evaluate single-hidden-layer networks with adaptive
/// piecewise-linear activations.
#[derive(Parser)]
#[command(name = "adact", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured dataset splits as CSV.
    Gen(ConfigArgs),
    /// Train one network and write its history, checkpoint and report.
    Train(ConfigArgs),
    /// k-fold cross-validation of the configured trainer.
    Xval {
        #[command(flatten)]
        args: ConfigArgs,
        /// Overrides eval.k_folds.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Print per-iteration multiply counts for every algorithm.
    Burden {
        #[arg(long = "inputs", short = 'n')]
        inputs: u64,
        #[arg(long = "hidden")]
        hidden: u64,
        #[arg(long = "outputs", short = 'm')]
        outputs: u64,
        #[arg(long = "patterns")]
        patterns: u64,
        #[arg(long = "hinges", default_value_t = 20)]
        hinges: u64,
        /// Emit CSV instead of a table.
        #[arg(long)]
        csv: bool,
    },
    /// Export prediction and activation-shape data from a finished run.
    Plotdata {
        /// Directory written by `adact train`.
        #[arg(long)]
        run: PathBuf,
        /// Where to write the CSVs; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides output.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides train.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides train.N_it.
    #[arg(long)]
    iterations: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            config.output.directory = out.clone();
        }
        if let Some(seed) = self.seed {
            config.train.seed = seed;
        }
        if let Some(n) = self.iterations {
            config.train.iterations = n;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Worker cap from `ADACT_THREADS`, defaulting to the available parallelism.
fn thread_count() -> Result<usize> {
    match std::env::var("ADACT_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("ADACT_THREADS must be a positive integer, got `{v}`"))?;
            anyhow::ensure!(n > 0, "ADACT_THREADS must be a positive integer, got `{v}`");
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => commands::cmd_gen(&args.load()?),
        Command::Train(args) => commands::cmd_train(&args.load()?),
        Command::Xval { args, folds } => {
            let mut config = args.load()?;
            if let Some(k) = folds {
                config.eval.k_folds = k;
                config.validate()?;
            }
            commands::cmd_xval(&config, thread_count()?)
        }
        Command::Burden {
            inputs,
            hidden,
            outputs,
            patterns,
            hinges,
            csv,
        } => {
            let dims = BurdenInput::new(inputs, hidden, outputs, patterns, hinges)?;
            if csv {
                print!("{}", commands::burden_csv(&dims));
            } else {
                print!("{}", commands::burden_table(&dims));
            }
            Ok(())
        }
        Command::Plotdata { run, out } => {
            let out = out.unwrap_or_else(|| run.clone());
            commands::cmd_plotdata(&run, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
