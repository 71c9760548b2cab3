use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regbandit::experiment::{probe_and_emit, run_and_emit, WORKERS_ENV};
use regbandit::{Error, Overrides, Parallelism, Regime, SweepSpec};

/// Regularized contextual bandit sweeps.
#[derive(Debug, Parser)]
#[command(name = "regbandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a (beta, T, rep) sweep and write the results CSV.
    Run {
        /// TOML sweep file; flags below override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Horizons, comma separated.
        #[arg(long = "T", value_name = "T", value_delimiter = ',', num_args = 1..)]
        horizons: Option<Vec<u64>>,
        /// Smoothness exponents in (0, 1], comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        beta: Option<Vec<f64>>,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// slow, fast or intermediate.
        #[arg(long)]
        regime: Option<String>,
        /// Results CSV; printed to stdout when neither this nor the file sets it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the margin tail exponents of the configured environment.
    ProbeMargin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Validation { .. } | Error::Config(_) | Error::Input(_) => 1,
        _ => 2,
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run {
            config,
            horizons,
            beta,
            reps,
            seed,
            regime,
            out,
        } => {
            let overrides = Overrides {
                horizons,
                betas: beta,
                reps,
                seed,
                regime: regime.as_deref().map(str::parse::<Regime>).transpose()?,
                out,
            };
            let spec = match &config {
                Some(path) => SweepSpec::from_file(path, &overrides)?,
                None => SweepSpec::from_overrides(&overrides)?,
            };
            let parallelism = Parallelism::from_env(WORKERS_ENV);
            log::info!(
                "running {} configurations with {parallelism:?}",
                spec.betas.len() * spec.horizons.len() * spec.reps as usize
            );
            let output = run_and_emit(&spec, parallelism)?;
            if spec.out.is_some() {
                print!("{}", output.summary);
            } else {
                std::io::stdout().write_all(&output.csv)?;
                eprint!("{}", output.summary);
            }
            for failure in &output.failures {
                log::error!(
                    "beta={} T={} rep={} failed: {}",
                    failure.id.beta,
                    failure.id.horizon,
                    failure.id.rep,
                    failure.message
                );
            }
            Ok(if output.failures.is_empty() { 0 } else { 2 })
        }
        Command::ProbeMargin { config, out } => {
            let spec = SweepSpec::from_file(&config, &Overrides::default())?;
            print!("{}", probe_and_emit(&spec, &out)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
