use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod table;
mod validate;

use config::{Format, RunConfig};
use error::CliError;

/// Sensitivity sweeps, measurement coefficients, resolution limits and
/// validation runs for two-source separation estimation.
#[derive(Parser, Debug)]
#[command(name = "superres", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sensitivity M over a separation grid.
    SweepSensitivity(Common),
    /// Optimal measurement coefficients over a separation grid.
    Coefficients(Common),
    /// Minimal resolvable distance against detected photon number.
    Dmin(Common),
    /// Closed-form and Monte Carlo cross-checks.
    Validate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides SUPERRES_OUT and [output].path. Stdout if unset.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads; overrides SUPERRES_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn threads(arg: Option<usize>) -> Result<Option<usize>, CliError> {
    if arg.is_some() {
        return Ok(arg);
    }
    match std::env::var("SUPERRES_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("SUPERRES_THREADS: not a thread count: {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (name, common) = match &cli.command {
        Command::SweepSensitivity(c) => ("sweep-sensitivity", c),
        Command::Coefficients(c) => ("coefficients", c),
        Command::Dmin(c) => ("dmin", c),
        Command::Validate(c) => ("validate", c),
    };
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let cfg = RunConfig::parse(&text)?;

    if let Some(n) = threads(common.threads)? {
        if n == 0 {
            return Err(CliError::Config("thread count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let format = match common.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => cfg.output.format,
    };
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var_os("SUPERRES_OUT").map(PathBuf::from))
        .or_else(|| cfg.output.path.clone());

    log::info!("running {name}");
    let (table, pass) = match &cli.command {
        Command::SweepSensitivity(_) => (commands::sweep_sensitivity(&cfg, &text)?, true),
        Command::Coefficients(_) => (commands::coefficients(&cfg, &text)?, true),
        Command::Dmin(_) => (commands::dmin(&cfg, &text)?, true),
        Command::Validate(_) => validate::validate(&cfg, &text)?,
    };

    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(&path)?);
            table.write(format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            table.write(format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("superres: validation failed; see the FAIL rows of the report");
            CliError::Validation(String::new()).exit_code()
        }
        Err(e) => {
            eprintln!("superres: {e}");
            e.exit_code()
        }
    }
}
