mod args;
mod commands;
mod style;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, ConfigFile, Overlay};

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or parameters: exit 2.
    Usage(String),
    /// Missing files, malformed data, numerical failures: exit 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<qnoise::Error> for CliError {
    fn from(e: qnoise::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parameter errors raised while validating inputs are usage errors;
/// anything else is a runtime failure.
pub fn classify(e: qnoise::Error) -> CliError {
    match e {
        qnoise::Error::InvalidParameter(m) | qnoise::Error::InvalidArgument(m) => CliError::Usage(m),
        other => CliError::Runtime(other.into()),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> CliResult<()> {
    let config = load_config(cli.config.as_deref())?;
    if let Some(threads) = cli.threads.or(config.threads) {
        if threads == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(e.into()))?;
    }
    let out = cli.out;
    match cli.command {
        Command::Truncate(a) => commands::truncate(args::TruncateArgs { out, ..a }.overlay(config.truncate)),
        Command::Generate(a) => commands::generate(args::GenerateArgs { out, ..a }.overlay(config.generate)),
        Command::Fit(a) => commands::fit(args::FitArgs { out, ..a }.overlay(config.fit)),
        Command::Capacity(a) => commands::capacity(args::CapacityArgs { out, ..a }.overlay(config.capacity)),
        Command::Compare(a) => commands::compare(args::CompareArgs { out, ..a }.overlay(config.compare)),
    }
}

/// The error and its causes, skipping causes already quoted by the message
/// before them.
fn chain(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !msg.ends_with(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
    }
    msg
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("{} {msg}", style::error_label());
            eprintln!("run `qnoise --help` for usage");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("{} {}", style::error_label(), chain(&e));
            ExitCode::from(1)
        }
    }
}
