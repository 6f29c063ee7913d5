//! `vinecast`: config-driven ingestion, sentiment scoring, fitting,
//! forecasting and variant comparison.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Core(vinecast_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<vinecast_core::Error> for CliError {
    fn from(e: vinecast_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 1 for invalid configuration or inputs, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and align the dataset; writes frame.csv.
    Ingest,
    /// Daily lexicon scores and term frequencies of the text corpus.
    Sentiment,
    /// Fit marginals and vine on the training window; writes model.json.
    Fit,
    /// One-day-ahead forecast after the training window.
    Forecast,
    /// Rolling one-step backtest of the configured vine variant.
    Backtest,
    /// Backtest every configured variant and score them.
    Compare,
    /// Residual diagnostics of the fitted marginals.
    Diagnostics,
}

#[derive(Debug, Parser)]
#[command(name = "vinecast", version, about)]
struct Cli {
    /// JSON run configuration.
    #[arg(short, long, global = true, env = config::CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    draws: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Last training date (YYYY-MM-DD).
    #[arg(long, global = true)]
    split: Option<String>,
    #[arg(long, global = true)]
    refit_every: Option<usize>,
    /// Vine variant for fit/forecast/backtest: full, gaussian or independent.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Comma-separated variants for compare.
    #[arg(long, global = true, value_delimiter = ',')]
    variants: Vec<String>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override any config key: `--set vine.criterion=\"BIC\"`. Values are JSON,
    /// falling back to a plain string.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

fn absolute(p: &Path) -> Result<Value, CliError> {
    let abs = if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()?.join(p)
    };
    Ok(Value::String(abs.display().to_string()))
}

impl Cli {
    /// Flag values as config-key overrides, in a fixed order.
    fn overrides(&self) -> Result<Vec<(String, Value)>, CliError> {
        let mut o: Vec<(String, Value)> = Vec::new();
        if let Some(v) = self.seed {
            o.push(("seed".into(), v.into()));
        }
        if let Some(v) = self.draws {
            o.push(("draws".into(), v.into()));
        }
        if let Some(v) = self.alpha {
            o.push(("alpha".into(), v.into()));
        }
        if let Some(v) = self.horizon {
            o.push(("horizon".into(), v.into()));
        }
        if let Some(v) = &self.split {
            o.push(("split".into(), v.clone().into()));
        }
        if let Some(v) = self.refit_every {
            o.push(("refit_every".into(), v.into()));
        }
        if let Some(v) = &self.variant {
            o.push(("vine.variant".into(), v.to_ascii_lowercase().into()));
        }
        if !self.variants.is_empty() {
            let list = self.variants.iter().map(|v| Value::from(v.to_ascii_lowercase())).collect();
            o.push(("variants".into(), Value::Array(list)));
        }
        if let Some(v) = &self.output_dir {
            o.push(("output_dir".into(), absolute(v)?));
        }
        if let Some(v) = &self.model {
            o.push(("model".into(), absolute(v)?));
        }
        if let Some(v) = self.threads {
            o.push(("threads".into(), v.into()));
        }
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("--set expects KEY=VALUE, got `{s}`")))?;
            let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            o.push((k.trim().to_string(), value));
        }
        Ok(o)
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| {
        CliError::Validation(format!("no configuration given (use --config or set {})", config::CONFIG_ENV))
    })?;
    let cfg = config::load(path, &cli.overrides()?)?;
    if let Some(n) = cfg.config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("config key `threads`: {e}")))?;
    }
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Sentiment => commands::sentiment(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Forecast => commands::forecast(&cfg),
        Command::Backtest => commands::backtest(&cfg),
        Command::Compare => commands::compare(&cfg),
        Command::Diagnostics => commands::diagnostics(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vinecast_core::Error;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(Error::Schema("x".into())).exit_code(), 1);
        assert_eq!(CliError::Core(Error::Numeric("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Selection("x".into()).for_variable("Cases")).exit_code(), 2);
    }

    #[test]
    fn flags_become_overrides() {
        let cli = Cli::try_parse_from(["vinecast", "compare", "--seed", "4", "--variants", "full,Independent", "--set", "vine.criterion=BIC"]).unwrap();
        let o = cli.overrides().unwrap();
        assert_eq!(o[0], ("seed".to_string(), Value::from(4u64)));
        assert_eq!(o[1].1, serde_json::json!(["full", "independent"]));
        assert_eq!(o[2], ("vine.criterion".to_string(), Value::from("BIC")));
    }
}
