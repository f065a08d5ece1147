//! `mislearn` command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mislearn::error::{EXIT_OK, EXIT_USAGE};
use mislearn::pipeline::{cmd_fit, cmd_regress, cmd_report, cmd_simulate, cmd_xsec, RunSummary};
use mislearn::{PipelineConfig, PipelineError};

#[derive(Debug, Parser)]
#[command(name = "mislearn", version, about = "Belief mislearning around factor-premium breaks")]
struct Cli {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Synthetic checks of the theory.
    Simulate,
    /// Stable and break model fits, Δ and model comparison.
    Fit,
    /// Forward outcomes and predictive regressions.
    Regress,
    /// Decomposition, IVOL tertiles, cross-sectional regressions, ranks.
    Xsec,
    /// Every stage in one run.
    Report,
}

fn run(cli: &Cli) -> Result<RunSummary, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(PipelineError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::Usage(format!("--threads: {e}")))?;
    }
    let out = cfg.output.clone();
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg, &out),
        Command::Fit => cmd_fit(&cfg, &out),
        Command::Regress => cmd_regress(&cfg, &out),
        Command::Xsec => cmd_xsec(&cfg, &out),
        Command::Report => cmd_report(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(&cli) {
        Ok(summary) => {
            log::info!(
                "{} file(s) written, {} warning(s)",
                summary.files.len(),
                summary.warnings.len()
            );
            ExitCode::from(EXIT_OK)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
