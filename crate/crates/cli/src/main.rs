use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sentiprobe_cli::{build_backend, pipeline, BackendKind, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "sentiprobe", version, about = "Sentiment-bias audits for masked language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    /// Scoring service base URL (falls back to SENTIPROBE_ENDPOINT).
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Shift-test repeat counts, e.g. 5,10,15.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Association-test thresholds in standard deviations, e.g. 0.5,1,1.5.
    #[arg(long, global = true, value_delimiter = ',')]
    m: Option<Vec<f64>>,
    #[arg(long, global = true)]
    per_class: Option<usize>,
    #[arg(long, global = true)]
    template: Option<String>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Load lexicons and reviews, write the word selection.
    Ingest,
    /// Run the association test.
    Sat,
    /// Run the shift test.
    Sst,
    /// Compare the two tests' biased words.
    Analyze,
    /// ingest, sat, sst and analyze in order.
    All,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(Overrides {
        backend: cli.backend,
        endpoint: cli.endpoint,
        out_dir: cli.out,
        ks: cli.k,
        thresholds: cli.m,
        per_class_count: cli.per_class,
        template: cli.template,
        workers: cli.workers,
    });
    cfg.validate()?;

    match cli.command {
        Command::Ingest => {
            pipeline::run_ingest(&cfg)?;
        }
        Command::Sat => {
            pipeline::run_sat(&cfg, build_backend(&cfg)?.as_ref())?;
        }
        Command::Sst => {
            pipeline::run_sst(&cfg, build_backend(&cfg)?.as_ref())?;
        }
        Command::Analyze => {
            pipeline::run_analyze(&cfg)?;
        }
        Command::All => {
            // fail on bad corpus input before contacting the backend
            pipeline::run_ingest(&cfg)?;
            let backend = build_backend(&cfg)?;
            pipeline::run_sat(&cfg, backend.as_ref())?;
            pipeline::run_sst(&cfg, backend.as_ref())?;
            pipeline::run_analyze(&cfg)?;
        }
    }
    println!("reports in {}", cfg.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
