//! Command-line entry point: run campaigns, rebuild reports from logs, and
//! validate configs without touching the network.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ritfis::campaign::{report_from_log, run_campaign, PreparedCampaign, OUTCOME_LOG};
use ritfis::config::{load_config, Overrides};
use ritfis_core::report::{emit_report, ReportFormat};

#[derive(Parser)]
#[command(
    name = "ritfis",
    version,
    about = "Input-robustness testing for LLM-backed text classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign: search every sampled example and write the outcome
    /// log and reports. Resumes if the output directory already holds a log.
    Run {
        /// Campaign config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Search the full prompt+example input instead of the example alone.
        #[arg(long)]
        perturb_prompt: bool,
        /// Output directory (overrides `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild a report from an existing outcome log.
    Report {
        /// Path to an outcomes.jsonl written by `ritfis run`.
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
    },
    /// Check a config file: syntax, key ranges, and referenced files.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            perturb_prompt,
            out,
        } => {
            let mut loaded = load_config(&config).map_err(|e| e.to_string())?;
            loaded.apply(&Overrides {
                seed,
                workers,
                perturb_prompt,
                out_dir: out,
            });
            let prepared = PreparedCampaign::prepare(loaded).map_err(|e| e.to_string())?;
            let total = prepared.samples.len();
            let summary = run_campaign(&prepared).map_err(|e| e.to_string())?;
            print!(
                "{}",
                emit_report(&summary.report, ReportFormat::Markdown)
            );
            eprintln!(
                "{} of {total} examples logged to {}",
                summary.report.metrics.n,
                summary.out_dir.join(OUTCOME_LOG).display()
            );
            if summary.completed {
                Ok(ExitCode::SUCCESS)
            } else {
                Err("campaign incomplete: some examples are missing from the log".to_string())
            }
        }
        Command::Report { log, format } => {
            let report = report_from_log(&log).map_err(|e| e.to_string())?;
            print!("{}", emit_report(&report, format.into()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let loaded = load_config(&config).map_err(|e| e.to_string())?;
            let prepared = PreparedCampaign::prepare(loaded).map_err(|e| e.to_string())?;
            println!(
                "ok: dataset {} ({} examples), method {}, model {}",
                prepared.config.dataset_name(),
                prepared.samples.len(),
                prepared.config.method.preset.name(),
                prepared.model.describe()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
