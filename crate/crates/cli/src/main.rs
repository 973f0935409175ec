use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dsner::commands::{cmd_evaluate, cmd_generate, cmd_report, cmd_train, ConfigFile};

/// Self-training NER on distantly supervised data.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus and gazetteer into `data_dir`.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set gen_noise_ratio=40`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Train both teacher-student pairs and write results into `output_dir`.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Print the effective configuration and exit.
        #[arg(long)]
        dry_run: bool,
        /// Keep every teacher label (sigma_ua = inf, sigma_co = 0).
        #[arg(long)]
        no_utl: bool,
        /// Disable transfer between students (delta = 0).
        #[arg(long)]
        no_scl: bool,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Score a saved checkpoint on a CoNLL file.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Merge run results into one CSV.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, overrides } => {
            let cfg = ConfigFile::load(&config, &overrides)?;
            let summary = cmd_generate(&cfg)?;
            eprintln!("wrote corpus to {}", cfg.data_dir.display());
            writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&summary.noise)?
            )?;
        }
        Command::Train {
            config,
            dry_run,
            no_utl,
            no_scl,
            mut overrides,
        } => {
            if no_utl {
                overrides.extend(["sigma_ua=inf".to_string(), "sigma_co=0".to_string()]);
            }
            if no_scl {
                overrides.push("delta=0".to_string());
            }
            let cfg = ConfigFile::load(&config, &overrides)?;
            cfg.validate()?;
            if dry_run {
                write!(std::io::stdout(), "{}", cfg.effective_toml()?)?;
                return Ok(());
            }
            let result = cmd_train(&cfg).context("training failed")?;
            eprintln!(
                "best: epoch {} {:?} dev F1 {:.4}; test F1 {:.4}; results in {}",
                result.best.epoch,
                result.best.model,
                result.best.dev.f1,
                result.test.f1,
                cfg.output_dir.display()
            );
        }
        Command::Evaluate { checkpoint, data } => {
            let report = cmd_evaluate(&checkpoint, &data)?;
            writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&report)?
            )?;
        }
        Command::Report { out, runs } => {
            let rows = cmd_report(&runs, &out)?;
            eprintln!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
