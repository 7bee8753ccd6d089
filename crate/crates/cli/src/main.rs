#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use feasible_cli::compare::compare;
use feasible_cli::experiment::run_experiment;
use feasible_cli::templates::{template, TEMPLATES};
use feasible_cli::verify::{verify, Suite};
use feasible_cli::{CliError, ExperimentConfig, Result};
use feasible_core::oracle::GradientFault;

/// Train models under per-sample loss constraints.
#[derive(Parser)]
#[command(name = "feasible", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config.
    Run { config: PathBuf },
    /// Compare persisted runs: loss CDF and CVaR curves plus a summary table.
    Compare {
        /// Run directories or experiment directories holding seed_* runs.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.9,0.95,0.99")]
        quantiles: Vec<f64>,
        #[arg(long, short, default_value = "comparison")]
        out: PathBuf,
        /// Also render SVG charts.
        #[arg(long)]
        svg: bool,
    },
    /// Check the duality identities and analytic gradients.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Write the full JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Corrupt one analytic gradient coordinate, as `COORD:DELTA` (self-test).
        #[arg(long, hide = true, value_parser = parse_fault)]
        inject_fault: Option<GradientFault>,
    },
    /// Print a config template (`list` shows the names).
    GenConfig {
        template: String,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn parse_fault(s: &str) -> std::result::Result<GradientFault, String> {
    let (c, d) = s.split_once(':').ok_or("expected COORD:DELTA")?;
    Ok(GradientFault {
        coordinate: c.parse().map_err(|e| format!("{e}"))?,
        delta: d.parse().map_err(|e| format!("{e}"))?,
    })
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            let outcome = run_experiment(&cfg, &base);
            let out = cfg.resolved_output_dir();
            if let Ok(summary) = &outcome {
                for (k, v) in &summary.metrics {
                    println!("{k:<28} {v}");
                }
            }
            println!("runs written to {}", out.display());
            outcome.map(|_| ())
        }
        Command::Compare {
            dirs,
            quantiles,
            out,
            svg,
        } => {
            let report = compare(&dirs, &quantiles, &out, svg)?;
            print!("{}", report.table());
            println!("curves written to {}", out.display());
            Ok(())
        }
        Command::Verify {
            suite,
            report,
            inject_fault,
        } => {
            let r = verify(suite, inject_fault)?;
            if let Some(path) = report {
                let json = serde_json::to_string_pretty(&r).map_err(|e| CliError::Input(e.to_string()))?;
                std::fs::write(&path, json).map_err(|e| CliError::Io { path, source: e })?;
            }
            let failures = r.failures();
            if failures.is_empty() {
                println!("verify {suite:?}: all checks passed");
                Ok(())
            } else {
                Err(CliError::Verification(failures.join("; ")))
            }
        }
        Command::GenConfig { template: name, out } => {
            if name == "list" {
                for (n, _) in TEMPLATES {
                    println!("{n}");
                }
                return Ok(());
            }
            let text = template(&name).ok_or_else(|| {
                let names: Vec<&str> = TEMPLATES.iter().map(|(n, _)| *n).collect();
                CliError::Config(format!("unknown template {name:?}; available: {}", names.join(", ")))
            })?;
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| CliError::Io { path, source: e }),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
