// SPDX-License-Identifier: Apache-2.0

//! `persuade`: solve, sweep, verify and report thresholds for a configured
//! instance.

mod config;
mod run;
mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use config::{ConfigError, RunConfig, Variant};
use persuasion::interim::SolveError;

#[derive(Parser, Debug)]
#[command(
    name = "persuade",
    version,
    about = "Optimal disclosure to an information-avoidant patient"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the configured instance and write a JSON report.
    Solve(Args),
    /// Tabulate the solution over the configured sweep (CSV, plus JSON next to it).
    Sweep(Args),
    /// Run the self-checks; exits 1 if any fails.
    Verify(Args),
    /// Report the critical beliefs.
    Thresholds(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// JSON run configuration. The built-in baseline is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file. Standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid size for envelopes and non-concave curves.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<Variant>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver: {0}")]
    Solve(#[from] SolveError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("verification failed")]
    Verify,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl Args {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(g) = self.grid {
            cfg.solver.grid_n = g;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        cfg.validate()?;
        info!("variant {} seed {}", cfg.variant.name(), cfg.seed);
        Ok(cfg)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let result = match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    result.map_err(|source| CliError::Io {
        path: path.map_or_else(|| "<stdout>".into(), |p| p.display().to_string()),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Where a sweep's JSON goes: the CSV path with a `.json` extension, or
/// `<name>.rows.json` if the CSV path already ends in `.json`.
fn json_sibling(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.with_extension("rows.json")
    } else {
        out.with_extension("json")
    }
}

fn csv_text(table: &run::Table) -> Result<String, CliError> {
    let csv_err = |e: csv::Error| CliError::Io {
        path: "<csv>".into(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| csv_err(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => {
            let cfg = a.load()?;
            write_out(a.out.as_deref(), &to_json(&run::solve(&cfg)?))
        }
        Command::Thresholds(a) => {
            let cfg = a.load()?;
            write_out(a.out.as_deref(), &to_json(&run::thresholds(&cfg)?))
        }
        Command::Sweep(a) => {
            let cfg = a.load()?;
            if cfg.sweep.is_none() {
                return Err(ConfigError::Field {
                    field: "sweep".into(),
                    reason: "required by the sweep command".into(),
                }
                .into());
            }
            let table = run::sweep(&cfg)?;
            info!("{} rows", table.rows.len());
            write_out(a.out.as_deref(), &csv_text(&table)?)?;
            if let Some(out) = &a.out {
                let doc = serde_json::json!({
                    "variant": cfg.variant.name(),
                    "seed": cfg.seed,
                    "columns": table.header,
                    "rows": table.records,
                });
                write_out(Some(&json_sibling(out)), &to_json(&doc))?;
            }
            Ok(())
        }
        Command::Verify(a) => {
            let cfg = a.load()?;
            let report = verify::verify(&cfg)?;
            let mut text = format!("seed: {}\n", report.seed);
            for c in &report.checks {
                text.push_str(&format!(
                    "{} {} residual={:e} tolerance={:e} ({})\n",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.residual,
                    c.tolerance,
                    c.detail
                ));
            }
            print!("{text}");
            if let Some(out) = &a.out {
                write_out(Some(out), &to_json(&report))?;
            }
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Verify)
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
