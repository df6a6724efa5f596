use anyhow::Context;
use clap::{Parser, Subcommand};
use hmcf_cli::{parse_config_with, run_experiment};
use std::path::PathBuf;
use std::process::ExitCode;
use toml::{Table, Value};

const CONFIG_ERROR: u8 = 1;
const IO_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "hmcf", about = "Harmonic mean curvature flow with flat sides: experiments and oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run,
    /// Compare the chart formulary with finite differences.
    ValidateCharts,
    /// Hölder-norm refinement study.
    Norms,
    /// Tabulate the closed-form and radial oracles.
    OracleTable,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(IO_ERROR)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<u8> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => String::new(),
    };
    let mut overrides = Table::new();
    let experiment = match cli.command {
        Command::Run => None,
        Command::ValidateCharts => Some("charts-validate"),
        Command::Norms => Some("norms"),
        Command::OracleTable => Some("oracle"),
    };
    if let Some(e) = experiment {
        overrides.insert("experiment".into(), Value::String(e.into()));
    }
    if let Some(out) = &cli.out {
        overrides.insert("out".into(), Value::String(out.to_string_lossy().into_owned()));
    }
    if let Some(seed) = cli.seed {
        let seed = i64::try_from(seed).context("seed must fit in a signed 64-bit integer")?;
        overrides.insert("seed".into(), Value::Integer(seed));
    }
    let cfg = match parse_config_with(&text, overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            for v in &e.violations {
                eprintln!("config: {v}");
            }
            return Ok(CONFIG_ERROR);
        }
    };
    let report = run_experiment(&cfg).with_context(|| format!("writing under {}", cfg.out.display()))?;
    println!("{}", report.summary_path.display());
    if let Some(err) = report.summary.get("error") {
        eprintln!("{err}");
    }
    Ok(report.code as u8)
}
