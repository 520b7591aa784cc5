use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use vortex_ring_cli::config::{CONFIG_HELP, ENV_THREADS};
use vortex_ring_cli::{cmd_report, cmd_solve, cmd_sweep, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "vring", version, about = "Steady axisymmetric vortex rings", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for one vortex ring at the configured lambda.
    #[command(after_long_help = CONFIG_HELP)]
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve across the configured lambdas and fit the scaling laws.
    #[command(after_long_help = CONFIG_HELP)]
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render report.md and report.html from sweep outputs in a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(ENV_THREADS) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{ENV_THREADS} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Best-effort copy of the error into the output directory.
fn write_error_file(dir: Option<&Path>, report: &serde_json::Value) {
    if let Some(dir) = dir.filter(|d| d.is_dir()) {
        let _ = std::fs::write(dir.join("error.json"), format!("{report:#}\n"));
    }
}

fn run(cli: Cli) -> Result<serde_json::Value, (CliError, Option<PathBuf>)> {
    configure_threads().map_err(|e| (e, None))?;
    match cli.command {
        Command::Solve { config } => {
            let cfg = RunConfig::load(&config).map_err(|e| (e, None))?;
            let rec = cmd_solve(&cfg).map_err(|e| (e, Some(cfg.output.dir.clone())))?;
            Ok(json!({
                "status": "ok",
                "output_dir": cfg.output.dir,
                "lambda": rec.lambda,
                "mu": rec.mu,
                "energy": rec.e_lambda,
                "converged": rec.converged,
                "resolved": rec.resolved,
            }))
        }
        Command::Sweep { config } => {
            let cfg = RunConfig::load(&config).map_err(|e| (e, None))?;
            let out = cmd_sweep(&cfg).map_err(|e| (e, Some(cfg.output.dir.clone())))?;
            Ok(json!({
                "status": "ok",
                "output_dir": cfg.output.dir,
                "points": out.sweep.records.len(),
                "failures": out.sweep.failures.len(),
                "overall_pass": out.fit.overall_pass,
            }))
        }
        Command::Report { dir } => {
            let files = cmd_report(&dir).map_err(|e| (e, None))?;
            Ok(json!({ "status": "ok", "files": files }))
        }
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
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err((err, dir)) => {
            let report = json!({ "error": err.report() });
            eprintln!("{report}");
            write_error_file(dir.as_deref(), &report);
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
