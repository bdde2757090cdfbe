use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use nullctl_harness::config::ExperimentConfig;
use nullctl_harness::runner::{run, SUBCOMMANDS};
use nullctl_harness::RunError;

/// Null-control experiments for coupled parabolic-elliptic systems.
///
/// Exit status: 0 success, 1 unknown subcommand, 2 config or validation
/// error, 3 solver failure (including failed acceptance checks).
#[derive(Debug, Parser)]
#[command(name = "nullctl", version)]
struct Cli {
    /// One of: solve-forward, solve-adjoint, hum, penalty-sweep, semilinear,
    /// eps-sweep, observability, carleman-probe, galerkin-check, all-acceptance
    subcommand: String,

    /// JSON experiment config.
    #[arg(long, short)]
    config: PathBuf,

    /// Dotted-path override such as `hum.penalty=1e-4`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Run directory; shorthand for `--set output=DIR`.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn usage() -> String {
    format!(
        "usage: nullctl <SUBCOMMAND> --config <FILE> [--set KEY=VALUE]... [--output DIR]\nsubcommands: {}",
        SUBCOMMANDS.join(", ")
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nullctl: {e}");
            if matches!(e, RunError::Usage(_)) {
                eprintln!("{}", usage());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<PathBuf, RunError> {
    if !SUBCOMMANDS.contains(&cli.subcommand.as_str()) {
        return Err(RunError::Usage(format!("unknown subcommand '{}'", cli.subcommand)));
    }
    let mut overrides = cli.overrides.clone();
    if let Some(dir) = &cli.output {
        overrides.push(format!("output={}", serde_json::Value::String(dir.display().to_string())));
    }
    let cfg = ExperimentConfig::load(&cli.config, &overrides)?;
    run(&cli.subcommand, &cfg)?;
    Ok(cfg.output)
}
