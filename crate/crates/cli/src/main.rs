use std::path::PathBuf;
use std::process::ExitCode;

use bianiso_cli::config::{load, Overrides, Severity};
use bianiso_cli::run::{execute, summary, write_outputs, CliError};
use clap::Parser;

/// Scattering, initial-value and time-domain runs for layered bi-anisotropic media.
#[derive(Debug, Parser)]
#[command(name = "bianiso", version, about)]
struct Args {
    /// TOML run description.
    #[arg(long, env = "BIANISO_CONFIG")]
    config: PathBuf,
    /// Directory receiving the CSV table and JSON sidecar.
    #[arg(long, env = "BIANISO_OUTPUT", default_value = ".")]
    output: PathBuf,
    /// Overrides the mode in the file: scattering, initial-value or time-reconstruction.
    #[arg(long, env = "BIANISO_MODE")]
    mode: Option<String>,
    /// Worker threads; the output does not depend on this.
    #[arg(long, env = "BIANISO_THREADS")]
    threads: Option<usize>,
    /// Check the configuration and exit.
    #[arg(long, env = "BIANISO_VALIDATE_ONLY")]
    validate_only: bool,
    /// Seed for randomized sweeps.
    #[arg(long, env = "BIANISO_SEED", default_value_t = 0)]
    seed: u64,
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.threads == Some(0) {
        return fail(CliError::InvalidConfig(
            "--threads must be at least 1".into(),
        ));
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            return fail(CliError::InvalidConfig(format!(
                "cannot read {}: {e}",
                args.config.display()
            )))
        }
    };
    let overrides = Overrides {
        mode: args.mode.clone(),
        seed: args.seed,
    };
    let (cfg, diags) = load(&text, &overrides);
    for d in &diags {
        eprintln!("{}: {d}", args.config.display());
    }
    let Some(cfg) = cfg else {
        let errors = diags
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .count();
        return fail(CliError::InvalidConfig(format!(
            "{errors} error(s) in {}",
            args.config.display()
        )));
    };
    if args.validate_only {
        eprintln!("{}: configuration is valid", args.config.display());
        return ExitCode::SUCCESS;
    }
    let table = match execute(&cfg, args.threads) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    match write_outputs(&cfg, &text, &table, &args.output) {
        Ok(paths) => {
            eprintln!("{}", summary(&cfg, &table));
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
