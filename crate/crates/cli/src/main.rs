use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use weakkam_cli::{configure_threads, load_config_for, run, Command, Status};

/// Numerical experiments for contact Hamilton-Jacobi equations on the circle.
#[derive(Debug, Parser)]
#[command(name = "weakkam", version)]
struct Cli {
    /// One of: evolve, stationary, critical, ceps, mather, barrier,
    /// stability, instability, corollary, homogenize, example-ex
    command: Command,
    /// JSON experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary line
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                Status::ConfigError.code()
            } else {
                0
            });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("weakkam: {e}");
        return ExitCode::from(Status::ConfigError.code());
    }
    let cfg = match load_config_for(&cli.config, Some(cli.command)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("weakkam: {}: {e}", cli.config.display());
            let dir = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("weakkam-out"));
            if std::fs::create_dir_all(&dir).is_ok() {
                let _ = std::fs::write(
                    dir.join("diagnostic.txt"),
                    format!("status: 2\n{}: {e}\n", cli.config.display()),
                );
            }
            return ExitCode::from(Status::ConfigError.code());
        }
    };
    let outcome = run(&cfg, cli.out.as_deref());
    if outcome.status == Status::Success {
        if !cli.quiet {
            println!("{}", outcome.summary);
        }
    } else {
        eprintln!("weakkam: {}", outcome.summary);
    }
    ExitCode::from(outcome.status.code())
}
