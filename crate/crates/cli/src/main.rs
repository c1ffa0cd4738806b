//! `rf-franson`: tables of coincidences, CHSH values and g² from the
//! command line. Exit status 0 on success, 1 on configuration or runtime
//! errors, 2 when `validate` finds a failing check.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::Command;
use config::{GlobalArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "rf-franson",
    version,
    about = "Franson interferometry of AMZI-reshaped resonance fluorescence"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let result = RunConfig::resolve(&cli.global).and_then(|cfg| {
        let (report, ok) = commands::run(&cfg, &cli.command)?;
        report.emit(cfg.format, cfg.out.as_deref())?;
        Ok(ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
