mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use config::{resolve, Cli, Command, CommandArgs};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, flags) = match cli.command {
        CommandArgs::Region(f) => (Command::Region, f),
        CommandArgs::Simulate(f) => (Command::Simulate, f),
        CommandArgs::Sweep(f) => (Command::Sweep, f),
    };
    let config = resolve(command, flags)?;
    match command {
        Command::Region => commands::cmd_region(&config),
        Command::Simulate => commands::cmd_simulate(&config),
        Command::Sweep => commands::cmd_sweep(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dirtymac: {e}");
            e.exit_code()
        }
    }
}
