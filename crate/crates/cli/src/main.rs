//! `savprobe`: scan for missing inbound source address validation with
//! spoofed DNS queries, collect the resulting lookups, and analyze them.

mod cmd;
mod error;
mod inputs;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "savprobe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Send spoofed and genuine probe pairs to every host of a routing table.
    Scan(cmd::scan::ScanArgs),
    /// Run the authoritative server for the scan zone and log every query.
    Serve(cmd::serve::ServeArgs),
    /// Turn collector logs and scan responses into SAV verdicts.
    Analyze(cmd::analyze::AnalyzeArgs),
    /// Scan a simulated topology and write its logs and ground truth.
    Simulate(cmd::simulate::SimulateArgs),
    /// Per-country and size-distribution reports from verdicts.
    Report(cmd::report::ReportArgs),
}

fn dispatch(c: Command) -> CliResult {
    match c {
        Command::Scan(a) => cmd::scan::run(a),
        Command::Serve(a) => cmd::serve::run(a),
        Command::Analyze(a) => cmd::analyze::run(a),
        Command::Simulate(a) => cmd::simulate::run(a),
        Command::Report(a) => cmd::report::run(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
