//! Command-line front end for `fcca-core`: CSV dataset I/O, the estimation
//! commands, the Monte Carlo harness and the operator verification suite.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod json;

use args::{Cli, Command};
use error::CliError;

/// Run a parsed command line; returns the exit code on success.
pub fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(a).map(|_| 0),
        Command::Fpca(a) => commands::cmd_fpca(a).map(|_| 0),
        Command::Cca(a) => commands::cmd_cca(a).map(|_| 0),
        Command::Pcca(a) => commands::cmd_pcca(a).map(|_| 0),
        Command::Montecarlo(a) => commands::cmd_montecarlo(a).map(|_| 0),
        Command::Verify(a) => commands::cmd_verify(a),
    }
}
