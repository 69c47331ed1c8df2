//! Command-line driver for `rank-phase`: experiments, regime fits, rank
//! estimation from a matrix, and the exhaustive and identity checks.

pub mod args;
pub mod commands;
pub mod error;
pub mod matrix_csv;
pub mod table;

use std::io::Write;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult, EXIT_FAILURE, EXIT_USAGE};

/// Runs one parsed invocation, writing reports to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a, stdout),
        Command::PhaseDiagram(a) => commands::phase_diagram(a, stdout),
        Command::Estimate(a) => commands::estimate(a, stdout),
        Command::OracleCheck(a) => commands::oracle(a, stdout),
        Command::Verify(a) => commands::verify(a, stdout),
    }
}
