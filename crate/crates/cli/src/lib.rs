#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command-line front end for `uot-core`: problem presets, the text formats
//! for marginals, costs and plans, trace CSV output and reference files.

pub mod clock;
pub mod commands;
pub mod config;
pub mod error;
pub mod presets;
pub mod reference;
pub mod textfmt;
pub mod trace_csv;

use std::io::Write;

pub use config::{Cli, Command, RunConfig};
pub use error::{CliError, CliResult};

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Solve(args) => commands::cmd_solve(&args.validate()?),
        Command::Truth(args) => commands::cmd_truth(args),
        Command::Compare(args) => commands::cmd_compare(args),
        Command::Sparsity(args) => commands::cmd_sparsity(args, stdout),
        Command::Oracle(args) => commands::cmd_oracle(args, stdout),
    }
}
