//! Command-line harness for the online conformal calibrators in `ocp-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod spec;
pub mod verify;

use clap::Parser;

use crate::config::{resolve, Cli, Command};
pub use crate::error::{CliError, CliResult};

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code; diagnostics go to stderr.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Run(args) => commands::cmd_run(&resolve(&args)?),
        Command::Bench(args) => commands::cmd_bench(&resolve(&args)?),
        Command::Pareto(args) => commands::cmd_pareto(&resolve(&args)?),
        Command::Verify(v) => commands::cmd_verify(&resolve(&v.common)?, v.corrupt_grad_sign),
    }
}
