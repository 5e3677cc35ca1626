//! Batch front end for the dualfilt library.
//!
//! Three subcommands cover the desk workflow. `simulate` draws a synthetic
//! signal path and observation sequence. `filter` runs the exact mixture
//! filter over an observation file and emits one CSV record per
//! observation. `validate` runs the exact filter and a bootstrap particle
//! filter on the same data and reports per-step z-scores of their moment
//! discrepancies.
//!
//! Exit codes are scriptable: 0 success, 1 bad input (flags, config file,
//! observation data), 2 numerical failure inside the engine, 3 internal
//! invariant violation, 4 validation verdict failure.

mod commands;
mod config;
mod obs_io;

use clap::Parser;

use config::Cli;

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap's default exit code for usage errors collides with the
            // numerical-failure code, so exit explicitly. Help and version
            // requests are not errors.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = commands::dispatch(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
