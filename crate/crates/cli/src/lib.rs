//! Batch command-line front end for the estimation engine.
//!
//! One command per process: `simulate` writes a synthetic data set,
//! `instrument` builds shift-share instruments, `estimate` runs the
//! impulse-response and long-difference pipelines, and `balance`,
//! `binscatter`, and `taxonomy-shares` emit the corresponding diagnostic
//! tables. Every command records a `run.json` manifest holding the
//! resolved configuration and SHA-256 digests of its inputs, so a run can
//! be re-executed and checked byte for byte; nothing written here embeds
//! timestamps or machine-specific paths.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data validation error,
//! 4 estimation failure (weak instrument, rank deficiency).

pub mod args;
pub mod config;
pub mod manifest;
pub mod output;
pub mod runner;

use shiftshare_core::{ErrorClass, Result};

pub use args::{Cli, Command};

/// Runs one parsed command; errors map onto the exit-code contract.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        // A second initialization in-process (tests) is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match &cli.command {
        Command::Simulate => runner::cmd_simulate(cli),
        Command::Instrument => runner::cmd_instrument(cli),
        Command::Estimate(args) => runner::cmd_estimate(cli, args),
        Command::Balance(args) => runner::cmd_balance(cli, args),
        Command::Binscatter(args) => runner::cmd_binscatter(cli, args),
        Command::TaxonomyShares => runner::cmd_taxonomy_shares(cli),
    }
}

/// Process exit code for an error, per the documented contract.
pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Estimation => 4,
    }
}
