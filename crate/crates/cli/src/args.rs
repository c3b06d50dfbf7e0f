//! Command-line surface: subcommands, global flags, and their environment
//! overrides (`SHIFTSHARE_*`).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Top-level invocation. Global flags apply to every subcommand and can
/// also be set through `SHIFTSHARE_CONFIG`, `SHIFTSHARE_OUT_DIR`,
/// `SHIFTSHARE_SEED`, and `SHIFTSHARE_THREADS`.
#[derive(Debug, Parser)]
#[command(
    name = "shiftshare",
    version,
    about = "Shift-share instruments, IV local projections, and a synthetic trade-shock laboratory"
)]
pub struct Cli {
    /// Configuration file (scenario TOML for `simulate`, run TOML otherwise).
    #[arg(long, global = true, env = "SHIFTSHARE_CONFIG")]
    pub config: Option<PathBuf>,

    /// Directory receiving all outputs; created if missing.
    #[arg(long, global = true, env = "SHIFTSHARE_OUT_DIR", default_value = "out")]
    pub out_dir: PathBuf,

    /// Overrides the scenario seed (simulate only).
    #[arg(long, global = true, env = "SHIFTSHARE_SEED")]
    pub seed: Option<u64>,

    /// Worker threads for internal parallelism; defaults to all cores.
    #[arg(long, global = true, env = "SHIFTSHARE_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic panel with known responses from a scenario file.
    Simulate,
    /// Build the shift-share instrument series and write it as CSV.
    Instrument,
    /// Estimate impulse responses and long differences; write tables and figures.
    Estimate(EstimateArgs),
    /// Pre-shock balance test: impulse responses at negative horizons only.
    Balance(EstimateArgs),
    /// Binned scatterplot of the first stage (instrument vs. export growth).
    Binscatter(BinscatterArgs),
    /// Per-region environmental-taxonomy employment shares.
    #[command(name = "taxonomy-shares")]
    TaxonomyShares,
}

/// Estimation overrides; anything unset falls back to the run config file.
#[derive(Debug, Default, Args)]
pub struct EstimateArgs {
    /// Instrument kind: `baseline` or `destination`.
    #[arg(long)]
    pub kind: Option<String>,

    /// Horizon window as `min:max`, e.g. `-5:10`.
    #[arg(long)]
    pub horizons: Option<String>,

    /// Cluster key: `region`, or a CSV file mapping `region_id,cluster`.
    #[arg(long)]
    pub cluster: Option<String>,

    /// Outcome series: `employment`, `wages`, `informal`, or a taxonomy slice.
    #[arg(long)]
    pub outcome: Option<String>,
}

#[derive(Debug, Default, Args)]
pub struct BinscatterArgs {
    /// Number of equal-count bins.
    #[arg(long)]
    pub bins: Option<usize>,

    /// Outcome series used to assemble the sample.
    #[arg(long)]
    pub outcome: Option<String>,
}
