use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hom", version, about = "Vector-mode HOM entanglement: simulate, reconstruct, analyze")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate all analyzer settings and write count tensors and event streams.
    Simulate(RunArgs),
    /// Reconstruct per-bin states from count tensors and write Bell maps.
    Tomo(TomoArgs),
    /// Report where each Bell state is the only coincidence amplitude.
    Locus(LocusArgs),
    /// Sweep the path difference and report the dip visibility.
    Dip(RunArgs),
    /// Print the effective configuration as TOML.
    Config(RunArgs),
}

/// Options shared by every configuration-driven command.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "hom-out")]
    pub out: PathBuf,
    /// Comma-separated subset of analyzer labels, e.g. `HH,HV`.
    #[arg(long, value_delimiter = ',')]
    pub projections: Option<Vec<String>>,
    /// Azimuthal bins per port.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Coincidence window in camera ticks.
    #[arg(long)]
    pub window_ticks: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TomoArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Directory written by `simulate`; its manifest supplies the
    /// configuration unless `--config` is given.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct LocusArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub qa: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub qb: f64,
    /// Largest |n|, |m| searched in the congruences.
    #[arg(long, default_value_t = hom_core::hom::DEFAULT_N_MAX)]
    pub n_max: i64,
    /// Also run a brute-force scan on this many angles per axis and
    /// compare verdicts.
    #[arg(long)]
    pub verify: Option<usize>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
    /// Directory for `locus.json` and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
