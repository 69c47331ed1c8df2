use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "rank-phase",
    version,
    about = "Approximate ranking from pairwise interactions: experiments, estimation and checks",
    after_help = "Exit status: 0 success, 1 runtime or verification failure, 2 usage, \
                  configuration or input error.\nRANK_PHASE_THREADS caps the worker count."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its results table.
    Simulate(SimulateArgs),
    /// Run a grid, fit the regimes and write plot-ready tables.
    PhaseDiagram(PhaseDiagramArgs),
    /// Estimate ranks from an interaction matrix.
    Estimate(EstimateArgs),
    /// Compare the fast estimators with exhaustive search on small instances.
    OracleCheck(OracleCheckArgs),
    /// Run the exact identity suite.
    Verify(VerifyArgs),
}

/// Values that replace the corresponding configuration fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replications per grid point.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Number of objects.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated SNR grid (replaces any beta grid).
    #[arg(long, value_delimiter = ',')]
    pub snr: Option<Vec<f64>>,
    /// Sum budget.
    #[arg(long = "c-n")]
    pub c_n: Option<u64>,
    /// Sum-of-squares budget.
    #[arg(long = "c-n-sq")]
    pub c_n_sq: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Results CSV; standard output when omitted (the summary then goes to
    /// standard error).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["config", "from_csv"])))]
pub struct PhaseDiagramArgs {
    /// JSON experiment configuration to simulate.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fit an existing results table instead of simulating.
    #[arg(long)]
    pub from_csv: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Comparison,
    Collaboration,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Square matrix CSV with a blank or NA diagonal.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Output file: fit summary as `#` lines, then `index,rank` lines.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "c-n")]
    pub c_n: Option<u64>,
    #[arg(long = "c-n-sq")]
    pub c_n_sq: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    /// Number of objects, 3 to 6.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Corrupt one identity on purpose; the suite must then fail on it.
    #[arg(long, value_name = "IDENTITY")]
    pub fail_inject: Option<String>,
}
