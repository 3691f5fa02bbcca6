use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Analysis of mass-action chemical reaction networks.
#[derive(Debug, Parser)]
#[command(name = "crn", version, about)]
pub struct Cli {
    /// Tolerance for rank, membership, symmetry and inequality tests
    /// [default: 1e-9, or CRN_TOL when set]
    #[arg(long, global = true, value_name = "TOL")]
    pub tol: Option<f64>,

    /// TOML file with a global `tol` and per-check `[checks]` overrides
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Leave the timestamp out of JSON output
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structure, Matrix-Tree vector, balance verdicts and equilibria as JSON
    Analyze(AnalyzeArgs),
    /// Integrate the mass-action dynamics and print a CSV trajectory
    Simulate(SimulateArgs),
    /// Complex-balanced steady state of a network with inflows and outflows
    SteadyState(ReportArgs),
    /// Kron reduction of the graph of complexes
    Reduce(ReduceArgs),
    /// Consensus dynamics on a weighted directed graph (`u v w` lines)
    Consensus(ConsensusArgs),
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Network file in the reaction DSL
    pub file: PathBuf,

    /// Decide balance and membership questions in rational arithmetic
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub report: ReportArgs,

    /// Cross-check the Matrix-Tree vector by spanning-tree enumeration
    #[arg(long, hide = true)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Network file in the reaction DSL
    pub file: PathBuf,

    /// Initial concentrations, one per species in file order
    #[arg(long, required = true, value_delimiter = ',', value_name = "X1,X2,...")]
    pub x0: Vec<f64>,

    /// Final time
    #[arg(long, default_value_t = 10.0, value_name = "T")]
    pub t_end: f64,

    /// Number of equal sampling intervals on [0, T]
    #[arg(long, default_value_t = 200, value_name = "N")]
    pub samples: usize,

    /// Integrate in log coordinates
    #[arg(long)]
    pub log_coords: bool,

    /// Also write a downsampled JSON series for plotting
    #[arg(long, value_name = "FILE")]
    pub plot_data: Option<PathBuf>,

    /// Relative integration tolerance
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,

    /// Absolute integration tolerance
    #[arg(long, default_value_t = 1e-10)]
    pub atol: f64,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub report: ReportArgs,

    /// Complexes to delete, one-based as in `C2,C5`; the zero complex of an
    /// open network is numbered last and cannot be deleted
    #[arg(long, required = true, value_name = "C2,C5")]
    pub delete: String,

    /// Reduce the Laplacian balanced at the reference equilibrium (default)
    #[arg(long, conflicts_with = "raw")]
    pub balanced: bool,

    /// Reduce the rate-constant Laplacian
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    /// Edge list, one `u v w` triple per line
    pub file: PathBuf,

    /// Initial values, one per vertex in vertex order
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, value_name = "X1,X2,...")]
    pub x0: Option<Vec<f64>>,

    /// Simulate up to this time and report the final gap
    #[arg(long, requires = "x0", value_name = "T")]
    pub t_end: Option<f64>,

    /// Number of equal sampling intervals on [0, T]
    #[arg(long, default_value_t = 200, value_name = "N")]
    pub samples: usize,
}
