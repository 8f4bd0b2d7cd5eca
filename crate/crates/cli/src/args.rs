use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "switchid", version, about = "Identification toolkit for linear switched systems")]
pub struct Cli {
    /// JSON object of flag values (keys are long flag names); explicit
    /// flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate a model under a hybrid input CSV or a single probe word.
    Simulate(SimulateArgs),
    /// Tabulate Markov parameters of a model.
    Markov(MarkovArgs),
    /// Assemble a Hankel matrix from a model.
    Hankel(HankelArgs),
    /// Run the realization algorithm on a Hankel CSV or a model's Hankel matrix.
    Realize(RealizeArgs),
    /// Build a finite persistently exciting input.
    PeBuild(PeBuildArgs),
    /// Estimate Markov parameters from data.
    PeEstimate(PeEstimateArgs),
    /// Estimate a model from one random experiment.
    Identify(IdentifyArgs),
    /// Report stability, reversibility, minimality and excitation checks.
    Check(CheckArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Hybrid input CSV (`t,q,u_1..u_m`).
    #[arg(long, conflicts_with = "probe")]
    pub input: Option<PathBuf>,
    /// Probe word `q0,v,q,j`, e.g. `1,ε,2,1` or `2,12,1,1`.
    #[arg(long)]
    pub probe: Option<String>,
    /// Trajectory CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MarkovArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Largest `|v|` tabulated.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    /// JSON table; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct HankelArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Row depth `L`.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    /// Column depth `K` (default `L + 1`).
    #[arg(long)]
    pub cols: Option<usize>,
    /// Relative rank tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Dense CSV; a `.json` sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RealizeArgs {
    /// Hankel CSV with its `.json` sidecar.
    #[arg(long, conflicts_with = "model")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Depth `N` of `H_{N,N+1}` when realizing from a model (default `n`).
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Extra tolerances at which to report the numerical rank.
    #[arg(long, value_delimiter = ',')]
    pub tol_sweep: Vec<f64>,
    /// Model JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PeBuildArgs {
    /// Reversible model used to compute the resets.
    #[arg(long, required_unless_present = "paired")]
    pub model: Option<PathBuf>,
    /// Model-free resets for `2K` paired modes, `(q, u) -> (q ± K, -u)`.
    #[arg(long, value_name = "K", conflicts_with = "model")]
    pub paired: Option<usize>,
    /// Input width for `--paired`.
    #[arg(long, default_value_t = 1)]
    pub inputs: usize,
    /// Bound on the state dimension (default: model `n`).
    #[arg(long)]
    pub n_bound: Option<usize>,
    /// Longest reset word searched (default `2 n D`).
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Tolerance on the state norm after a reset.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Hybrid input CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Probe index JSON (default `<out>.index.json`).
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum PlugInArg {
    Empirical,
    Theoretical,
}

/// Where input/output data come from: files, or a generated random input
/// applied to a model.
#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Model that produces the outputs (and the reference, when known).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Hybrid input CSV; a random input is generated when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output CSV with `y_*` columns; the model is simulated when omitted.
    #[arg(long)]
    pub outputs: Option<PathBuf>,
    /// Seed for the generated input.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Length of the generated input.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Mode probabilities of the generated switching signal (uniform by default).
    #[arg(long, value_delimiter = ',')]
    pub mode_probs: Vec<f64>,
    /// Input covariance, row-major (identity by default).
    #[arg(long, value_delimiter = ',')]
    pub covariance: Vec<f64>,
    /// Number of modes when no model is given.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Write the input and simulated trajectory used to this CSV.
    #[arg(long)]
    pub save_data: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PeEstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Probe index of a finite persistently exciting input: read the
    /// parameters off the response instead of estimating.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    #[arg(long, value_enum, default_value_t = PlugInArg::Empirical)]
    pub plug_in: PlugInArg,
    /// Horizons at which errors against the model are recorded (default:
    /// `N, N/4, ...` down to 1000).
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<usize>,
    /// Markov table JSON; `<out>.convergence.csv` holds the error-vs-N table.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IdentifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// State dimension of the identified model.
    #[arg(long)]
    pub n_guess: usize,
    /// Largest `|v|` estimated (default `2 n_guess - 1`).
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = PlugInArg::Empirical)]
    pub plug_in: PlugInArg,
    /// Identified model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Hybrid input CSV to test for persistence of excitation.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of modes for the excitation check without a model.
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub max_word_len: usize,
    #[arg(long, default_value_t = 5)]
    pub max_lag: usize,
    /// Tolerance on the normalized excitation residuals.
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    /// Relative rank tolerance for the minimality check.
    #[arg(long, default_value_t = 1e-9)]
    pub rank_tol: f64,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
