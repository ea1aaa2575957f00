//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "slm", version, about = "Strict local martingale experiments: simulate, price, verify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Mean of a simulated process at each requested time.
    Simulate,
    /// Martingale defect N_0 - E N_t of a measure change, with its closed form.
    Defect,
    /// Option prices by simulation; Madan-Yor barrier sequence with --barriers.
    Price,
    /// Closed-form inverse Bessel call prices and their time derivative.
    TermStructure,
    /// Two-sided identity checks.
    Verify {
        #[command(subcommand)]
        check: Check,
    },
    /// Size-biased, Vandermonde and conditioned-exit experiments.
    Examples {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Kelvin transform checks and the inversion change of measure.
    Kelvin {
        #[command(subcommand)]
        experiment: KelvinExperiment,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Check {
    /// Payoff duality between the inverse Bessel process and killed Brownian motion.
    Duality,
    /// Scaling identity for BES(3) started at zero.
    Scaling,
    /// Sign of the call-price slope in maturity, by finite differences on common paths.
    Slope,
    /// Local-time rate against the killed density.
    LocalTime,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Experiment {
    /// Size-biased BESQ functionals N, U, V, M.
    SizeBiased,
    /// Share of the first BESQ coordinate in the total.
    Ratio,
    /// Ratio of Vandermonde determinants along the conditioned spectrum.
    Dyson,
    /// Vandermonde determinant of independent Brownian motions.
    VandermondeControl,
    /// Entry of the inverse Vandermonde matrix, with the adjugate self-check.
    InverseEntry,
    /// Exit frequencies of planar Brownian motion through disc arcs.
    ExitFrequency,
    /// Rejection and change-of-measure estimates for the conditioned exit.
    ConditionedExit,
    /// Conditioned-exit expectation across times.
    ExitProfile,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum KelvinExperiment {
    /// Involution error of the Kelvin transform at random points.
    Involution,
    /// Observed order of the Laplacian commutation residual.
    Residual,
    /// Inversion identity and reweighted inverted coordinates.
    Inversion,
    /// Realised covariation of the inverted coordinates.
    Covariation,
}

/// Every flag, shared by all commands. Flags a command does not use are ignored.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Process model (absorbed-bm, free-bm, bes3, inverse-bes3, besq0, besq4, gbm, dyson, spliced-bubble).
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Start point; comma-separated for multidimensional experiments.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Comma-separated observation times.
    #[arg(long, global = true)]
    pub t: Option<String>,
    /// Time grid `lin:a:b:n` or `log:a:b:n`.
    #[arg(long, global = true)]
    pub t_grid: Option<String>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Master seed; required by every Monte-Carlo command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub strike: Option<f64>,
    /// Output CSV path; the CSV goes to standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; falls back to SLM_WORKERS.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Flat JSON file of flag values; flags on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// GBM volatility.
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// call or put.
    #[arg(long, global = true)]
    pub kind: Option<String>,
    /// Comma-separated increasing barrier levels.
    #[arg(long, global = true)]
    pub barriers: Option<String>,
    /// Duality payoff: put, call, sqrt, min or identity.
    #[arg(long, global = true)]
    pub payoff: Option<String>,
    /// Cap c of the min(x, c) payoff.
    #[arg(long, global = true)]
    pub cap: Option<f64>,
    /// Number of BESQ coordinates.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Common BESQ start.
    #[arg(long, global = true)]
    pub z: Option<f64>,
    /// Number of smallest eigenvalues in the numerator determinant.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Column of the inverse Vandermonde matrix, 1-based.
    #[arg(long, global = true)]
    pub column: Option<usize>,
    /// Comma-separated spectrum or Brownian starts.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub start: Option<String>,
    /// Later time of the scaling check.
    #[arg(long, global = true)]
    pub u: Option<f64>,
    /// Difference step: relative for slope, absolute for local-time.
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Radius of the killing ball.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Test field for the inversion check: one or min-norm:c.
    #[arg(long, global = true)]
    pub field: Option<String>,
    /// Arcs as lo:hi pairs separated by commas, in radians.
    #[arg(long, global = true)]
    pub arcs: Option<String>,
    /// Exit arc lo:hi of the conditioned process.
    #[arg(long, global = true)]
    pub exit_arc: Option<String>,
    /// Arc lo:hi carrying the harmonic numerator.
    #[arg(long, global = true)]
    pub payoff_arc: Option<String>,
    /// Comma-separated finite-difference steps.
    #[arg(long, global = true)]
    pub steps: Option<String>,
    /// Comma-separated evaluation point.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Number of random points.
    #[arg(long, global = true)]
    pub points: Option<usize>,
}
