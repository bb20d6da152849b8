use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use qnoise::noise_model::TruncationRule;

#[derive(Debug, Parser)]
#[command(name = "qnoise", version, about = "Hybrid quantum-classical noise: truncation, sampling, EM fitting and capacity sweeps")]
pub struct Cli {
    /// TOML file with one table per subcommand; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Worker threads for the parallel stages. Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Output file of the subcommand (standard output when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the retained Poisson terms; --out writes the mixture as JSON.
    Truncate(TruncateArgs),
    /// Draw samples from the hybrid noise model into a CSV file.
    Generate(GenerateArgs),
    /// Fit the mixture to a dataset with EM; writes a JSON report.
    Fit(FitArgs),
    /// Sweep the channel capacity over an SNR grid; writes a CSV curve.
    Capacity(CapacityArgs),
    /// Compare two capacity curves; writes a JSON report and an SVG overlay.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Centered,
    Greedy,
}

impl From<Rule> for TruncationRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Centered => TruncationRule::CenteredWindow,
            Rule::Greedy => TruncationRule::GreedyMass,
        }
    }
}

/// Copies every field that the command line left unset from the config
/// file table. For mutually exclusive groups, setting either side on the
/// command line discards the other side from the file.
pub trait Overlay: Sized {
    fn overlay(self, file: Self) -> Self;
}

macro_rules! overlay {
    ($t:ty { $($f:ident),* $(,)? } $(; [$($x:ident),*] vs [$($y:ident),*])*) => {
        impl Overlay for $t {
            #[allow(unused_mut)]
            fn overlay(self, mut file: Self) -> Self {
                $(
                    if false $(|| self.$x.is_some())* {
                        $(file.$y = None;)*
                    }
                    if false $(|| self.$y.is_some())* {
                        $(file.$x = None;)*
                    }
                )*
                Self { $($f: self.$f.or(file.$f)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncateArgs {
    /// Poisson rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Tolerated missing mass; the retained weights sum to at least 1 - tol.
    #[arg(long, conflicts_with = "k")]
    pub tol: Option<f64>,
    /// Keep exactly this many most probable terms instead.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,
    /// Dimension of the mixture written by --out.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub mu_z2: Option<f64>,
    #[arg(long)]
    pub sigma2_z2: Option<f64>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
}
overlay!(TruncateArgs { lambda, tol, k, rule, dim, mu_z2, sigma2_z2, out }; [tol] vs [k]);

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, conflicts_with = "k")]
    pub tol: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub mu_z2: Option<f64>,
    #[arg(long)]
    pub sigma2_z2: Option<f64>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    /// Required; there is no time-based default.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
}
overlay!(GenerateArgs { lambda, tol, k, rule, dim, mu_z2, sigma2_z2, n, seed, out }; [tol] vs [k]);

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Initial mixture JSON; otherwise built from the Poisson flags below.
    #[arg(long, conflicts_with_all = ["lambda", "tol", "k", "rule", "mu_z2", "sigma2_z2"])]
    pub init: Option<PathBuf>,
    /// Poisson rate of the initial mixture (defaults to the rate recorded in
    /// the dataset header).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, conflicts_with = "k")]
    pub tol: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,
    #[arg(long)]
    pub mu_z2: Option<f64>,
    #[arg(long)]
    pub sigma2_z2: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative log-likelihood change that counts as converged.
    #[arg(long)]
    pub ll_rel_tol: Option<f64>,
    /// Added to each covariance diagonal after every M-step.
    #[arg(long)]
    pub cov_floor: Option<f64>,
    /// Write an SVG snapshot every this many iterations (2-D data only).
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    /// Directory for snapshots; defaults to the directory of --out.
    #[arg(long)]
    pub snapshot_dir: Option<PathBuf>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
}
overlay!(FitArgs {
    data, init, lambda, tol, k, rule, mu_z2, sigma2_z2, max_iters, ll_rel_tol, cov_floor, snapshot_every,
    snapshot_dir, out,
}; [tol] vs [k]; [init] vs [lambda, tol, k, rule, mu_z2, sigma2_z2]);

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, conflicts_with = "k")]
    pub tol: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,
    /// Classical noise variance.
    #[arg(long, conflicts_with = "sigma_from_fit")]
    pub sigma2_z2: Option<f64>,
    /// Take the noise level from the zero-shift covariance determinant of a
    /// fit report: sigma = |Sigma_0|, sigma^2 = |Sigma_0|^2.
    #[arg(long, value_name = "REPORT")]
    pub sigma_from_fit: Option<PathBuf>,
    /// SNR grid in dB as min:max:step.
    #[arg(long, value_name = "GRID")]
    pub snr_db: Option<String>,
    /// Divide the weights by their total before evaluating.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub renormalize: Option<bool>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
}
overlay!(CapacityArgs { lambda, tol, k, rule, sigma2_z2, sigma_from_fit, snr_db, renormalize, out }; [tol] vs [k]; [sigma2_z2] vs [sigma_from_fit]);

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareArgs {
    /// Curve A (the deltas are A - B).
    pub a: Option<PathBuf>,
    /// Curve B.
    pub b: Option<PathBuf>,
    /// SVG overlay path; defaults to --out with an .svg extension.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
}
overlay!(CompareArgs { a, b, plot, out });

/// Layout of the --config file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub threads: Option<usize>,
    pub truncate: TruncateArgs,
    pub generate: GenerateArgs,
    pub fit: FitArgs,
    pub capacity: CapacityArgs,
    pub compare: CompareArgs,
}
