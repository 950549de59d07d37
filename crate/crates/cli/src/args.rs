use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fbdeconv::ratings::Format;
use fbdeconv::synthetic::AcceptanceScope;

#[derive(Parser, Debug)]
#[command(
    name = "fbdeconv",
    version,
    about = "Detect recommender feedback in a ratings matrix"
)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a true ratings matrix and run the feedback loop on it.
    Simulate(Run<SimulateArgs>),
    /// Remove the feedback from a ratings matrix.
    Deconvolve(Run<DeconvolveArgs>),
    /// Deconvolve, then score every rating and rank the items.
    Score(Run<ScoreArgs>),
    /// Run a parameter sweep on simulated data.
    Eval(Run<EvalArgs>),
    /// Re-run a recorded invocation from its manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct Run<A: Args> {
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub args: A,
}

/// A reproducible invocation, as recorded in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Invocation {
    Simulate(SimulateArgs),
    Deconvolve(DeconvolveArgs),
    Score(ScoreArgs),
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeArg {
    /// Normalize acceptance weights over the offered top-r list.
    TopR,
    /// Normalize over every predicted cell of the user.
    AllCandidates,
}

impl From<ScopeArg> for AcceptanceScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::TopR => AcceptanceScope::TopR,
            ScopeArg::AllCandidates => AcceptanceScope::AllCandidates,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    pub users: usize,
    #[arg(long, default_value_t = 100)]
    pub items: usize,
    /// Fraction of cells kept in the true matrix.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Generator noise level.
    #[arg(long, default_value_t = 2.0)]
    pub epsilon: f64,
    /// Acceptance exponent.
    #[arg(long, default_value_t = 2.0)]
    pub e: f64,
    /// Recommendations offered per user and round.
    #[arg(long, default_value_t = 10)]
    pub r: usize,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ScopeArg::TopR)]
    pub scope: ScopeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Ml100k,
    Ml1m,
    Jester,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Ml100k => Format::Ml100k,
            FormatArg::Ml1m => Format::Ml1m,
            FormatArg::Jester => Format::Jester,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvolveArgs {
    /// Ratings file.
    #[arg(long)]
    pub input: PathBuf,
    /// File layout; defaults to the dataset preset's, else csv.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Dataset preset supplying format, min-rpi, k and rating scale.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Drop items with fewer ratings; defaults to the preset's, else 1.
    #[arg(long)]
    pub min_rpi: Option<usize>,
    /// Feedback strength in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Rank of the decomposition; defaults to the preset's, else full rank.
    #[arg(long)]
    pub k: Option<usize>,
    /// Seed of the Lanczos start vector and of the line fits.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory of cached decompositions.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DeconvolveArgs,
    #[arg(long, default_value_t = 200)]
    pub ransac_iterations: usize,
    /// Inlier threshold as a fraction of each item's observed range.
    #[arg(long, default_value_t = 0.05)]
    pub ransac_threshold: f64,
    /// Items with fewer ratings are not scored.
    #[arg(long, default_value_t = 3)]
    pub min_points: usize,
    /// Balance x against y per item instead of once for the whole dataset.
    #[arg(long)]
    #[serde(default)]
    pub per_item_scaling: bool,
    /// Bins per axis of the observed/deconvolved histogram.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Sweep manifest (TOML).
    #[arg(long)]
    pub sweep: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; defaults to the manifest's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail unless every output matches its recorded digest.
    #[arg(long)]
    pub verify: bool,
}
