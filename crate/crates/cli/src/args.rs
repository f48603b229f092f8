//! Command-line grammar.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use idim_core::datasets::GeneratorKind;
use idim_core::{Linkage, Method, Metric, PriorType};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "idim", version, about = "Intrinsic dimension estimation")]
pub struct Cli {
    /// Only report warnings and errors on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic benchmark dataset.
    Generate(GenerateArgs),
    /// Compute nearest-neighbor distance ratios.
    Mus(MusArgs),
    /// Estimate a single global intrinsic dimension.
    Twonn(TwonnArgs),
    /// Fit the heterogeneous-dimension mixture by Gibbs sampling.
    Hidalgo(HidalgoArgs),
    /// Postprocess the chains of a `hidalgo` run.
    Summarize(SummarizeArgs),
}

/// Where the observations come from.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Numeric CSV with one observation per row.
    #[arg(long, conflicts_with = "dist")]
    pub input: Option<PathBuf>,

    /// Square CSV of pairwise distances.
    #[arg(long)]
    pub dist: Option<PathBuf>,

    /// Whether the first CSV row holds column names.
    #[arg(long, default_value_t = true, action = ArgAction::Set, value_name = "BOOL")]
    pub header: bool,

    /// Column to ignore, by name (or zero-based index without a header).
    #[arg(long = "drop-col", value_name = "COL")]
    pub drop_col: Vec<String>,

    #[arg(long, default_value_t = Metric::Euclidean)]
    pub metric: Metric,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub kind: GeneratorKind,

    /// Sample size (per component for gaussmix).
    #[arg(long)]
    pub n: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Dimension of the pareto ratios.
    #[arg(long)]
    pub d: Option<f64>,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MusArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 1)]
    pub n1: usize,

    #[arg(long, default_value_t = 2)]
    pub n2: usize,

    /// Also write the q-nearest-neighbor adjacency matrix.
    #[arg(long)]
    pub adjacency: bool,

    #[arg(long, default_value_t = 3)]
    pub q: usize,

    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct TwonnArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Precomputed ratios (a `mu` column, or a single column).
    #[arg(long, conflicts_with_all = ["input", "dist"])]
    pub mus: Option<PathBuf>,

    #[arg(long, default_value_t = Method::Mle)]
    pub method: Method,

    /// Confidence level of the interval.
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,

    #[arg(long = "c-trimmed", default_value_t = 0.01)]
    pub c_trimmed: f64,

    #[arg(long = "a-d", default_value_t = 0.001)]
    pub a_d: f64,

    #[arg(long = "b-d", default_value_t = 0.001)]
    pub b_d: f64,

    /// Use the n-1 numerator in the maximum likelihood estimator.
    #[arg(long, default_value_t = true, action = ArgAction::Set, value_name = "BOOL")]
    pub unbiased: bool,

    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub output: OutputFormat,

    /// Write the formatted result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Write the regression points (linfit) or density grid (bayes).
    #[arg(long = "plot-data")]
    pub plot_data: Option<PathBuf>,

    #[arg(long = "plot-low")]
    pub plot_low: Option<f64>,

    #[arg(long = "plot-upp")]
    pub plot_upp: Option<f64>,

    #[arg(long = "plot-by")]
    pub plot_by: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct HidalgoArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 10)]
    pub k: usize,

    #[arg(long, default_value_t = 3)]
    pub q: usize,

    #[arg(long, default_value_t = 0.75)]
    pub xi: f64,

    #[arg(long = "alpha-dirichlet", default_value_t = 0.05)]
    pub alpha_dirichlet: f64,

    #[arg(long = "a0-d", default_value_t = 1.0)]
    pub a0_d: f64,

    #[arg(long = "b0-d", default_value_t = 1.0)]
    pub b0_d: f64,

    #[arg(long, default_value_t = PriorType::Conjugate)]
    pub prior: PriorType,

    #[arg(long = "nominal-dim")]
    pub nominal_dim: Option<usize>,

    #[arg(long = "pi-mass", default_value_t = 0.5)]
    pub pi_mass: f64,

    #[arg(long, default_value_t = 2000)]
    pub nsim: usize,

    #[arg(long = "burn-in", default_value_t = 2000)]
    pub burn_in: usize,

    #[arg(long, default_value_t = 5)]
    pub thinning: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SummarizeArgs {
    /// Output directory of a `hidalgo` run.
    #[arg(long = "run-dir")]
    pub run_dir: PathBuf,

    /// Where to write the summaries (defaults to the run directory).
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,

    /// Number of clusters cut from the similarity dendrogram.
    #[arg(long = "k-clusters")]
    pub k_clusters: Option<usize>,

    /// Class labels as `file.csv[:column]` (column defaults to `class`).
    #[arg(long)]
    pub class: Option<String>,

    #[arg(long, default_value_t = Linkage::Average)]
    pub linkage: Linkage,

    /// Observations for the distance profile, overriding the run's input.
    #[arg(long, conflicts_with = "dist")]
    pub input: Option<PathBuf>,

    #[arg(long)]
    pub dist: Option<PathBuf>,

    /// Skip the nearest-neighbor distance profile.
    #[arg(long = "no-profile")]
    pub no_profile: bool,
}
