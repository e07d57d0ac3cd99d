use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "rtclt", version, about = "Return-time CLT experiments and digit-file analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo trials of the return-time statistic on an IID source.
    Simulate(SimulateArgs),
    /// Per-segment statistics of a digit file.
    Analyze(AnalyzeArgs),
    /// Exact moments of ln R for R ~ Geom(p).
    Moments(MomentsArgs),
    /// Exact pair covariance of log waiting times and its envelopes.
    NaCheck(NaCheckArgs),
    /// Overlapping-return-time and prefix-length estimators.
    Baseline(BaselineArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output directory; falls back to RTCLT_OUT_DIR, then the current directory.
    #[arg(long, env = "RTCLT_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    /// Keep drawing until every return time resolves.
    Extend,
    /// Stop at the sized per-trial length.
    Fixed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProbArgs {
    /// Alphabet size.
    #[arg(long)]
    pub alphabet: Option<usize>,
    /// Comma-separated symbol probabilities; equidistributed if omitted.
    #[arg(long)]
    pub probs: Option<String>,
    /// Rescale probabilities that do not sum to 1.
    #[arg(long)]
    pub renormalize: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ProbArgs,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub ell: usize,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    pub correction: Switch,
    #[arg(long, value_enum, default_value_t = Horizon::Extend)]
    pub horizon: Horizon,
    /// Per-trial symbol cap under `--horizon extend`.
    #[arg(long, default_value_t = rtclt_core::simulate::DEFAULT_MAX_SYMBOLS)]
    pub max_symbols: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Return times stay inside each segment.
    Segment,
    /// Return times may run into the rest of the file.
    Rest,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub file: PathBuf,
    /// 10 for decimal digits, 2 for binary.
    #[arg(long, default_value_t = 10)]
    pub alphabet: usize,
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub ell: usize,
    #[arg(long, default_value_t = 400_000)]
    pub segment_length: usize,
    #[arg(long, value_enum, default_value_t = Scope::Rest)]
    pub scan_scope: Scope,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MomentsArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NaCheckArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMode {
    Grassberger,
    Wyner,
    Overlap,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long, value_enum)]
    pub mode: BaselineMode,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub source: ProbArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Symbols generated past the first n for prefix lengths.
    #[arg(long, default_value_t = 1024)]
    pub extension: usize,
    /// Largest shift tested for overlapping return times.
    #[arg(long, default_value_t = 1 << 24)]
    pub horizon: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}
