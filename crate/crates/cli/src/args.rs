//! Command-line surface: one subcommand per pipeline stage, with flag
//! names mirroring the model's hyperparameter symbols.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pgbn_core::gibbs::{Layer1Mode, SamplerOptions};
use pgbn_core::model::{Hyperparams, NetworkKind};

/// Every run with equal seed, worker count, and input files produces
/// byte-identical artifacts.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "pgbn",
    version,
    about = "Train, evaluate, and sample deep Poisson gamma belief networks on bag-of-words corpora",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Layer-wise Gibbs training; writes one network file per depth plus a log.
    Train(TrainArgs),
    /// Mask a corpus and score the held-out tokens under a trained network.
    Eval(EvalArgs),
    /// Extract per-document factor-usage proportions under a trained network.
    Features(FeaturesArgs),
    /// Simulate documents from a trained network.
    Generate(GenerateArgs),
    /// Export every factor as a ranked term list.
    Topics(TopicsArgs),
    /// Run sampler self-checks and the overdispersion simulation.
    Diagnose(DiagnoseArgs),
}

impl Cli {
    pub fn common(&self) -> &CommonArgs {
        match &self.command {
            Command::Train(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Features(a) => &a.common,
            Command::Generate(a) => &a.common,
            Command::Topics(a) => &a.common,
            Command::Diagnose(a) => &a.common,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Base seed for all random draws.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for per-document phases; results do not depend on it.
    #[arg(long, env = "PGBN_WORKERS", default_value_t = 1)]
    pub workers: usize,
}

/// Prior hyperparameters; unset flags fall back to the values stored in the
/// model file (where one is read) and then to the built-in defaults.
#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Dirichlet concentration of the loading columns, per layer
    /// (comma-separated; the last value repeats for deeper layers).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub eta: Option<Vec<f64>>,
    /// Shape of the top-weight mass prior and first shape of the
    /// second-layer probability prior.
    #[arg(long)]
    pub a0: Option<f64>,
    /// Rate of the top-weight mass prior and second shape of the
    /// second-layer probability prior.
    #[arg(long)]
    pub b0: Option<f64>,
    /// Shape of the gamma priors on scale variables.
    #[arg(long)]
    pub e0: Option<f64>,
    /// Rate of the gamma priors on scale variables.
    #[arg(long)]
    pub f0: Option<f64>,
}

impl PriorArgs {
    pub fn apply(&self, mut h: Hyperparams) -> Hyperparams {
        if let Some(eta) = &self.eta {
            h.eta = eta.clone();
        }
        if let Some(v) = self.a0 {
            h.a0 = v;
        }
        if let Some(v) = self.b0 {
            h.b0 = v;
        }
        if let Some(v) = self.e0 {
            h.e0 = v;
        }
        if let Some(v) = self.f0 {
            h.f0 = v;
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerMode {
    /// Token-level factor sampling with the first-layer loadings and
    /// activations marginalized out.
    Collapsed,
    /// Blocked multinomial splits with explicit first-layer loadings.
    Blocked,
}

impl SamplerMode {
    pub fn options(self) -> SamplerOptions {
        SamplerOptions {
            layer1: match self {
                SamplerMode::Collapsed => Layer1Mode::Collapsed,
                SamplerMode::Blocked => Layer1Mode::Blocked,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplerMode::Collapsed => "collapsed",
            SamplerMode::Blocked => "blocked",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PosteriorMode {
    /// Store the final Gibbs sample of each depth.
    LastSample,
    /// Store the running mean over each depth's collection sweeps.
    RunningMean,
}

impl PosteriorMode {
    pub fn kind(self) -> NetworkKind {
        match self {
            PosteriorMode::LastSample => NetworkKind::LastSample,
            PosteriorMode::RunningMean => NetworkKind::RunningMean,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PosteriorMode::LastSample => "last-sample",
            PosteriorMode::RunningMean => "running-mean",
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus in sparse bag-of-words format.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Vocabulary sidecar, one term per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Stem for the emitted network files: one `<stem>.t<depth>.pgbn` per depth.
    #[arg(long, default_value = "model")]
    pub model_out: PathBuf,
    /// Progress log path (default: `<model-out>.log`).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Width budget of the first layer.
    #[arg(long, default_value_t = 100)]
    pub k1max: usize,
    /// Number of layers to grow.
    #[arg(long, default_value_t = 1)]
    pub tmax: usize,
    /// Burn-in sweeps per depth (comma-separated; the last value repeats).
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "500")]
    pub burn: Vec<usize>,
    /// Collection sweeps per depth (comma-separated; the last value repeats).
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "500")]
    pub collect: Vec<usize>,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// First-layer sweep flavour.
    #[arg(long, value_enum, default_value_t = SamplerMode::Collapsed)]
    pub sampler: SamplerMode,
    /// Posterior summary stored in the emitted networks.
    #[arg(long, value_enum, default_value_t = PosteriorMode::LastSample)]
    pub posterior: PosteriorMode,
    /// Drop terms whose corpus-wide count is below this before training.
    #[arg(long, default_value_t = 0)]
    pub min_count: u64,
    /// Stopword list, one term per line; requires --vocab to resolve terms.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Corpus in sparse bag-of-words format; tokens are masked per document.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Trained network file.
    #[arg(long)]
    pub model_in: PathBuf,
    /// Share of each document's tokens given to the sampler; the rest are scored.
    #[arg(long, default_value_t = 0.3)]
    pub train_fraction: f64,
    /// Sweeps discarded before collection.
    #[arg(long, default_value_t = 500)]
    pub burn: usize,
    /// Post-burn-in sweeps; every `thin`-th one contributes a sample.
    #[arg(long, default_value_t = 500)]
    pub collect: usize,
    /// Sweeps between collected samples.
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    /// Keep the loadings fixed and resample only per-document activations.
    #[arg(long)]
    pub frozen_phi: bool,
    /// First-layer sweep flavour (ignored with --frozen-phi).
    #[arg(long, value_enum, default_value_t = SamplerMode::Collapsed)]
    pub sampler: SamplerMode,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Report destination; `-` writes to standard output.
    #[arg(long, default_value = "-")]
    pub report_out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Corpus in sparse bag-of-words format.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Trained network file.
    #[arg(long)]
    pub model_in: PathBuf,
    /// Sweeps discarded before collection, per document chain.
    #[arg(long, default_value_t = 500)]
    pub burn: usize,
    /// Samples averaged per document, one per sweep after burn-in.
    #[arg(long, default_value_t = 500)]
    pub collect: usize,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Tab-separated output; `-` writes to standard output.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Trained network file.
    #[arg(long)]
    pub model_in: PathBuf,
    /// Vocabulary sidecar for readable term names.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Number of documents to simulate.
    #[arg(long, default_value_t = 10)]
    pub docs: usize,
    /// Ranked terms reported per document.
    #[arg(long, default_value_t = 30)]
    pub top_m: usize,
    /// Per-layer scales c^(2)..c^(T+1) (comma-separated); defaults to the
    /// medians recorded at training time.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub c_sched: Option<Vec<f64>>,
    /// Report destination; `-` writes to standard output.
    #[arg(long, default_value = "-")]
    pub report_out: PathBuf,
    /// Also write the realized counts as a bag-of-words file.
    #[arg(long)]
    pub counts_out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct TopicsArgs {
    /// Trained network file.
    #[arg(long)]
    pub model_in: PathBuf,
    /// Vocabulary sidecar for readable term names.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Terms listed per factor.
    #[arg(long, default_value_t = 20)]
    pub top_m: usize,
    /// Restrict the export to one layer (default: all layers).
    #[arg(long)]
    pub layer: Option<usize>,
    /// Report destination; `-` writes to standard output.
    #[arg(long, default_value = "-")]
    pub report_out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Monte-Carlo draws per overdispersion setting.
    #[arg(long, default_value_t = 200_000)]
    pub draws: usize,
    /// Optional corpus to summarize alongside the self-checks.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Report destination; `-` writes to standard output.
    #[arg(long, default_value = "-")]
    pub report_out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}
