use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use annoplan::simulation::Metric;
use annoplan::strategies::WithinRule;

#[derive(Debug, Parser)]
#[command(name = "annoplan", version, about = "Plan and simulate annotation of extractive QA data")]
pub struct Cli {
    /// Base seed for every random decision.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Maximum number of parallel workers.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output format for tables printed to standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a SQuAD-format file and report dropped samples.
    Validate {
        dataset: PathBuf,
    },
    /// Sample, context and answer-length statistics.
    Stats {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
    },
    /// Run the simulations described by a JSON config file.
    Simulate {
        config: PathBuf,
    },
    /// Emit a one-shot ranked annotation worklist.
    Select(SelectArgs),
    /// Check that an external scorer speaks the wire protocol.
    ProtocolCheck {
        /// Seconds to wait for each reply.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        /// Backend program followed by its arguments.
        #[arg(required = true, trailing_var_arg = true, allow_hyphen_values = true)]
        command: Vec<String>,
    },
    /// Recompute saturation and strategy comparison from saved curves.
    Report {
        /// Learning-curve JSON files written by `simulate`.
        #[arg(required = true)]
        curves: Vec<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
    },
    /// Write the planted synthetic benchmark and a matching config.
    Generate {
        #[arg(long)]
        output_dir: PathBuf,
        /// Override the number of in-domain contexts.
        #[arg(long)]
        contexts: Option<usize>,
    },
    /// Train the baseline scorer on a dataset and save the model.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Random,
    Uncertainty,
    Difficulty,
    ContextRoundrobin,
    PerContextQuota,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WithinArg {
    Random,
    Uncertainty,
}

impl From<WithinArg> for WithinRule {
    fn from(w: WithinArg) -> Self {
        match w {
            WithinArg::Random => WithinRule::Random,
            WithinArg::Uncertainty => WithinRule::Uncertainty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    F1,
    Em,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::F1 => Metric::F1,
            MetricArg::Em => Metric::Em,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Unlabeled pool in SQuAD format.
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    /// Batch size; ignored by per-context-quota.
    #[arg(long)]
    pub k: Option<usize>,
    /// Rule inside a context for round-robin and quota strategies.
    #[arg(long, value_enum, default_value_t = WithinArg::Random)]
    pub within: WithinArg,
    #[arg(long)]
    pub questions_per_context: Option<usize>,
    #[arg(long)]
    pub n_contexts: Option<usize>,
    /// Saved baseline model used to score the pool.
    #[arg(long, conflicts_with_all = ["train_on", "backend"])]
    pub model: Option<PathBuf>,
    /// Train a baseline model on this labeled dataset first.
    #[arg(long, conflicts_with = "backend")]
    pub train_on: Option<PathBuf>,
    /// External scorer program.
    #[arg(long)]
    pub backend: Option<String>,
    /// Argument passed to the external scorer; repeatable.
    #[arg(long = "backend-arg", allow_hyphen_values = true, requires = "backend")]
    pub backend_args: Vec<String>,
    /// Write the worklist CSV here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
