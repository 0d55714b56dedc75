use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "distval", version, about = "Distributional values for stochastic cooperative games")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute per-player values of a game.
    Explain(ExplainArgs),
    /// Run the property suite.
    Verify(VerifyArgs),
    /// Remove players in score order and trace two class probabilities.
    Fidelity(FidelityArgs),
    /// List the coalition distribution of every player.
    EnumerateStructure(EnumerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Mc,
    Sampled,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Mc => "mc",
            Mode::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Result file; `-` streams to stdout.
    #[arg(long, alias = "output", value_name = "PATH")]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GameArgs {
    /// Game spec file.
    #[arg(long, value_name = "PATH")]
    pub game: PathBuf,

    /// shapley | loo | weights:FILE | perm:FILE | custom:FILE. Overrides the
    /// structure in the spec file; the default is shapley.
    #[arg(long)]
    pub structure: Option<String>,
}

#[derive(Debug, Args)]
pub struct Estimation {
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: Mode,

    /// Coalition draws (mc, sampled).
    #[arg(long)]
    pub samples: Option<usize>,

    /// Noise seeds per coalition (sampled).
    #[arg(long)]
    pub seeds: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// A player index or `all`.
    #[arg(long, default_value = "all")]
    pub player: String,

    #[command(flatten)]
    pub estimation: Estimation,

    /// Number of transitions listed per categorical player.
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Comma-separated property ids, or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,

    /// Structure used in the value-property checks: shapley | loo |
    /// weights:FILE | perm:FILE | custom:FILE.
    #[arg(long)]
    pub structure: Option<String>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Random games per property.
    #[arg(long, default_value_t = distval::verify::suite::DEFAULT_TRIALS)]
    pub trials: usize,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    #[command(flatten)]
    pub game: GameArgs,

    /// Tracked classes `C1,C2`.
    #[arg(long, value_name = "C1,C2")]
    pub fidelity_classes: String,

    /// Players removed; defaults to all.
    #[arg(long)]
    pub steps: Option<usize>,

    /// A, B, C or all.
    #[arg(long, default_value = "all")]
    pub scheme: String,

    #[command(flatten)]
    pub estimation: Estimation,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub game: GameArgs,

    #[command(flatten)]
    pub output: Output,
}
