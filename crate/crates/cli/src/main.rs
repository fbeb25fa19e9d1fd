use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod errors;

#[derive(Debug, Parser)]
#[command(name = "mtcurate", version, about = "Corpus curation, mixture search, rewards and candidate fusion for MT training")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Seed for every stochastic step (default 0, or the config file's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write a machine-readable JSON report here.
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a character n-gram language identifier.
    LangidTrain(commands::LangidTrain),
    /// Keep documents identified as their declared (or an expected) language.
    LangidFilter(commands::LangidFilter),
    /// Remove near-duplicate documents with MinHash + LSH.
    Dedup(commands::Dedup),
    /// Train a Kneser-Ney n-gram language model.
    LmTrain(commands::LmTrain),
    /// Drop high-perplexity documents.
    LmFilter(commands::LmFilter),
    /// Attach composite quality scores computed from rated dimensions.
    QualityScore(commands::QualityScore),
    /// Keep documents whose composite quality reaches a threshold.
    QualityFilter(commands::QualityFilter),
    /// Flag samples whose repeated judge scores disagree.
    JudgeFlag(commands::JudgeFlag),
    /// Sample candidate data mixtures from a Dirichlet.
    MixSample(commands::MixSample),
    /// Fit the mixture-to-loss regression on proxy runs.
    MixFit(commands::MixFit),
    /// Search the simplex for the mixture with the lowest predicted loss.
    MixOptimize(commands::MixOptimize),
    /// Tabulate a warmup + decay learning-rate schedule as CSV.
    LrCurve(commands::LrCurve),
    /// Compute composite rewards for hypotheses.
    RewardScore(commands::RewardScore),
    /// Group-normalize rewards into GRPO advantages.
    GrpoAdvantages(commands::GrpoAdvantages),
    /// Generate candidate translations over a sampling grid.
    Translate(commands::Translate),
    /// Generate candidates and fuse them into one translation.
    Fuse(commands::Fuse),
    /// Score hypotheses and report per direction group.
    Eval(commands::Eval),
    /// Run a configured sequence of filtering stages.
    PipelineRun(commands::PipelineRun),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(errors::exit_code(&e) as u8)
        }
    }
}
