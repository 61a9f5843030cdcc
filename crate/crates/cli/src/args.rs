//! Command-line interface definition.

use bribemine_core::{Decision, MiningModel, RewardMethod, Strategy};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "bribemine",
    version,
    about = "Analyze and simulate bribery-augmented selfish-mining attacks",
    after_help = "Diagnostics go to stderr, data to stdout or --out. \
                  Exit codes: 0 success, 2 configuration error, 3 numerical failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Closed-form analysis of one parameter point
    Analyze(AnalyzeArgs),
    /// Parameter sweep with CSV output
    Sweep(SweepArgs),
    /// Event-level Monte Carlo run
    Simulate(SimulateArgs),
    /// Multi-target payoff matrix, Nash equilibria, and dilemma verdict
    Dilemma(DilemmaArgs),
    /// Closed-form chain growth rates
    Growth(GrowthArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Adversary mining power alpha in (0, 0.5)
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Honest-style fraction rho of adversary power (semi-selfish split)
    #[arg(long)]
    pub rho: Option<f64>,

    /// Fork-extension fraction gamma of other pools
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Bribe fraction epsilon of the adversary's reward
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Target pool powers, comma separated (e.g. 0.29,0.27)
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,

    /// Attack model
    #[arg(long, value_parser = parse_model)]
    pub model: Option<MiningModel>,

    /// Per-target accept/deny flags, comma separated (accept|deny|a|d|1|0)
    #[arg(long, value_delimiter = ',', value_parser = parse_decision)]
    pub accept: Option<Vec<Decision>>,

    /// Ladder truncation depth
    #[arg(short = 'K', long = "depth")]
    pub depth: Option<usize>,

    /// Stationary-solver residual tolerance
    #[arg(long)]
    pub tol: Option<f64>,

    /// RNG seed for simulation commands
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of block-generation events for simulation commands
    #[arg(long)]
    pub rounds: Option<u64>,

    /// Write the primary output to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Read defaults from a TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Closed-form evaluation method
    #[arg(long, value_parser = parse_method)]
    pub method: Option<RewardMethod>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Sweep axis as name=start:stop:steps (repeat for up to 3 axes;
    /// names: alpha, rho, gamma, epsilon, beta)
    #[arg(long = "sweep", value_name = "AXIS")]
    pub axes: Vec<String>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Strategy to simulate
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,

    /// Write a line-delimited event trace to this file
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DilemmaArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Payoff composition: folded evaluates each target against a
    /// single-target system, pooled splits one aggregate chain by sub-pool
    #[arg(long, value_parser = parse_composition)]
    pub composition: Option<bribemine_core::Composition>,
}

#[derive(Args, Debug)]
pub struct GrowthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

fn parse_model(s: &str) -> Result<MiningModel, String> {
    match s.to_ascii_lowercase().as_str() {
        "bssm" => Ok(MiningModel::Bssm),
        "bsm" => Ok(MiningModel::Bsm),
        other => Err(format!("unknown model '{other}' (expected bssm|bsm)")),
    }
}

fn parse_method(s: &str) -> Result<RewardMethod, String> {
    match s.to_ascii_lowercase().as_str() {
        "reference" => Ok(RewardMethod::Reference),
        "exact" => Ok(RewardMethod::Exact),
        other => Err(format!("unknown method '{other}' (expected reference|exact)")),
    }
}

pub(crate) fn parse_decision(s: &str) -> Result<Decision, String> {
    match s.to_ascii_lowercase().as_str() {
        "accept" | "a" | "1" | "true" | "yes" => Ok(Decision::Accept),
        "deny" | "d" | "0" | "false" | "no" => Ok(Decision::Deny),
        other => Err(format!("unknown decision '{other}' (expected accept|deny)")),
    }
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s.to_ascii_lowercase().as_str() {
        "honest" | "hm" => Ok(Strategy::Honest),
        "selfish" | "sm" => Ok(Strategy::Selfish),
        "semiselfish" | "ssm" => Ok(Strategy::SemiSelfish),
        "leadstubborn" | "stubborn" => Ok(Strategy::LeadStubborn),
        "bssm" => Ok(Strategy::Bssm),
        "bsm" => Ok(Strategy::Bsm),
        other => Err(format!(
            "unknown strategy '{other}' (expected honest|selfish|semiselfish|leadstubborn|bssm|bsm)"
        )),
    }
}

fn parse_composition(s: &str) -> Result<bribemine_core::Composition, String> {
    match s.to_ascii_lowercase().as_str() {
        "folded" => Ok(bribemine_core::Composition::Folded),
        "pooled" => Ok(bribemine_core::Composition::Pooled),
        other => Err(format!(
            "unknown composition '{other}' (expected folded|pooled)"
        )),
    }
}
