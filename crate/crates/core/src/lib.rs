//! Analysis and simulation of bribery-augmented selfish-mining attacks on
//! proof-of-work blockchains.
//!
//! The crate models two attacks: bribery semi-selfish mining ([`bssm`]) and
//! bribery (lead-)stubborn mining ([`bsm`]). For each it builds the
//! truncated Markov chain of the withholding process, solves the stationary
//! distribution ([`stationary`]), and evaluates per-actor expected rewards in
//! closed form. An independent event-level Monte Carlo engine ([`sim`])
//! replays the same publish/reserve/fork/settle rules block by block and is
//! the oracle the closed forms are validated against. The [`game`] module
//! composes multiple bribery targets, enumerates accept/deny payoff
//! matrices, and detects the bribery miner's dilemma.
//!
//! Closed forms can be evaluated two ways (see [`RewardMethod`]): with
//! variant-independent reference winning constants, or as the exact
//! expectation of the simulated event process. They coincide in structure
//! and differ in the branch-winning constants; the `exact` method is what
//! matches the simulator within statistical error.

pub mod bsm;
pub mod bssm;
pub mod game;
pub mod metrics;
pub mod options;
pub mod params;
pub mod sim;
pub mod stationary;

pub use bsm::{BsmState, BsmWinningProbs};
pub use bssm::{BssmState, BssmWinningProbs, RewardOutcome};
pub use game::{
    detect_dilemma, find_pure_nash, multi_target_rewards, payoff_matrix, Composition,
    DecisionProfile, DilemmaReport, MatrixCell, PayoffMatrix,
};
pub use metrics::{chain_growth_rates, honest_reward, normalize_relative, rer, GrowthRates};
pub use options::{AnalysisOptions, RewardMethod};
pub use params::{Actor, Decision, MiningModel, ModelError, RewardVector, StrategyParams};
pub use sim::{
    compare_closed_form, simulate, simulate_traced, ComponentDeviation, DeviationReport,
    ResolutionCounts, SimConfig, SimStats, Strategy,
};
pub use stationary::{solve_stationary, truncation_tail_bound, StationaryDistribution, TransitionModel};
