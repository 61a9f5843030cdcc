//! Shared knobs for the analytical reward engines.

use serde::{Deserialize, Serialize};

/// Which branch-winning constants the closed-form rewards use.
///
/// The two methods share the same Markov chains and the same bribery-stage
/// accounting; they differ in how blocks contested during deep withholding
/// phases are credited.
///
/// * [`RewardMethod::Reference`] uses variant-independent winning constants
///   obtained from a ladder-exit normalization, and attributes fork-time
///   blocks per those constants. Under this system the accept and deny
///   variants differ only by the direct bribery-stage attribution and the
///   bribe transfer, so the classical accept-gain and bribe-threshold
///   identities hold exactly everywhere.
/// * [`RewardMethod::Exact`] solves the winning constants from first-step
///   analysis of the event process, per response variant. This is the
///   system the Monte Carlo engine reproduces within statistical error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMethod {
    /// Closed forms with ladder-exit-normalized, variant-independent
    /// winning constants.
    Reference,
    /// Exact expectation of the simulated event process.
    Exact,
}

impl std::fmt::Display for RewardMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RewardMethod::Reference => f.write_str("reference"),
            RewardMethod::Exact => f.write_str("exact"),
        }
    }
}

/// Truncation depth, solver tolerance, and reward method for one analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Deepest retained ladder index.
    pub depth: usize,
    /// Stationary-solver residual tolerance.
    pub tol: f64,
    /// Reward system to evaluate.
    pub method: RewardMethod,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            depth: 64,
            tol: 1e-12,
            method: RewardMethod::Exact,
        }
    }
}

impl AnalysisOptions {
    /// Same options with a different reward method.
    pub fn with_method(self, method: RewardMethod) -> Self {
        AnalysisOptions { method, ..self }
    }
}
