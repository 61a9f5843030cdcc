//! Attack configuration: mining powers, bribe rate, and actor identities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation and computation errors surfaced by this crate.
#[derive(Debug, Error)]
pub enum ModelError {
    /// A parameter violated its declared range.
    #[error("invalid parameter {name}: {value} ({constraint})")]
    InvalidParam {
        /// Offending field.
        name: &'static str,
        /// Rejected value.
        value: f64,
        /// Human-readable bound that was violated.
        constraint: &'static str,
    },
    /// A quantity that must be strictly positive was zero or negative.
    #[error("domain error: {0}")]
    Domain(String),
    /// The stationary solver failed to produce a distribution within tolerance.
    #[error("solver did not converge: residual {residual:.3e} > tol {tol:.3e}")]
    NoConvergence {
        /// Best residual achieved.
        residual: f64,
        /// Requested tolerance.
        tol: f64,
    },
    /// The transition model is structurally unusable (reducible, empty, non-stochastic).
    #[error("structural error in transition model: {0}")]
    Structure(String),
    /// Simulation configuration is incompatible with the selected strategy.
    #[error("incompatible configuration: {0}")]
    Incompatible(String),
}

/// Which bribery attack model a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MiningModel {
    /// Bribery semi-selfish mining.
    Bssm,
    /// Bribery (lead-)stubborn mining.
    Bsm,
}

impl std::fmt::Display for MiningModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MiningModel::Bssm => f.write_str("bssm"),
            MiningModel::Bsm => f.write_str("bsm"),
        }
    }
}

/// A target pool's response at fork decision points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    /// Extend the adversary's private branch and collect bribes.
    Accept,
    /// Stay on the public branch.
    Deny,
}

impl Decision {
    /// True for [`Decision::Accept`].
    pub fn accepts(self) -> bool {
        matches!(self, Decision::Accept)
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Decision::Accept => f.write_str("accept"),
            Decision::Deny => f.write_str("deny"),
        }
    }
}

/// One of the reward-earning entities in the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Actor {
    /// All adversary pools combined (selfish plus honest-style sub-pool).
    Adversary,
    /// Honest pools that are neither adversary nor bribery targets.
    OtherPools,
    /// The i-th target bribery pool, indexing into [`StrategyParams::betas`].
    Target(usize),
}

impl std::fmt::Display for Actor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Actor::Adversary => f.write_str("adversary"),
            Actor::OtherPools => f.write_str("other"),
            Actor::Target(i) => write!(f, "target{}", i + 1),
        }
    }
}

/// Normalized attack configuration shared by every model and the simulator.
///
/// Powers are fractions of total system mining power. `alpha` is the
/// adversary, each entry of `betas` is one target bribery pool, and the
/// remainder `1 - alpha - sum(betas)` belongs to the other pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    /// Adversary mining power, in (0, 0.5).
    pub alpha: f64,
    /// Fraction of adversary power mining honest-style (semi-selfish split).
    pub rho: f64,
    /// Fraction of other pools extending the private branch in an equal fork.
    pub gamma: f64,
    /// Bribe as a fraction of the adversary's total system reward.
    pub epsilon: f64,
    /// Target pool powers, one entry per target.
    pub betas: Vec<f64>,
}

impl StrategyParams {
    /// Builds a validated configuration.
    pub fn new(
        alpha: f64,
        rho: f64,
        gamma: f64,
        epsilon: f64,
        betas: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let p = StrategyParams {
            alpha,
            rho,
            gamma,
            epsilon,
            betas,
        };
        p.validate()?;
        Ok(p)
    }

    /// Single aggregate target convenience constructor.
    pub fn single(
        alpha: f64,
        rho: f64,
        gamma: f64,
        epsilon: f64,
        beta: f64,
    ) -> Result<Self, ModelError> {
        Self::new(alpha, rho, gamma, epsilon, vec![beta])
    }

    /// Checks every declared range. The open bound at `alpha = 0.5` is
    /// rejected; `rho`, `gamma` and `epsilon` may sit on their closed bounds.
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |name, value, constraint| Err(ModelError::InvalidParam {
            name,
            value,
            constraint,
        });
        if !(self.alpha > 0.0 && self.alpha < 0.5) || !self.alpha.is_finite() {
            return bad("alpha", self.alpha, "0 < alpha < 0.5");
        }
        if !(0.0..=1.0).contains(&self.rho) || !self.rho.is_finite() {
            return bad("rho", self.rho, "0 <= rho <= 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !self.gamma.is_finite() {
            return bad("gamma", self.gamma, "0 <= gamma <= 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon) || !self.epsilon.is_finite() {
            return bad("epsilon", self.epsilon, "0 <= epsilon <= 1");
        }
        for &b in &self.betas {
            if b <= 0.0 || !b.is_finite() {
                return bad("beta", b, "each beta > 0");
            }
        }
        let total = self.alpha + self.beta_total();
        if total >= 1.0 {
            return bad(
                "alpha + sum(betas)",
                total,
                "other pools must keep positive power",
            );
        }
        Ok(())
    }

    /// Aggregate target power `sum(betas)`.
    pub fn beta_total(&self) -> f64 {
        self.betas.iter().sum()
    }

    /// Other pools' power `1 - alpha - sum(betas)`.
    pub fn delta(&self) -> f64 {
        1.0 - self.alpha - self.beta_total()
    }

    /// Number of configured targets.
    pub fn n_targets(&self) -> usize {
        self.betas.len()
    }

    /// Copy of this configuration with targets replaced by one pool of the
    /// same aggregate power. Used wherever the single-target equations apply.
    pub fn aggregated(&self) -> StrategyParams {
        let total = self.beta_total();
        StrategyParams {
            betas: if total > 0.0 { vec![total] } else { Vec::new() },
            ..self.clone()
        }
    }
}

/// Per-actor expected rewards for one model variant, normalized per
/// block-generation event with coinbase 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    /// Adversary reward after bribe payment.
    pub reward_adversary: f64,
    /// Other pools' reward.
    pub reward_other: f64,
    /// Per-target rewards including received bribe shares.
    pub reward_targets: Vec<f64>,
    /// Expected bribe transfer per event (already netted into the above).
    pub bribe_paid: f64,
    /// Which response profile produced this vector: `true` = accept.
    pub variant_accept: bool,
}

impl RewardVector {
    /// Sum of all reward components (bribes cancel between payer and payee).
    pub fn total(&self) -> f64 {
        self.reward_adversary + self.reward_other + self.reward_targets.iter().sum::<f64>()
    }

    /// Aggregate target reward.
    pub fn reward_target_total(&self) -> f64 {
        self.reward_targets.iter().sum()
    }

    /// Reward for one actor.
    pub fn actor(&self, a: Actor) -> f64 {
        match a {
            Actor::Adversary => self.reward_adversary,
            Actor::OtherPools => self.reward_other,
            Actor::Target(i) => self.reward_targets[i],
        }
    }

    /// Checks the component invariants: non-negative entries, total bounded
    /// by one block per event (plus numerical slack).
    pub fn check(&self, tol: f64) -> Result<(), ModelError> {
        let all = std::iter::once(self.reward_adversary)
            .chain(std::iter::once(self.reward_other))
            .chain(self.reward_targets.iter().copied());
        for v in all {
            if v < -tol || !v.is_finite() {
                return Err(ModelError::Domain(format!(
                    "negative or non-finite reward component {v}"
                )));
            }
        }
        if self.total() > 1.0 + tol {
            return Err(ModelError::Domain(format!(
                "reward components sum to {} > 1",
                self.total()
            )));
        }
        Ok(())
    }
}
