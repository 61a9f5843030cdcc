//! Revenue metrics: relative extra reward, share normalization, and the
//! closed-form main-chain growth rates.

use crate::params::{ModelError, RewardVector, StrategyParams};
use serde::{Deserialize, Serialize};

/// Relative extra reward `(r_new - r_base) / r_base`.
pub fn rer(r_new: f64, r_base: f64) -> Result<f64, ModelError> {
    if r_base.is_nan() || r_base <= 0.0 {
        return Err(ModelError::Domain(format!(
            "RER baseline must be positive, got {r_base}"
        )));
    }
    Ok((r_new - r_base) / r_base)
}

/// Per-actor shares of the total reward: adversary, other pools, then one
/// entry per target. Shares sum to 1.
pub fn normalize_relative(rv: &RewardVector) -> Result<Vec<f64>, ModelError> {
    let total = rv.total();
    if total.is_nan() || total <= 0.0 {
        return Err(ModelError::Domain(format!(
            "cannot normalize zero or negative total reward {total}"
        )));
    }
    let mut shares = Vec::with_capacity(2 + rv.reward_targets.len());
    shares.push(rv.reward_adversary / total);
    shares.push(rv.reward_other / total);
    shares.extend(rv.reward_targets.iter().map(|r| r / total));
    Ok(shares)
}

/// Expected honest reward equals the miner's power share.
pub fn honest_reward(power: f64) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&power) || !power.is_finite() {
        return Err(ModelError::Domain(format!(
            "power must lie in [0, 1], got {power}"
        )));
    }
    Ok(power)
}

/// Main-chain growth rates (public-chain extensions per block event) for
/// selfish, semi-selfish, and bribery semi-selfish mining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRates {
    /// Selfish mining: `1 - alpha`.
    pub gr_sm: f64,
    /// Semi-selfish mining: `1 - alpha + rho * alpha`.
    pub gr_ssm: f64,
    /// Bribery semi-selfish mining; equals the semi-selfish rate.
    pub gr_bssm: f64,
}

/// Closed-form chain growth rates for a configuration with one aggregate
/// target. `gr_bssm == gr_ssm == gr_sm + rho * alpha` holds identically.
pub fn chain_growth_rates(p: &StrategyParams) -> Result<GrowthRates, ModelError> {
    p.validate()?;
    let beta = p.beta_total();
    let gr_sm = 1.0 - p.alpha;
    let gr_ssm = (1.0 - p.alpha) + p.rho * p.alpha;
    let gr_bssm = (1.0 - p.alpha - beta) + p.rho * p.alpha + beta;
    Ok(GrowthRates {
        gr_sm,
        gr_ssm,
        gr_bssm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rer_direct_values() {
        assert_abs_diff_eq!(rer(0.33, 0.30).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(rer(0.30, 0.30).unwrap(), 0.0, epsilon = 1e-15);
        assert!(rer(0.1, 0.0).is_err());
        assert!(rer(0.1, -0.2).is_err());
    }

    #[test]
    fn normalize_shares() {
        let rv = RewardVector {
            reward_adversary: 0.2,
            reward_other: 0.2,
            reward_targets: vec![0.1],
            bribe_paid: 0.0,
            variant_accept: true,
        };
        let s = normalize_relative(&rv).unwrap();
        assert_abs_diff_eq!(s[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(s[2], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn normalize_degenerate() {
        let rv = RewardVector {
            reward_adversary: 0.5,
            reward_other: 0.0,
            reward_targets: vec![0.0],
            bribe_paid: 0.0,
            variant_accept: false,
        };
        let s = normalize_relative(&rv).unwrap();
        assert_eq!(s, vec![1.0, 0.0, 0.0]);
        let zero = RewardVector {
            reward_adversary: 0.0,
            reward_other: 0.0,
            reward_targets: vec![],
            bribe_paid: 0.0,
            variant_accept: false,
        };
        assert!(normalize_relative(&zero).is_err());
    }

    #[test]
    fn honest_reward_is_identity() {
        assert_eq!(honest_reward(0.36).unwrap(), 0.36);
        assert_eq!(honest_reward(0.0).unwrap(), 0.0);
        assert_eq!(honest_reward(1.0).unwrap(), 1.0);
        assert!(honest_reward(1.2).is_err());
        assert!(honest_reward(-0.1).is_err());
    }

    #[test]
    fn growth_rate_identities() {
        let p = StrategyParams::single(0.3, 0.0, 0.5, 0.0, 0.1).unwrap();
        let g = chain_growth_rates(&p).unwrap();
        assert_abs_diff_eq!(g.gr_sm, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(g.gr_ssm, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(g.gr_bssm, 0.7, epsilon = 1e-15);

        let p = StrategyParams::single(0.3, 0.1, 0.5, 0.0, 0.1).unwrap();
        let g = chain_growth_rates(&p).unwrap();
        assert_abs_diff_eq!(g.gr_bssm - g.gr_sm, 0.03, epsilon = 1e-15);
        assert_abs_diff_eq!(g.gr_bssm, g.gr_ssm, epsilon = 1e-15);
    }
}
