//! Bribery semi-selfish mining: state space, chain builder, branch-winning
//! probabilities, reward formulas, and the profitable-bribe threshold.
//!
//! The adversary splits its power `alpha` into a selfish part `(1-rho)alpha`
//! that withholds blocks and an honest-style part `rho*alpha` that publishes
//! immediately. Forks reach a bribery initiation stage where the target pool
//! chooses between extending the adversary's branch (accept) or the public
//! branch (deny).

use crate::options::{AnalysisOptions, RewardMethod};
use crate::params::{Decision, ModelError, RewardVector, StrategyParams};
use crate::stationary::{solve_stationary, TransitionModel};
use serde::{Deserialize, Serialize};

/// States of the bribery semi-selfish mining chain.
///
/// `Ladder(k)` is a private lead of `k` with the latest public block found by
/// other pools or targets; `LadderPrime(k)` is a lead of `k` with the latest
/// public block found by the adversary's honest-style sub-pool (the private
/// chain then holds `k + 1` unpublished blocks). The three `ZeroPrime`
/// states form the bribery initiation stage: two equal branches whose public
/// tip was found by other pools, a target, or the adversary's honest-style
/// sub-pool respectively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BssmState {
    /// No private lead, no fork.
    Zero,
    /// Private lead of `k >= 1`, public tip from non-adversary pools.
    Ladder(u32),
    /// Private lead of `k >= 1`, public tip from the adversary's honest pool.
    LadderPrime(u32),
    /// Equal-branch fork against other pools.
    ZeroPrimeO,
    /// Equal-branch fork against a target pool.
    ZeroPrimeB,
    /// Equal-branch fork between the adversary's own sub-pools.
    ZeroPrimeA,
}

impl std::fmt::Display for BssmState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BssmState::Zero => f.write_str("0"),
            BssmState::Ladder(k) => write!(f, "{k}"),
            BssmState::LadderPrime(k) => write!(f, "{k}'"),
            BssmState::ZeroPrimeO => f.write_str("0'o"),
            BssmState::ZeroPrimeB => f.write_str("0'b"),
            BssmState::ZeroPrimeA => f.write_str("0'a"),
        }
    }
}

/// Branch-winning probabilities and bribery-stage entry split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BssmWinningProbs {
    /// Probability the public branch eventually wins, seen from a deep state.
    pub p_public: f64,
    /// Probability the private branch eventually wins, seen from a deep state.
    pub p_private: f64,
    /// Ladder-exit entry probability of the fork-against-others stage.
    pub p0o: f64,
    /// Ladder-exit entry probability of the fork-against-target stage.
    pub p0b: f64,
    /// Ladder-exit entry probability of the adversary-internal fork stage.
    pub p0a: f64,
}

/// Analytical rewards plus diagnostics for one response profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    /// Post-bribe per-actor rewards.
    pub rewards: RewardVector,
    /// Adversary reward before the bribe transfer.
    pub adversary_pre_bribe: f64,
    /// Bound on the reward mass omitted by ladder truncation.
    pub tail_bound: f64,
    /// Stationary-solver residual.
    pub residual: f64,
}

/// Builds the truncated transition model for an aggregate-target
/// configuration. Zero-probability transitions are omitted, so degenerate
/// configurations (`rho = 0`, `beta = 0`) collapse to the corresponding
/// simpler attack automatically.
pub fn build_chain(
    p: &StrategyParams,
    depth: usize,
) -> Result<TransitionModel<BssmState>, ModelError> {
    p.validate()?;
    if depth < 3 {
        return Err(ModelError::Domain(format!(
            "truncation depth must be at least 3, got {depth}"
        )));
    }
    let a_s = (1.0 - p.rho) * p.alpha;
    let a_i = p.rho * p.alpha;
    let beta = p.beta_total();
    let delta = p.delta();
    let k = depth as u32;

    let mut m = TransitionModel::new(depth, a_s);
    m.add_state(BssmState::Zero);
    let add = |m: &mut TransitionModel<BssmState>, from: BssmState, to: BssmState, pr: f64| {
        if pr > 0.0 {
            m.add_transition(&from, &to, pr);
        }
    };
    use BssmState::*;

    add(&mut m, Zero, Zero, 1.0 - p.alpha + a_i);
    add(&mut m, Zero, Ladder(1), a_s);

    add(&mut m, Ladder(1), Ladder(2), a_s);
    add(&mut m, Ladder(1), ZeroPrimeO, delta);
    add(&mut m, Ladder(1), ZeroPrimeB, beta);
    add(&mut m, Ladder(1), ZeroPrimeA, a_i);

    add(&mut m, Ladder(2), Ladder(3), a_s);
    add(&mut m, Ladder(2), Zero, 1.0 - p.alpha);
    add(&mut m, Ladder(2), LadderPrime(1), a_i);

    for i in 3..=k {
        let up = if i == k { Ladder(k) } else { Ladder(i + 1) };
        add(&mut m, Ladder(i), up, a_s);
        add(&mut m, Ladder(i), Ladder(i - 1), 1.0 - p.alpha);
        add(&mut m, Ladder(i), LadderPrime(i - 1), a_i);
    }

    if a_i > 0.0 {
        add(&mut m, LadderPrime(1), LadderPrime(2), a_s);
        add(&mut m, LadderPrime(1), ZeroPrimeO, delta);
        add(&mut m, LadderPrime(1), ZeroPrimeB, beta);
        add(&mut m, LadderPrime(1), ZeroPrimeA, a_i);

        add(&mut m, LadderPrime(2), LadderPrime(3), a_s);
        add(&mut m, LadderPrime(2), Zero, 1.0 - p.alpha);
        add(&mut m, LadderPrime(2), LadderPrime(1), a_i);

        for i in 3..=k {
            let up = if i == k { LadderPrime(k) } else { LadderPrime(i + 1) };
            add(&mut m, LadderPrime(i), up, a_s);
            add(&mut m, LadderPrime(i), Ladder(i - 1), 1.0 - p.alpha);
            add(&mut m, LadderPrime(i), LadderPrime(i - 1), a_i);
        }
    }

    for s in [ZeroPrimeO, ZeroPrimeB, ZeroPrimeA] {
        if m.states().contains(&s) {
            m.add_transition(&s, &Zero, 1.0);
        }
    }
    Ok(m)
}

/// Bribery-stage resolution probabilities of a private-branch win, given the
/// public tip owner, for one response profile. Other pools split by `gamma`;
/// each target follows its own flag; a target never abandons its own tip.
fn stage_win_probs(p: &StrategyParams, profile: &[Decision]) -> (f64, Vec<f64>, f64) {
    let a_s = (1.0 - p.rho) * p.alpha;
    let delta = p.delta();
    let beta_acc: f64 = p
        .betas
        .iter()
        .zip(profile)
        .filter(|(_, d)| d.accepts())
        .map(|(b, _)| *b)
        .sum();
    let base = a_s + p.gamma * delta;
    let w_o = base + beta_acc;
    let w_b: Vec<f64> = p
        .betas
        .iter()
        .zip(profile)
        .map(|(b, d)| base + beta_acc - if d.accepts() { *b } else { 0.0 })
        .collect();
    let w_a = base + beta_acc;
    (w_o, w_b, w_a)
}

/// Exact deep-state private-win probability for one response profile,
/// from first-step analysis of the event process.
fn exact_private_win(p: &StrategyParams, profile: &[Decision]) -> f64 {
    let a_s = (1.0 - p.rho) * p.alpha;
    let a_i = p.rho * p.alpha;
    let delta = p.delta();
    let (w_o, w_b, w_a) = stage_win_probs(p, profile);
    let q = delta * w_o
        + p.betas
            .iter()
            .zip(&w_b)
            .map(|(b, w)| b * w)
            .sum::<f64>()
        + a_i * w_a;
    ((1.0 - p.alpha) + a_i * q) / (1.0 - a_s - a_i * a_s)
}

fn table1_entries(p: &StrategyParams) -> (f64, f64, f64) {
    let a_i = p.rho * p.alpha;
    let denom = 1.0 - p.alpha + a_i;
    let first = a_i / denom;
    (
        first * (p.delta() / denom),
        first * (p.beta_total() / denom),
        first * (a_i / denom),
    )
}

fn reference_private_win(p: &StrategyParams) -> f64 {
    let a_s = (1.0 - p.rho) * p.alpha;
    let a_i = p.rho * p.alpha;
    let delta = p.delta();
    let beta = p.beta_total();
    let (p0o, p0b, p0a) = table1_entries(p);
    let direct = (1.0 - p.alpha) / (1.0 - p.alpha + a_i);
    direct
        + p0b * (p.gamma * delta + a_s)
        + (p0o + p0a) * (p.gamma * delta + p.gamma * beta + a_s)
}

/// Branch-winning probabilities. The entry split `p0o/p0b/p0a` follows the
/// ladder-exit normalization in either method; `p_private` is the
/// method-dependent deep-state win probability ([`RewardMethod::Exact`] uses
/// the response profile, [`RewardMethod::Reference`] is variant-independent).
pub fn winning_probs(
    p: &StrategyParams,
    decision: Decision,
    method: RewardMethod,
) -> Result<BssmWinningProbs, ModelError> {
    p.validate()?;
    let agg = p.aggregated();
    let p_private = match method {
        RewardMethod::Exact => exact_private_win(&agg, &[decision]),
        RewardMethod::Reference => reference_private_win(&agg),
    };
    let (p0o, p0b, p0a) = table1_entries(&agg);
    Ok(BssmWinningProbs {
        p_public: 1.0 - p_private,
        p_private,
        p0o,
        p0b,
        p0a,
    })
}

/// Stationary masses the reward rows need.
struct ChainMasses {
    p0: f64,
    p0o: f64,
    p0b: f64,
    p0a: f64,
    p1p: f64,
    p2p: f64,
    p2: f64,
    sum_deep: f64,
    sum_deep_prime: f64,
    residual: f64,
    tail: f64,
}

fn chain_masses(p: &StrategyParams, opts: &AnalysisOptions) -> Result<ChainMasses, ModelError> {
    let model = build_chain(p, opts.depth)?;
    let pi = solve_stationary(&model, opts.tol)?;
    let k = opts.depth as u32;
    let mut sum_deep = 0.0;
    let mut sum_deep_prime = 0.0;
    for i in 3..=k {
        sum_deep += pi.prob(&BssmState::Ladder(i));
        sum_deep_prime += pi.prob(&BssmState::LadderPrime(i));
    }
    Ok(ChainMasses {
        p0: pi.prob(&BssmState::Zero),
        p0o: pi.prob(&BssmState::ZeroPrimeO),
        p0b: pi.prob(&BssmState::ZeroPrimeB),
        p0a: pi.prob(&BssmState::ZeroPrimeA),
        p1p: pi.prob(&BssmState::LadderPrime(1)),
        p2p: pi.prob(&BssmState::LadderPrime(2)),
        p2: pi.prob(&BssmState::Ladder(2)),
        sum_deep,
        sum_deep_prime,
        residual: pi.residual,
        tail: pi.tail_mass,
    })
}

/// Per-actor expected rewards for a per-target response profile over the
/// pooled chain (aggregate `beta`, bribery-stage placement split by
/// sub-pool). The infinite ladder sums are truncated at `opts.depth`; the
/// discarded mass is reported via `tail_bound` (at most three reward units
/// per omitted state visit).
pub fn rewards_profile(
    p: &StrategyParams,
    profile: &[Decision],
    opts: &AnalysisOptions,
) -> Result<RewardOutcome, ModelError> {
    p.validate()?;
    if profile.len() != p.n_targets() {
        return Err(ModelError::Incompatible(format!(
            "profile length {} != number of targets {}",
            profile.len(),
            p.n_targets()
        )));
    }
    let a_s = (1.0 - p.rho) * p.alpha;
    let a_i = p.rho * p.alpha;
    let delta = p.delta();
    let beta = p.beta_total();
    let beta_acc: f64 = p
        .betas
        .iter()
        .zip(profile)
        .filter(|(_, d)| d.accepts())
        .map(|(b, _)| *b)
        .sum();
    let beta_den = beta - beta_acc;

    let m = chain_masses(p, opts)?;
    let p_private = match opts.method {
        RewardMethod::Exact => exact_private_win(p, profile),
        RewardMethod::Reference => reference_private_win(p),
    };
    let p_public = 1.0 - p_private;
    let both = delta + beta;

    // Adversary, before bribes.
    let mut r_a = m.p0 * a_i
        + m.p0o * (2.0 * a_s + a_i + p.gamma * delta + beta_acc)
        + m.p0a * (2.0 * p.alpha + beta + delta)
        + m.p1p * (both + a_i)
        + m.p2p * (3.0 * both + a_i)
        + m.sum_deep_prime * (both * (1.0 + p_private) + a_i)
        + m.p2 * 2.0 * both
        + m.sum_deep * both * p_private;
    if beta > 0.0 {
        for (b_j, d_j) in p.betas.iter().zip(profile) {
            let acc_other = beta_acc - if d_j.accepts() { *b_j } else { 0.0 };
            r_a += m.p0b * (b_j / beta) * (2.0 * a_s + a_i + p.gamma * delta + acc_other);
        }
    }

    // Other pools.
    let r_o = delta * (m.p0 + m.p0b + m.p0a)
        + m.p0o * (2.0 * (1.0 - p.gamma) * delta + a_i + p.gamma * delta + beta_den)
        + delta * p_public * (m.sum_deep + m.sum_deep_prime);

    // Targets.
    let mut r_targets = Vec::with_capacity(p.n_targets());
    for (b_m, d_m) in p.betas.iter().zip(profile) {
        let den_other = beta_den - if d_m.accepts() { 0.0 } else { *b_m };
        let mut r = b_m * (m.p0 + m.p0o + m.p0a)
            + b_m * p_public * (m.sum_deep + m.sum_deep_prime);
        if beta > 0.0 {
            r += m.p0b
                * ((b_m / beta) * ((1.0 - p.gamma) * delta + a_i + 2.0 * b_m + den_other)
                    + ((beta - b_m) / beta) * b_m);
        }
        r_targets.push(r);
    }

    // Bribe transfer, power-proportional among accepting targets.
    let mut bribe_paid = 0.0;
    let mut reward_adversary = r_a;
    if beta_acc > 0.0 {
        bribe_paid = p.epsilon * r_a;
        reward_adversary = (1.0 - p.epsilon) * r_a;
        for ((r, b_m), d_m) in r_targets.iter_mut().zip(&p.betas).zip(profile) {
            if d_m.accepts() {
                *r += bribe_paid * b_m / beta_acc;
            }
        }
    }

    let rewards = RewardVector {
        reward_adversary,
        reward_other: r_o,
        reward_targets: r_targets,
        bribe_paid,
        variant_accept: beta_acc > 0.0,
    };
    rewards.check(1e-9)?;
    Ok(RewardOutcome {
        rewards,
        adversary_pre_bribe: r_a,
        tail_bound: 3.0 * m.tail,
        residual: m.residual,
    })
}

/// Rewards with every target following one shared decision, over the
/// aggregate single-target equations.
pub fn rewards(
    p: &StrategyParams,
    decision: Decision,
    opts: &AnalysisOptions,
) -> Result<RewardOutcome, ModelError> {
    let agg = p.aggregated();
    if agg.n_targets() == 1 && agg.beta_total() > 0.0 {
        rewards_profile(&agg, &[decision], opts)
    } else {
        rewards_profile(&agg, &[], opts)
    }
}

/// Largest bribe fraction at which accepting still pays the adversary more
/// than the deny baseline: the crossing point of `(1 - eps) R_a`
/// against `R_a^{deny}`.
pub fn epsilon_threshold(p: &StrategyParams, opts: &AnalysisOptions) -> Result<f64, ModelError> {
    let mut zero_eps = p.aggregated();
    zero_eps.epsilon = 0.0;
    let acc = rewards(&zero_eps, Decision::Accept, opts)?;
    let den = rewards(&zero_eps, Decision::Deny, opts)?;
    let r_a = acc.adversary_pre_bribe;
    if r_a.is_nan() || r_a <= 0.0 {
        return Err(ModelError::Domain(
            "adversary reward is zero; bribe threshold undefined".into(),
        ));
    }
    Ok(((r_a - den.adversary_pre_bribe) / r_a).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> StrategyParams {
        StrategyParams::single(0.3, 0.1, 0.5, 0.02, 0.1).unwrap()
    }

    #[test]
    fn chain_rows_are_stochastic() {
        let m = build_chain(&params(), 64).unwrap();
        assert!(m.stochasticity_defect() < 1e-12);
        assert!(m.check().is_ok());
    }

    #[test]
    fn rho_zero_beta_zero_collapses_to_selfish_mining() {
        let p = StrategyParams::new(0.3, 0.0, 0.5, 0.0, vec![]).unwrap();
        let m = build_chain(&p, 64).unwrap();
        use BssmState::*;
        assert!(!m.states().contains(&LadderPrime(1)));
        assert!(!m.states().contains(&ZeroPrimeB));
        assert!(!m.states().contains(&ZeroPrimeA));
        assert!(m.states().contains(&ZeroPrimeO));
        assert!(m.check().is_ok());
    }

    #[test]
    fn ladder_ratio_matches_balance() {
        // One solved sanity point: flux into the bribery stage.
        let p = params();
        let m = build_chain(&p, 64).unwrap();
        let pi = solve_stationary(&m, 1e-12).unwrap();
        use BssmState::*;
        let lhs = pi.prob(&ZeroPrimeB);
        let rhs = p.beta_total() * (pi.prob(&Ladder(1)) + pi.prob(&LadderPrime(1)));
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn winning_prob_identity_and_rho_zero() {
        for method in [RewardMethod::Reference, RewardMethod::Exact] {
            let w = winning_probs(&params(), Decision::Accept, method).unwrap();
            assert_abs_diff_eq!(w.p_public + w.p_private, 1.0, epsilon = 1e-12);
            let direct = (1.0 - 0.3) / (1.0 - 0.3 + 0.1 * 0.3);
            assert_abs_diff_eq!(w.p0o + w.p0b + w.p0a + direct, 1.0, epsilon = 1e-12);
        }
        let p0 = StrategyParams::single(0.3, 0.0, 0.5, 0.02, 0.1).unwrap();
        for method in [RewardMethod::Reference, RewardMethod::Exact] {
            let w = winning_probs(&p0, Decision::Deny, method).unwrap();
            assert_abs_diff_eq!(w.p_private, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(w.p_public, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_epsilon_accept_equals_upper_bound() {
        let mut p = params();
        p.epsilon = 0.0;
        let out = rewards(&p, Decision::Accept, &AnalysisOptions::default()).unwrap();
        assert_abs_diff_eq!(
            out.rewards.reward_adversary,
            out.adversary_pre_bribe,
            epsilon = 1e-15
        );
        assert_eq!(out.rewards.bribe_paid, 0.0);
    }

    #[test]
    fn reference_method_accept_deny_gap_is_stage_mass() {
        // Under the reference system the only adversary-side difference
        // between accept and deny is the bribery-stage term p_{0'_o} * beta.
        let p = params();
        let opts = AnalysisOptions::default().with_method(RewardMethod::Reference);
        let acc = rewards(&p, Decision::Accept, &opts).unwrap();
        let den = rewards(&p, Decision::Deny, &opts).unwrap();
        let m = chain_masses(&p.aggregated(), &opts).unwrap();
        assert_abs_diff_eq!(
            acc.adversary_pre_bribe - den.adversary_pre_bribe,
            m.p0o * p.beta_total(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn threshold_semantics() {
        let p = params();
        for method in [RewardMethod::Reference, RewardMethod::Exact] {
            let opts = AnalysisOptions::default().with_method(method);
            let eps_star = epsilon_threshold(&p, &opts).unwrap();
            assert!(eps_star > 0.0 && eps_star < 1.0);
            for (eps, expect_accept_better) in
                [(eps_star / 2.0, true), (eps_star * 1.5, false)]
            {
                let mut q = p.clone();
                q.epsilon = eps;
                let acc = rewards(&q, Decision::Accept, &opts).unwrap();
                let den = rewards(&q, Decision::Deny, &opts).unwrap();
                assert_eq!(
                    acc.rewards.reward_adversary > den.rewards.reward_adversary,
                    expect_accept_better,
                    "method {method}, eps {eps}"
                );
            }
        }
    }

    #[test]
    fn threshold_vanishes_without_targets() {
        let p = StrategyParams::new(0.3, 0.1, 0.5, 0.02, vec![]).unwrap();
        let eps_star = epsilon_threshold(&p, &AnalysisOptions::default()).unwrap();
        assert_abs_diff_eq!(eps_star, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn reference_threshold_has_closed_form() {
        // eps* = p_{0'_o} beta / (p_{0'_o} beta + R_a^{deny}) under the
        // reference system, where the accept/deny gap is the stage mass.
        let p = params();
        let opts = AnalysisOptions::default().with_method(RewardMethod::Reference);
        let eps_star = epsilon_threshold(&p, &opts).unwrap();
        let den = rewards(&p, Decision::Deny, &opts).unwrap();
        let m = chain_masses(&p.aggregated(), &opts).unwrap();
        let num = m.p0o * p.beta_total();
        assert_abs_diff_eq!(
            eps_star,
            num / (num + den.adversary_pre_bribe),
            epsilon = 1e-12
        );
    }
}
