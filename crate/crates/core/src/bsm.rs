//! Bribery stubborn mining: the lead-stubborn variant with bribery.
//!
//! The adversary mines selfishly with its whole power and never overrides;
//! once behind a fork it keeps matching the public branch block for block.
//! Every primed state is therefore a live equal-length fork, and other pools
//! split between the branches by `gamma` there, not only at the bribery
//! initiation stage.

use crate::bssm::RewardOutcome;
use crate::options::{AnalysisOptions, RewardMethod};
use crate::params::{Decision, ModelError, RewardVector, StrategyParams};
use crate::stationary::{solve_stationary, TransitionModel};
use serde::{Deserialize, Serialize};

/// States of the bribery stubborn mining chain. `LadderPrime(k)` is a live
/// equal-length fork with `k` blocks still hidden; there is no
/// adversary-internal fork state because the whole adversary mines selfishly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BsmState {
    /// No lead, no fork.
    Zero,
    /// Hidden lead of `k >= 1`, no published fork.
    Ladder(u32),
    /// Live fork with `k >= 1` hidden blocks beyond the published match.
    LadderPrime(u32),
    /// Bribery initiation stage, public tip from other pools.
    ZeroPrimeO,
    /// Bribery initiation stage, public tip from a target.
    ZeroPrimeB,
}

impl std::fmt::Display for BsmState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BsmState::Zero => f.write_str("0"),
            BsmState::Ladder(k) => write!(f, "{k}"),
            BsmState::LadderPrime(k) => write!(f, "{k}'"),
            BsmState::ZeroPrimeO => f.write_str("0'o"),
            BsmState::ZeroPrimeB => f.write_str("0'b"),
        }
    }
}

/// Branch-winning probabilities at the bribery initiation stage and its
/// entry split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsmWinningProbs {
    /// Probability the public branch wins the fork resolution.
    pub p_public: f64,
    /// Probability the private branch wins the fork resolution.
    pub p_private: f64,
    /// Entry probability of the fork-against-others stage.
    pub p0o: f64,
    /// Entry probability of the fork-against-target stage.
    pub p0b: f64,
}

/// Builds the truncated transition model.
pub fn build_chain(
    p: &StrategyParams,
    depth: usize,
) -> Result<TransitionModel<BsmState>, ModelError> {
    p.validate()?;
    if depth < 2 {
        return Err(ModelError::Domain(format!(
            "truncation depth must be at least 2, got {depth}"
        )));
    }
    let alpha = p.alpha;
    let beta = p.beta_total();
    let delta = p.delta();
    let k = depth as u32;

    let mut m = TransitionModel::new(depth, alpha);
    m.add_state(BsmState::Zero);
    let add = |m: &mut TransitionModel<BsmState>, from: BsmState, to: BsmState, pr: f64| {
        if pr > 0.0 {
            m.add_transition(&from, &to, pr);
        }
    };
    use BsmState::*;

    add(&mut m, Zero, Zero, 1.0 - alpha);
    add(&mut m, Zero, Ladder(1), alpha);

    add(&mut m, Ladder(1), Ladder(2), alpha);
    add(&mut m, Ladder(1), ZeroPrimeO, delta);
    add(&mut m, Ladder(1), ZeroPrimeB, beta);
    for i in 2..=k {
        let up = if i == k { Ladder(k) } else { Ladder(i + 1) };
        add(&mut m, Ladder(i), up, alpha);
        add(&mut m, Ladder(i), LadderPrime(i - 1), 1.0 - alpha);
    }

    add(&mut m, LadderPrime(1), LadderPrime(2), alpha);
    add(&mut m, LadderPrime(1), ZeroPrimeO, delta);
    add(&mut m, LadderPrime(1), ZeroPrimeB, beta);
    for i in 2..=k {
        let up = if i == k { LadderPrime(k) } else { LadderPrime(i + 1) };
        add(&mut m, LadderPrime(i), up, alpha);
        add(&mut m, LadderPrime(i), LadderPrime(i - 1), 1.0 - alpha);
    }

    for s in [ZeroPrimeO, ZeroPrimeB] {
        if m.states().contains(&s) {
            m.add_transition(&s, &Zero, 1.0);
        }
    }
    Ok(m)
}

/// Private-win probability at the bribery stage per tip owner.
fn stage_win_probs(p: &StrategyParams, profile: &[Decision]) -> (f64, Vec<f64>) {
    let delta = p.delta();
    let beta_acc: f64 = p
        .betas
        .iter()
        .zip(profile)
        .filter(|(_, d)| d.accepts())
        .map(|(b, _)| *b)
        .sum();
    let base = p.alpha + p.gamma * delta;
    let v_o = base + beta_acc;
    let v_b: Vec<f64> = p
        .betas
        .iter()
        .zip(profile)
        .map(|(b, d)| base + beta_acc - if d.accepts() { *b } else { 0.0 })
        .collect();
    (v_o, v_b)
}

/// Branch-winning probabilities. `p0o`/`p0b` are the last-descent entry
/// split `delta/(1-alpha)` and `beta/(1-alpha)`; `p_private` is the fork
/// resolution probability ([`RewardMethod::Exact`] honors the response
/// profile, [`RewardMethod::Reference`] splits the target's stage block
/// by `gamma` like other pools).
pub fn winning_probs(
    p: &StrategyParams,
    decision: Decision,
    method: RewardMethod,
) -> Result<BsmWinningProbs, ModelError> {
    p.validate()?;
    let agg = p.aggregated();
    let delta = agg.delta();
    let beta = agg.beta_total();
    let p0o = delta / (1.0 - agg.alpha);
    let p0b = beta / (1.0 - agg.alpha);
    let p_private = match method {
        RewardMethod::Exact => {
            let profile: Vec<Decision> = agg.betas.iter().map(|_| decision).collect();
            let (v_o, v_b) = stage_win_probs(&agg, &profile);
            p0o * v_o + p0b * v_b.first().copied().unwrap_or(0.0)
        }
        RewardMethod::Reference => {
            let base = agg.alpha + agg.gamma * delta;
            p0o * (base + agg.gamma * beta) + p0b * base
        }
    };
    Ok(BsmWinningProbs {
        p_public: 1.0 - p_private,
        p_private,
        p0o,
        p0b,
    })
}

/// Survival probabilities of a live contested pair's private side, indexed
/// by fork state `1..=depth`, for the exact method. Solved by first-step
/// analysis over the fork ladder (tridiagonal system, Thomas algorithm).
fn pair_survival(p: &StrategyParams, profile: &[Decision], depth: usize) -> Vec<f64> {
    let alpha = p.alpha;
    let delta = p.delta();
    let gamma = p.gamma;
    let beta_acc: f64 = p
        .betas
        .iter()
        .zip(profile)
        .filter(|(_, d)| d.accepts())
        .map(|(b, _)| *b)
        .sum();
    let beta_den = p.beta_total() - beta_acc;
    let (v_o, v_b) = stage_win_probs(p, profile);

    // u_i = alpha u_{i+1} + down * u_{i-1} + settle, with the boundary row
    // i = 1 feeding the bribery-stage resolution and the top row redirected
    // into a self-loop.
    let n = depth;
    let down = (1.0 - gamma) * delta + beta_den;
    let settle = gamma * delta + beta_acc;
    let mut sub = vec![0.0; n]; // coefficient of u_{i-1}
    let mut diag = vec![1.0; n];
    let mut sup = vec![0.0; n]; // coefficient of u_{i+1}
    let mut rhs = vec![0.0; n];
    for i in 1..=n {
        let row = i - 1;
        if i < n {
            sup[row] = -alpha;
        } else {
            diag[row] = 1.0 - alpha;
        }
        if i == 1 {
            let mut r = (1.0 - gamma) * delta * v_o + gamma * delta + beta_acc;
            for ((b_j, d_j), v) in p.betas.iter().zip(profile).zip(&v_b) {
                if !d_j.accepts() {
                    r += b_j * v;
                }
            }
            rhs[row] = r;
        } else {
            sub[row] = -down;
            rhs[row] = settle;
        }
    }
    // Thomas elimination.
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut u = vec![0.0; n];
    u[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = (rhs[i] - sup[i] * u[i + 1]) / diag[i];
    }
    u
}

struct ChainMasses {
    p0: f64,
    p0o: f64,
    p0b: f64,
    ladder: Vec<f64>,
    ladder_prime: Vec<f64>,
    residual: f64,
    tail: f64,
}

fn chain_masses(p: &StrategyParams, opts: &AnalysisOptions) -> Result<ChainMasses, ModelError> {
    let model = build_chain(p, opts.depth)?;
    let pi = solve_stationary(&model, opts.tol)?;
    let k = opts.depth as u32;
    let mut ladder = vec![0.0; opts.depth + 1];
    let mut ladder_prime = vec![0.0; opts.depth + 1];
    for i in 1..=k {
        ladder[i as usize] = pi.prob(&BsmState::Ladder(i));
        ladder_prime[i as usize] = pi.prob(&BsmState::LadderPrime(i));
    }
    Ok(ChainMasses {
        p0: pi.prob(&BsmState::Zero),
        p0o: pi.prob(&BsmState::ZeroPrimeO),
        p0b: pi.prob(&BsmState::ZeroPrimeB),
        ladder,
        ladder_prime,
        residual: pi.residual,
        tail: pi.tail_mass,
    })
}

/// Per-actor expected rewards for a per-target response profile. `rho` is
/// ignored by this model (the adversary mines selfishly with all its power).
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
    let alpha = p.alpha;
    let gamma = p.gamma;
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

    let (r_a, r_o_deep, target_deep_unit) = match opts.method {
        RewardMethod::Exact => {
            // Contested pairs are created whenever a non-adversary block
            // lands during a lead; each pays its private side with the
            // survival probability of the fork state it lands in.
            let u = pair_survival(p, profile, opts.depth);
            let mut flux_a = 0.0;
            let mut flux_loss = 0.0;
            for k in 2..=opts.depth {
                let mass = m.ladder[k] + m.ladder_prime[k];
                flux_a += mass * (1.0 - alpha) * u[k - 2];
                flux_loss += mass * (1.0 - alpha) * (1.0 - u[k - 2]);
            }
            let mut r_a = m.p0o * (2.0 * alpha + gamma * delta + beta_acc) + flux_a;
            if beta > 0.0 {
                for (b_j, d_j) in p.betas.iter().zip(profile) {
                    let acc_other = beta_acc - if d_j.accepts() { *b_j } else { 0.0 };
                    r_a += m.p0b * (b_j / beta) * (2.0 * alpha + gamma * delta + acc_other);
                }
            }
            // The finder of a deep pair is o or a target in proportion to
            // power; flux_loss / (1 - alpha) is the per-unit-power loss pool.
            (r_a, delta * flux_loss / (1.0 - alpha), flux_loss / (1.0 - alpha))
        }
        RewardMethod::Reference => {
            let w = winning_probs(p, Decision::Deny, RewardMethod::Reference)?;
            let sum_prime: f64 = m.ladder_prime.iter().sum();
            let mut r_a = m.p0o * (2.0 * alpha + gamma * delta + beta_acc)
                + sum_prime * (1.0 - alpha) * (gamma + (1.0 - gamma) * w.p_private);
            if beta > 0.0 {
                for (b_j, d_j) in p.betas.iter().zip(profile) {
                    let acc_other = beta_acc - if d_j.accepts() { *b_j } else { 0.0 };
                    r_a += m.p0b * (b_j / beta) * (2.0 * alpha + gamma * delta + acc_other);
                }
            }
            // Fork-time blocks carry (1 - gamma) * power * P_b^p per event
            // for other pools and targets alike, each credited to its
            // finder.
            let r_o_deep = sum_prime * (1.0 - gamma) * delta * w.p_public;
            let target_deep_unit = sum_prime * (1.0 - gamma) * w.p_public;
            (r_a, r_o_deep, target_deep_unit)
        }
    };

    let r_o = delta * (m.p0 + m.p0b)
        + m.p0o * ((2.0 - gamma) * delta + beta_den)
        + r_o_deep;

    let mut r_targets = Vec::with_capacity(p.n_targets());
    for (b_m, d_m) in p.betas.iter().zip(profile) {
        let den_other = beta_den - if d_m.accepts() { 0.0 } else { *b_m };
        let mut r = b_m * (m.p0 + m.p0o) + b_m * target_deep_unit;
        if beta > 0.0 {
            r += m.p0b
                * ((b_m / beta) * ((1.0 - gamma) * delta + 2.0 * b_m + den_other)
                    + ((beta - b_m) / beta) * b_m);
        }
        r_targets.push(r);
    }

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
/// aggregate single-target system.
pub fn rewards(
    p: &StrategyParams,
    decision: Decision,
    opts: &AnalysisOptions,
) -> Result<RewardOutcome, ModelError> {
    let agg = p.aggregated();
    if agg.n_targets() == 1 {
        rewards_profile(&agg, &[decision], opts)
    } else {
        rewards_profile(&agg, &[], opts)
    }
}

/// Largest bribe fraction at which accepting still pays the adversary more
/// than the deny baseline.
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
