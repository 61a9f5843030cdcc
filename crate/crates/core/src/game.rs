//! Multi-target bribery: payoff matrices over accept/deny profiles, pure
//! Nash equilibria, and bribery-dilemma detection.
//!
//! Two compositions of per-target payoffs are supported. `Pooled` runs the
//! aggregate chain once per profile, splitting bribery-stage placement by
//! decision sub-pool; it is the composition used for reward conservation
//! results. `Folded` evaluates each target against a single-target system
//! in which every other target is folded into the honest pool, with the
//! fork-extension fraction raised by the accepting targets' power; it is
//! the composition under which the classical two-target payoff pattern
//! (accept locally optimal, everyone worse at all-accept) appears in full.

use crate::bssm;
use crate::bsm;
use crate::metrics::normalize_relative;
use crate::options::AnalysisOptions;
use crate::params::{Decision, MiningModel, ModelError, StrategyParams};
use serde::{Deserialize, Serialize};

/// One accept/deny choice per target.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecisionProfile(pub Vec<Decision>);

impl DecisionProfile {
    /// Profile from an index whose bit `i` set means target `i` accepts.
    pub fn from_index(index: usize, n: usize) -> Self {
        DecisionProfile(
            (0..n)
                .map(|i| {
                    if index >> i & 1 == 1 {
                        Decision::Accept
                    } else {
                        Decision::Deny
                    }
                })
                .collect(),
        )
    }

    /// Index with bit `i` set when target `i` accepts.
    pub fn index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, d)| acc | ((d.accepts() as usize) << i))
    }

    /// Same profile with one target's decision flipped.
    pub fn flipped(&self, target: usize) -> Self {
        let mut v = self.0.clone();
        v[target] = match v[target] {
            Decision::Accept => Decision::Deny,
            Decision::Deny => Decision::Accept,
        };
        DecisionProfile(v)
    }

    /// True when every target accepts.
    pub fn all_accept(&self) -> bool {
        self.0.iter().all(|d| d.accepts())
    }

    /// True when every target denies.
    pub fn all_deny(&self) -> bool {
        self.0.iter().all(|d| !d.accepts())
    }
}

impl std::fmt::Display for DecisionProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for d in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// How per-target payoffs are composed from the reward engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Composition {
    /// One pooled chain per profile; targets split the sub-pool rewards by power.
    Pooled,
    /// Per-target single-target runs with the other targets folded into
    /// the honest pool.
    Folded,
}

impl std::fmt::Display for Composition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Composition::Pooled => f.write_str("pooled"),
            Composition::Folded => f.write_str("folded"),
        }
    }
}

/// Rewards for one response profile under the pooled composition.
pub fn multi_target_rewards(
    p: &StrategyParams,
    profile: &DecisionProfile,
    model: MiningModel,
    opts: &AnalysisOptions,
) -> Result<bssm::RewardOutcome, ModelError> {
    if p.n_targets() == 0 {
        return Err(ModelError::Incompatible(
            "multi-target composition needs at least one target".into(),
        ));
    }
    match model {
        MiningModel::Bssm => bssm::rewards_profile(p, &profile.0, opts),
        MiningModel::Bsm => bsm::rewards_profile(p, &profile.0, opts),
    }
}

/// One payoff-matrix cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    /// The response profile of this cell.
    pub profile: DecisionProfile,
    /// Per-target relative extra reward versus honest mining (share-based).
    pub target_rers: Vec<f64>,
    /// Adversary reward (post-bribe).
    pub adversary: f64,
    /// Other pools' reward.
    pub other: f64,
    /// Normalized shares: adversary, other, then targets.
    pub shares: Vec<f64>,
}

/// Payoff matrix over all `2^n` response profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    /// Number of targets.
    pub n_targets: usize,
    /// Model the matrix was computed for.
    pub model: MiningModel,
    /// Composition used for the per-target entries.
    pub composition: Composition,
    /// Cells indexed by [`DecisionProfile::index`].
    pub cells: Vec<MatrixCell>,
}

impl PayoffMatrix {
    /// Cell for a profile.
    pub fn cell(&self, profile: &DecisionProfile) -> &MatrixCell {
        &self.cells[profile.index()]
    }
}

/// Largest target count the matrix enumeration accepts.
pub const MAX_TARGETS: usize = 10;

/// Evaluates the payoff matrix for every accept/deny profile.
pub fn payoff_matrix(
    p: &StrategyParams,
    model: MiningModel,
    opts: &AnalysisOptions,
    composition: Composition,
) -> Result<PayoffMatrix, ModelError> {
    let n = p.n_targets();
    if n == 0 {
        return Err(ModelError::Incompatible(
            "payoff matrix needs at least one target".into(),
        ));
    }
    if n > MAX_TARGETS {
        return Err(ModelError::Incompatible(format!(
            "payoff matrix enumerates 2^n profiles; {n} targets exceed the limit of {MAX_TARGETS}"
        )));
    }
    let mut cells = Vec::with_capacity(1 << n);
    for index in 0..(1usize << n) {
        let profile = DecisionProfile::from_index(index, n);
        let pooled = multi_target_rewards(p, &profile, model, opts)?;
        let shares = normalize_relative(&pooled.rewards)?;
        let target_rers = match composition {
            Composition::Pooled => shares[2..]
                .iter()
                .zip(&p.betas)
                .map(|(s, b)| (s - b) / b)
                .collect(),
            Composition::Folded => folded_rers(p, &profile, model, opts)?,
        };
        cells.push(MatrixCell {
            profile,
            target_rers,
            adversary: pooled.rewards.reward_adversary,
            other: pooled.rewards.reward_other,
            shares,
        });
    }
    Ok(PayoffMatrix {
        n_targets: n,
        model,
        composition,
        cells,
    })
}

/// Per-target share RER against honest mining under the folded composition:
/// target `i` keeps power `beta_i`, every other target joins the honest pool,
/// and the fork-extension fraction gains the other accepting targets' power.
fn folded_rers(
    p: &StrategyParams,
    profile: &DecisionProfile,
    model: MiningModel,
    opts: &AnalysisOptions,
) -> Result<Vec<f64>, ModelError> {
    let delta_all = p.delta();
    let mut rers = Vec::with_capacity(p.n_targets());
    for (i, (&beta_i, &d_i)) in p.betas.iter().zip(&profile.0).enumerate() {
        let others: f64 = p.beta_total() - beta_i;
        let acc_others: f64 = p
            .betas
            .iter()
            .zip(&profile.0)
            .enumerate()
            .filter(|(j, (_, d))| *j != i && d.accepts())
            .map(|(_, (b, _))| *b)
            .sum();
        let folded_delta = delta_all + others;
        let gamma_eff = if folded_delta > 0.0 {
            (p.gamma * delta_all + acc_others) / folded_delta
        } else {
            p.gamma
        };
        let folded = StrategyParams {
            alpha: p.alpha,
            rho: p.rho,
            gamma: gamma_eff,
            epsilon: p.epsilon,
            betas: vec![beta_i],
        };
        let out = match model {
            MiningModel::Bssm => bssm::rewards(&folded, d_i, opts)?,
            MiningModel::Bsm => bsm::rewards(&folded, d_i, opts)?,
        };
        let shares = normalize_relative(&out.rewards)?;
        rers.push((shares[2] - beta_i) / beta_i);
    }
    Ok(rers)
}

/// Every profile where no single target improves its own RER by flipping.
/// Ties count as equilibria.
pub fn find_pure_nash(m: &PayoffMatrix) -> Vec<DecisionProfile> {
    let mut out = Vec::new();
    for cell in &m.cells {
        let stable = (0..m.n_targets).all(|t| {
            let alt = &m.cells[cell.profile.flipped(t).index()];
            cell.target_rers[t] >= alt.target_rers[t]
        });
        if stable {
            out.push(cell.profile.clone());
        }
    }
    out
}

/// Bribery miner's dilemma verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilemmaReport {
    /// True when all-accept is an equilibrium and every target earns
    /// strictly less there than at all-deny.
    pub dilemma: bool,
    /// Whether the all-accept profile is a pure Nash equilibrium.
    pub all_accept_is_nash: bool,
    /// Per-target RER at the all-accept profile.
    pub rer_all_accept: Vec<f64>,
    /// Per-target RER at the all-deny profile.
    pub rer_all_deny: Vec<f64>,
    /// Per-target winning condition at all-accept: RER above honest mining.
    pub winning_at_all_accept: Vec<bool>,
}

/// Detects the dilemma on a computed matrix.
pub fn detect_dilemma(m: &PayoffMatrix) -> DilemmaReport {
    let n = m.n_targets;
    let all_accept = DecisionProfile(vec![Decision::Accept; n]);
    let all_deny = DecisionProfile(vec![Decision::Deny; n]);
    let acc = m.cell(&all_accept);
    let den = m.cell(&all_deny);
    let nash = find_pure_nash(m);
    let all_accept_is_nash = nash.contains(&all_accept);
    let every_worse = acc
        .target_rers
        .iter()
        .zip(&den.target_rers)
        .all(|(a, d)| a < d);
    DilemmaReport {
        dilemma: all_accept_is_nash && every_worse,
        all_accept_is_nash,
        rer_all_accept: acc.target_rers.clone(),
        rer_all_deny: den.target_rers.clone(),
        winning_at_all_accept: acc.target_rers.iter().map(|&r| r > 0.0).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::options::RewardMethod;
    use approx::assert_abs_diff_eq;

    fn table_params() -> StrategyParams {
        StrategyParams::new(0.36, 0.1, 0.0, 0.02, vec![0.29, 0.27]).unwrap()
    }

    #[test]
    fn single_target_profile_equals_model_rewards() {
        let p = StrategyParams::single(0.3, 0.1, 0.5, 0.02, 0.1).unwrap();
        let opts = AnalysisOptions::default();
        for model in [MiningModel::Bssm, MiningModel::Bsm] {
            let via_game = multi_target_rewards(
                &p,
                &DecisionProfile(vec![Decision::Accept]),
                model,
                &opts,
            )
            .unwrap();
            let direct = match model {
                MiningModel::Bssm => bssm::rewards(&p, Decision::Accept, &opts).unwrap(),
                MiningModel::Bsm => bsm::rewards(&p, Decision::Accept, &opts).unwrap(),
            };
            assert_eq!(via_game.rewards, direct.rewards);
        }
    }

    #[test]
    fn all_deny_total_matches_aggregate_split() {
        let p = table_params();
        let opts = AnalysisOptions::default();
        let profile = DecisionProfile(vec![Decision::Deny, Decision::Deny]);
        for model in [MiningModel::Bssm, MiningModel::Bsm] {
            let multi = multi_target_rewards(&p, &profile, model, &opts).unwrap();
            let single = match model {
                MiningModel::Bssm => bssm::rewards(&p, Decision::Deny, &opts).unwrap(),
                MiningModel::Bsm => bsm::rewards(&p, Decision::Deny, &opts).unwrap(),
            };
            assert_abs_diff_eq!(
                multi.rewards.reward_target_total(),
                single.rewards.reward_target_total(),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                multi.rewards.reward_adversary,
                single.rewards.reward_adversary,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn accept_dominates_in_reference_matrices() {
        let p = table_params();
        let opts = AnalysisOptions::default().with_method(RewardMethod::Reference);
        for model in [MiningModel::Bssm, MiningModel::Bsm] {
            for comp in [Composition::Pooled, Composition::Folded] {
                let m = payoff_matrix(&p, model, &opts, comp).unwrap();
                for cell in &m.cells {
                    for t in 0..2 {
                        let alt = m.cells[cell.profile.flipped(t).index()].clone();
                        if cell.profile.0[t].accepts() {
                            assert!(
                                cell.target_rers[t] >= alt.target_rers[t],
                                "accept not dominant: {model} {comp} {}",
                                cell.profile
                            );
                        }
                    }
                }
                let nash = find_pure_nash(&m);
                assert_eq!(nash.len(), 1);
                assert!(nash[0].all_accept());
            }
        }
    }

    #[test]
    fn equal_payoffs_make_every_profile_an_equilibrium() {
        let n = 2;
        let cells = (0..4)
            .map(|i| MatrixCell {
                profile: DecisionProfile::from_index(i, n),
                target_rers: vec![0.5, 0.5],
                adversary: 0.3,
                other: 0.4,
                shares: vec![0.3, 0.4, 0.15, 0.15],
            })
            .collect();
        let m = PayoffMatrix {
            n_targets: n,
            model: MiningModel::Bssm,
            composition: Composition::Pooled,
            cells,
        };
        assert_eq!(find_pure_nash(&m).len(), 4);
    }

    #[test]
    fn too_many_targets_rejected() {
        let betas = vec![0.02; 11];
        let p = StrategyParams::new(0.3, 0.0, 0.0, 0.01, betas).unwrap();
        let err = payoff_matrix(
            &p,
            MiningModel::Bsm,
            &AnalysisOptions::default(),
            Composition::Pooled,
        );
        assert!(err.is_err());
    }

    #[test]
    fn vanishing_second_target_has_no_dilemma() {
        let p = StrategyParams::new(0.36, 0.1, 0.0, 0.02, vec![0.29, 1e-6]).unwrap();
        let opts = AnalysisOptions::default().with_method(RewardMethod::Reference);
        let m = payoff_matrix(&p, MiningModel::Bssm, &opts, Composition::Folded).unwrap();
        let rep = detect_dilemma(&m);
        assert!(!rep.dilemma);
    }
}
