//! Property tests for the metric, solver, and model invariants.

use bribemine_core::*;
use proptest::prelude::*;
use proptest::strategy::Strategy;

fn valid_params() -> impl Strategy<Value = StrategyParams> {
    (
        0.05f64..0.45,
        0.0f64..=0.5,
        0.0f64..=1.0,
        0.001f64..=0.2,
        0.01f64..0.4,
    )
        .prop_filter_map("total power", |(a, r, g, e, b)| {
            StrategyParams::single(a, r, g, e, b).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rer_is_zero_at_equality(x in 1e-6f64..10.0) {
        prop_assert!(rer(x, x).unwrap().abs() < 1e-15);
    }

    #[test]
    fn normalized_shares_sum_to_one(
        a in 0.0f64..1.0,
        o in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        prop_assume!(a + o + b > 1e-9);
        let rv = RewardVector {
            reward_adversary: a,
            reward_other: o,
            reward_targets: vec![b],
            bribe_paid: 0.0,
            variant_accept: false,
        };
        let shares = normalize_relative(&rv).unwrap();
        prop_assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(shares.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn honest_reward_identity(p in 0.0f64..=1.0) {
        prop_assert_eq!(honest_reward(p).unwrap(), p);
    }

    #[test]
    fn growth_gap_is_rho_alpha(p in valid_params()) {
        let g = chain_growth_rates(&p).unwrap();
        prop_assert!((g.gr_bssm - g.gr_sm - p.rho * p.alpha).abs() < 1e-12);
        prop_assert!((g.gr_bssm - g.gr_ssm).abs() < 1e-12);
    }

    #[test]
    fn chains_are_stochastic(p in valid_params()) {
        let m1 = bssm::build_chain(&p, 48).unwrap();
        prop_assert!(m1.stochasticity_defect() < 1e-12);
        let m2 = bsm::build_chain(&p, 48).unwrap();
        prop_assert!(m2.stochasticity_defect() < 1e-12);
    }

    #[test]
    fn winning_prob_identity(p in valid_params()) {
        for method in [RewardMethod::Reference, RewardMethod::Exact] {
            for d in [Decision::Accept, Decision::Deny] {
                let w1 = bssm::winning_probs(&p, d, method).unwrap();
                prop_assert!((w1.p_public + w1.p_private - 1.0).abs() < 1e-12);
                let w2 = bsm::winning_probs(&p, d, method).unwrap();
                prop_assert!((w2.p_public + w2.p_private - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reward_vectors_within_bounds(p in valid_params()) {
        for method in [RewardMethod::Reference, RewardMethod::Exact] {
            let opts = AnalysisOptions::default().with_method(method);
            for d in [Decision::Accept, Decision::Deny] {
                let a = bssm::rewards(&p, d, &opts).unwrap();
                prop_assert!(a.rewards.check(1e-9).is_ok());
                let mut q = p.clone();
                q.rho = 0.0;
                let b = bsm::rewards(&q, d, &opts).unwrap();
                prop_assert!(b.rewards.check(1e-9).is_ok());
            }
        }
    }

    #[test]
    fn pooled_target_rewards_conserve(
        p in valid_params(),
        split in 0.2f64..0.8,
        bits in 0usize..4,
    ) {
        // Splitting the aggregate target into two with any profile keeps
        // the same totals as the matching single-target run whenever the
        // sub-pool decisions agree.
        let beta = p.beta_total();
        let two = StrategyParams::new(
            p.alpha, p.rho, p.gamma, p.epsilon,
            vec![beta * split, beta * (1.0 - split)],
        ).unwrap();
        let profile = DecisionProfile::from_index(bits & 0b11, 2);
        let opts = AnalysisOptions::default();
        for model in [MiningModel::Bssm, MiningModel::Bsm] {
            let multi = multi_target_rewards(&two, &profile, model, &opts).unwrap();
            let total: f64 = multi.rewards.total();
            if profile.all_deny() {
                // Denying targets are interchangeable with the aggregate pool.
                let single = match model {
                    MiningModel::Bssm => bssm::rewards(&p, Decision::Deny, &opts).unwrap(),
                    MiningModel::Bsm => bsm::rewards(&p, Decision::Deny, &opts).unwrap(),
                };
                prop_assert!((multi.rewards.reward_target_total()
                    - single.rewards.reward_target_total()).abs() < 1e-12);
                prop_assert!((total - single.rewards.total()).abs() < 1e-12);
            } else if profile.all_accept() {
                // Accepting targets cannibalize each other's fork tips, so
                // only the grand total is conserved against the aggregate run.
                let single = match model {
                    MiningModel::Bssm => bssm::rewards(&p, Decision::Accept, &opts).unwrap(),
                    MiningModel::Bsm => bsm::rewards(&p, Decision::Accept, &opts).unwrap(),
                };
                prop_assert!((total - single.rewards.total()).abs() < 1e-12);
            } else {
                prop_assert!(multi.rewards.check(1e-9).is_ok());
            }
        }
    }

    #[test]
    fn stationary_invariant_under_relabeling(
        seed in 0u64..1000,
        n in 3usize..8,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let mut forward: TransitionModel<usize> = TransitionModel::new(n, 0.0);
        for (i, row) in rows.iter().enumerate() {
            for (j, &pr) in row.iter().enumerate() {
                forward.add_transition(&i, &j, pr);
            }
        }
        // Insert states in reverse order under permuted labels.
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut relabeled: TransitionModel<usize> = TransitionModel::new(n, 0.0);
        for i in (0..n).rev() {
            for j in (0..n).rev() {
                relabeled.add_transition(&perm[i], &perm[j], rows[i][j]);
            }
        }
        let a = solve_stationary(&forward, 1e-12).unwrap();
        let b = solve_stationary(&relabeled, 1e-12).unwrap();
        for (i, mapped) in perm.iter().enumerate() {
            prop_assert!((a.prob(&i) - b.prob(mapped)).abs() < 1e-10);
        }
    }
}

#[test]
fn deeper_truncation_changes_nothing_beyond_tail() {
    let p = StrategyParams::single(0.3, 0.1, 0.5, 0.02, 0.1).unwrap();
    let shallow = bssm::build_chain(&p, 32).unwrap();
    let deep = bssm::build_chain(&p, 64).unwrap();
    let bound = truncation_tail_bound(&shallow);
    let pi_s = solve_stationary(&shallow, 1e-12).unwrap();
    let pi_d = solve_stationary(&deep, 1e-12).unwrap();
    for (state, prob) in pi_s.iter() {
        let diff = (prob - pi_d.prob(state)).abs();
        assert!(
            diff <= bound + 1e-12,
            "state {state:?} moved by {diff} > bound {bound}"
        );
    }
}

#[test]
fn solved_tail_is_negligible() {
    // Ladder levels decay at alpha / (1 - alpha) per step; with alpha = 0.3
    // the solved mass beyond depth 40 sits near (3/7)^40 ~ 2e-15 and stays
    // inside the analytic bound.
    let p = StrategyParams::single(0.3, 0.0, 0.5, 0.0, 1e-6).unwrap();
    let m = bssm::build_chain(&p, 64).unwrap();
    let pi = solve_stationary(&m, 1e-12).unwrap();
    let deep_mass: f64 = (41..=64)
        .map(|k| pi.prob(&BssmState::Ladder(k)) + pi.prob(&BssmState::LadderPrime(k)))
        .sum();
    assert!(deep_mass < 1e-13, "mass beyond depth 40 is {deep_mass}");
    let m40 = bssm::build_chain(&p, 40).unwrap();
    assert!(deep_mass < truncation_tail_bound(&m40));
}

#[test]
fn balance_residuals_hold_for_both_models() {
    for p in [
        StrategyParams::single(0.3, 0.1, 0.5, 0.02, 0.1).unwrap(),
        StrategyParams::single(0.45, 0.5, 1.0, 0.2, 0.35).unwrap(),
        StrategyParams::single(0.05, 0.0, 0.0, 0.01, 0.01).unwrap(),
    ] {
        let m = bssm::build_chain(&p, 64).unwrap();
        let pi = solve_stationary(&m, 1e-12).unwrap();
        assert!(pi.residual <= 1e-12);
        assert!((pi.total() - 1.0).abs() < 1e-10);
        let m = bsm::build_chain(&p, 64).unwrap();
        let pi = solve_stationary(&m, 1e-12).unwrap();
        assert!(pi.residual <= 1e-12);
        assert!((pi.total() - 1.0).abs() < 1e-10);
    }
}
