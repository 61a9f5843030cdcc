//! Event-level Monte Carlo simulation of every mining strategy.
//!
//! Time is event-indexed: each step draws the finder of the next block by
//! normalized power, then applies the publish/reserve/fork/settle rules of
//! the strategy. Blocks are credited only when a branch wins; an equal
//! fork is resolved by the next block, with other pools drawing their
//! branch with probability `gamma` (private) and each target placing by
//! its accept flag. Bribes are paid once at the end of the run as
//! `epsilon` times the adversary's settled reward, split among accepting
//! targets in proportion to power.
//!
//! The optional trace stream emits one line per event:
//! `event=<idx> finder=<who> action=<what> before=<state> after=<state>`.

use crate::params::{Decision, ModelError, RewardVector, StrategyParams};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;

/// Mining strategy executed by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Everyone mines and publishes honestly.
    Honest,
    /// Classic selfish mining (no honest-style sub-pool, no targets).
    Selfish,
    /// Semi-selfish mining (`rho` split, no targets).
    SemiSelfish,
    /// Lead-stubborn mining (no targets).
    LeadStubborn,
    /// Bribery semi-selfish mining.
    Bssm,
    /// Bribery stubborn mining.
    Bsm,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Strategy::Honest => "honest",
            Strategy::Selfish => "selfish",
            Strategy::SemiSelfish => "semiselfish",
            Strategy::LeadStubborn => "leadstubborn",
            Strategy::Bssm => "bssm",
            Strategy::Bsm => "bsm",
        };
        f.write_str(s)
    }
}

/// One simulation run's configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Powers and attack parameters.
    pub params: StrategyParams,
    /// Strategy to execute.
    pub strategy: Strategy,
    /// Per-target accept/deny decision (bribery strategies only).
    pub accept_flags: Vec<Decision>,
    /// Number of block-generation events.
    pub rounds: u64,
    /// RNG seed.
    pub seed: u64,
}

impl SimConfig {
    /// Validates strategy/parameter compatibility.
    pub fn validate(&self) -> Result<Vec<String>, ModelError> {
        self.params.validate()?;
        if self.rounds == 0 {
            return Err(ModelError::Incompatible("rounds must be >= 1".into()));
        }
        let mut warnings = Vec::new();
        let bribery = matches!(self.strategy, Strategy::Bssm | Strategy::Bsm);
        if bribery {
            if self.accept_flags.len() != self.params.n_targets() {
                return Err(ModelError::Incompatible(format!(
                    "{} accept flags for {} targets",
                    self.accept_flags.len(),
                    self.params.n_targets()
                )));
            }
        } else {
            if !self.accept_flags.is_empty() {
                return Err(ModelError::Incompatible(
                    "accept flags are only meaningful for bssm/bsm".into(),
                ));
            }
            if self.params.epsilon != 0.0 {
                return Err(ModelError::Incompatible(
                    "epsilon is only meaningful for bssm/bsm".into(),
                ));
            }
        }
        match self.strategy {
            Strategy::Selfish | Strategy::LeadStubborn => {
                if self.params.rho != 0.0 {
                    return Err(ModelError::Incompatible(
                        "rho is only meaningful for semiselfish/bssm".into(),
                    ));
                }
                if self.params.n_targets() > 0 {
                    return Err(ModelError::Incompatible(
                        "baseline strategies take no targets; fold them into other pools".into(),
                    ));
                }
            }
            Strategy::SemiSelfish => {
                if self.params.n_targets() > 0 {
                    return Err(ModelError::Incompatible(
                        "semiselfish takes no targets; use bssm".into(),
                    ));
                }
            }
            Strategy::Bsm => {
                if self.params.rho != 0.0 {
                    warnings.push(
                        "rho is ignored under bsm: the adversary mines selfishly \
                         with its whole power"
                            .into(),
                    );
                }
            }
            Strategy::Honest | Strategy::Bssm => {}
        }
        Ok(warnings)
    }
}

/// Resolution tallies for fork statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionCounts {
    /// Resolutions won by the adversary's private branch.
    pub private_wins: u64,
    /// Total resolutions observed.
    pub total: u64,
}

impl ResolutionCounts {
    /// Empirical private-win rate (NaN when nothing was observed).
    pub fn rate(&self) -> f64 {
        self.private_wins as f64 / self.total as f64
    }
}

/// Tallies from one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    /// Blocks settled on the final main chain: adversary, other pools, targets.
    pub settled_adversary: u64,
    /// Other pools' settled blocks.
    pub settled_other: u64,
    /// Per-target settled blocks.
    pub settled_targets: Vec<u64>,
    /// Total bribe transfer in block units (`epsilon` times adversary settled).
    pub bribes_transferred: f64,
    /// Final main-chain length (equals the sum of settled blocks).
    pub main_chain_length: u64,
    /// Number of block-generation events.
    pub total_events: u64,
    /// Post-bribe per-actor reward per event: adversary, other, targets.
    pub per_actor_reward: Vec<f64>,
    /// Occupancy counts per chain state (sampled before each event).
    pub state_visit_counts: HashMap<String, u64>,
    /// Blocks published directly onto the public chain (growth-rate proxy).
    pub public_extensions: u64,
    /// Outcomes of fork resolutions reached from a deep lead (>= 2).
    pub deep_resolutions: ResolutionCounts,
    /// Outcomes of all bribery-stage resolutions.
    pub stage_resolutions: ResolutionCounts,
    /// Per-batch settled counts for standard-error estimation.
    pub batch_settled: Vec<Vec<u64>>,
    /// Events per batch (last batch may be short).
    pub batch_events: Vec<u64>,
    /// RNG algorithm identifier for reproducibility.
    pub rng_algorithm: String,
    /// Validation warnings recorded for this run.
    pub warnings: Vec<String>,
}

impl SimStats {
    /// Settled blocks of every actor in report order.
    pub fn settled(&self) -> Vec<u64> {
        let mut v = vec![self.settled_adversary, self.settled_other];
        v.extend(&self.settled_targets);
        v
    }
}

const BATCHES: usize = 64;
const LADDER_CAP: u32 = 512;

/// Actor identity of a found block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Finder {
    SelfishPool,
    HonestPool,
    Others,
    Target(u16),
}

struct PowerTable {
    a_selfish: f64,
    a_honest: f64,
    others: f64,
    beta_cum: Vec<f64>,
}

impl PowerTable {
    fn new(p: &StrategyParams, rho_active: bool) -> Self {
        let rho = if rho_active { p.rho } else { 0.0 };
        let mut acc = 0.0;
        let beta_cum = p
            .betas
            .iter()
            .map(|b| {
                acc += b;
                acc
            })
            .collect();
        PowerTable {
            a_selfish: (1.0 - rho) * p.alpha,
            a_honest: rho * p.alpha,
            others: p.delta(),
            beta_cum,
        }
    }

    fn draw(&self, u: f64) -> Finder {
        let mut x = u;
        if x < self.a_selfish {
            return Finder::SelfishPool;
        }
        x -= self.a_selfish;
        if x < self.a_honest {
            return Finder::HonestPool;
        }
        x -= self.a_honest;
        if x < self.others {
            return Finder::Others;
        }
        x -= self.others;
        for (i, cum) in self.beta_cum.iter().enumerate() {
            if x < *cum {
                return Finder::Target(i as u16);
            }
        }
        Finder::Target(self.beta_cum.len().saturating_sub(1) as u16)
    }
}

/// Owner of a contested public-branch block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Owner {
    HonestPool,
    Others,
    Target(u16),
}

/// Public tip owner at the bribery initiation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StageTip {
    Others,
    Target(u16),
    HonestPool,
}

struct Tally {
    adversary: u64,
    other: u64,
    targets: Vec<u64>,
    batch_settled: Vec<Vec<u64>>,
    batch: usize,
}

impl Tally {
    fn new(n_targets: usize, n_batches: usize) -> Self {
        Tally {
            adversary: 0,
            other: 0,
            targets: vec![0; n_targets],
            batch_settled: vec![vec![0; n_targets + 2]; n_batches],
            batch: 0,
        }
    }

    fn credit_adversary(&mut self, n: u64) {
        self.adversary += n;
        self.batch_settled[self.batch][0] += n;
    }

    fn credit_other(&mut self, n: u64) {
        self.other += n;
        self.batch_settled[self.batch][1] += n;
    }

    fn credit_target(&mut self, t: usize, n: u64) {
        self.targets[t] += n;
        self.batch_settled[self.batch][2 + t] += n;
    }

    fn credit_owner(&mut self, o: Owner) {
        match o {
            Owner::HonestPool => self.credit_adversary(1),
            Owner::Others => self.credit_other(1),
            Owner::Target(t) => self.credit_target(t as usize, 1),
        }
    }
}

/// Runs one simulation.
pub fn simulate(cfg: &SimConfig) -> Result<SimStats, ModelError> {
    simulate_inner(cfg, None)
}

/// Runs one simulation, writing a line-delimited event trace.
pub fn simulate_traced(cfg: &SimConfig, trace: &mut dyn Write) -> Result<SimStats, ModelError> {
    simulate_inner(cfg, Some(trace))
}

fn simulate_inner(cfg: &SimConfig, trace: Option<&mut dyn Write>) -> Result<SimStats, ModelError> {
    let warnings = cfg.validate()?;
    match cfg.strategy {
        Strategy::Honest => run_honest(cfg, warnings),
        Strategy::Selfish | Strategy::SemiSelfish | Strategy::Bssm => {
            run_bssm_family(cfg, warnings, trace)
        }
        Strategy::LeadStubborn | Strategy::Bsm => run_bsm_family(cfg, warnings, trace),
    }
}

fn batch_layout(rounds: u64) -> (u64, usize) {
    let len = rounds.div_ceil(BATCHES as u64).max(1);
    let n = rounds.div_ceil(len) as usize;
    (len, n)
}

fn run_honest(cfg: &SimConfig, warnings: Vec<String>) -> Result<SimStats, ModelError> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let powers = PowerTable::new(&cfg.params, false);
    let (batch_len, n_batches) = batch_layout(cfg.rounds);
    let mut tally = Tally::new(cfg.params.n_targets(), n_batches);
    let mut batch_events = vec![0u64; n_batches];
    for i in 0..cfg.rounds {
        tally.batch = ((i / batch_len) as usize).min(n_batches - 1);
        batch_events[tally.batch] += 1;
        match powers.draw(rng.gen::<f64>()) {
            Finder::SelfishPool | Finder::HonestPool => tally.credit_adversary(1),
            Finder::Others => tally.credit_other(1),
            Finder::Target(t) => tally.credit_target(t as usize, 1),
        }
    }
    let mut visits = HashMap::new();
    visits.insert("0".to_string(), cfg.rounds);
    finish_stats(
        cfg,
        tally,
        batch_events,
        visits,
        cfg.rounds,
        ResolutionCounts::default(),
        ResolutionCounts::default(),
        warnings,
    )
}

/// Visit counter over compactly encoded states.
struct VisitCounter {
    counts: Vec<u64>,
}

impl VisitCounter {
    fn new() -> Self {
        VisitCounter {
            counts: vec![0; (2 * LADDER_CAP + 4) as usize],
        }
    }

    fn zero(&mut self) {
        self.counts[0] += 1;
    }

    fn ladder(&mut self, k: u32) {
        self.counts[k.min(LADDER_CAP) as usize] += 1;
    }

    fn ladder_prime(&mut self, k: u32) {
        self.counts[(LADDER_CAP + k.min(LADDER_CAP)) as usize] += 1;
    }

    fn stage(&mut self, which: usize) {
        self.counts[(2 * LADDER_CAP) as usize + 1 + which] += 1;
    }

    fn into_map(self, stage_names: &[&str]) -> HashMap<String, u64> {
        let mut map = HashMap::new();
        for (i, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let i = i as u32;
            let name = if i == 0 {
                "0".to_string()
            } else if i <= LADDER_CAP {
                format!("{i}")
            } else if i <= 2 * LADDER_CAP {
                format!("{}'", i - LADDER_CAP)
            } else {
                stage_names[(i - 2 * LADDER_CAP - 1) as usize].to_string()
            };
            map.insert(name, c);
        }
        map
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_stats(
    cfg: &SimConfig,
    tally: Tally,
    batch_events: Vec<u64>,
    visits: HashMap<String, u64>,
    public_extensions: u64,
    deep: ResolutionCounts,
    stage: ResolutionCounts,
    warnings: Vec<String>,
) -> Result<SimStats, ModelError> {
    let n = cfg.rounds as f64;
    let beta_acc: f64 = cfg
        .params
        .betas
        .iter()
        .zip(&cfg.accept_flags)
        .filter(|(_, d)| d.accepts())
        .map(|(b, _)| *b)
        .sum();
    let eps = if beta_acc > 0.0 { cfg.params.epsilon } else { 0.0 };
    let bribes = eps * tally.adversary as f64;
    let mut per_actor = vec![
        (tally.adversary as f64 - bribes) / n,
        tally.other as f64 / n,
    ];
    for (t, &s) in tally.targets.iter().enumerate() {
        let accepted = cfg.accept_flags.get(t).is_some_and(|d| d.accepts());
        let share = if accepted && beta_acc > 0.0 {
            bribes * cfg.params.betas[t] / beta_acc
        } else {
            0.0
        };
        per_actor.push((s as f64 + share) / n);
    }
    let main = tally.adversary + tally.other + tally.targets.iter().sum::<u64>();
    Ok(SimStats {
        settled_adversary: tally.adversary,
        settled_other: tally.other,
        settled_targets: tally.targets,
        bribes_transferred: bribes,
        main_chain_length: main,
        total_events: cfg.rounds,
        per_actor_reward: per_actor,
        state_visit_counts: visits,
        public_extensions,
        deep_resolutions: deep,
        stage_resolutions: stage,
        batch_settled: tally.batch_settled,
        batch_events,
        rng_algorithm: "chacha12".to_string(),
        warnings,
    })
}

fn run_bssm_family(
    cfg: &SimConfig,
    warnings: Vec<String>,
    mut trace: Option<&mut dyn Write>,
) -> Result<SimStats, ModelError> {
    let p = &cfg.params;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let powers = PowerTable::new(p, matches!(cfg.strategy, Strategy::SemiSelfish | Strategy::Bssm));
    let (batch_len, n_batches) = batch_layout(cfg.rounds);
    let mut tally = Tally::new(p.n_targets(), n_batches);
    let mut batch_events = vec![0u64; n_batches];
    let mut visits = VisitCounter::new();

    let mut reserved: u32 = 0;
    let mut primed = false;
    let mut priv_len: u64 = 0;
    let mut pub_owners: Vec<Owner> = Vec::new();
    let mut stage_tip: Option<StageTip> = None;
    let mut public_extensions: u64 = 0;
    let mut deep = ResolutionCounts::default();
    let mut stage = ResolutionCounts::default();
    let mut pending_deep = false;

    let accepts = |t: u16| -> bool { cfg.accept_flags[t as usize].accepts() };

    let label = |stage_tip: &Option<StageTip>, primed: bool, reserved: u32| -> String {
        match stage_tip {
            Some(StageTip::Others) => "0'o".into(),
            Some(StageTip::Target(_)) => "0'b".into(),
            Some(StageTip::HonestPool) => "0'a".into(),
            None if primed => format!("{}'", reserved - 1),
            None => format!("{reserved}"),
        }
    };

    for i in 0..cfg.rounds {
        tally.batch = ((i / batch_len) as usize).min(n_batches - 1);
        batch_events[tally.batch] += 1;

        // Occupancy sample before the event.
        match stage_tip {
            Some(StageTip::Others) => visits.stage(0),
            Some(StageTip::Target(_)) => visits.stage(1),
            Some(StageTip::HonestPool) => visits.stage(2),
            None if primed => visits.ladder_prime(reserved - 1),
            None if reserved > 0 => visits.ladder(reserved),
            None => visits.zero(),
        }
        let before = trace
            .as_ref()
            .map(|_| label(&stage_tip, primed, reserved));

        let finder = powers.draw(rng.gen::<f64>());
        if !matches!(finder, Finder::SelfishPool) {
            public_extensions += 1;
        }

        if let Some(tip) = stage_tip {
            // Bribery initiation stage: the next block resolves the fork.
            let (private_wins, resolver): (bool, Owner) = match finder {
                Finder::SelfishPool => (true, Owner::HonestPool), // credited as adversary
                Finder::HonestPool => (false, Owner::HonestPool),
                Finder::Others => (rng.gen::<f64>() < p.gamma, Owner::Others),
                Finder::Target(t) => {
                    let own_tip = matches!(tip, StageTip::Target(j) if j == t);
                    (!own_tip && accepts(t), Owner::Target(t))
                }
            };
            if private_wins {
                tally.credit_adversary(priv_len);
                match resolver {
                    Owner::HonestPool => tally.credit_adversary(1),
                    Owner::Others => tally.credit_other(1),
                    Owner::Target(t) => tally.credit_target(t as usize, 1),
                }
            } else {
                for &o in &pub_owners {
                    tally.credit_owner(o);
                }
                match resolver {
                    Owner::HonestPool => tally.credit_adversary(1),
                    Owner::Others => tally.credit_other(1),
                    Owner::Target(t) => tally.credit_target(t as usize, 1),
                }
            }
            stage.total += 1;
            if private_wins {
                stage.private_wins += 1;
            }
            if pending_deep {
                deep.total += 1;
                if private_wins {
                    deep.private_wins += 1;
                }
                pending_deep = false;
            }
            if let Some(w) = trace.as_mut() {
                let _ = writeln!(
                    w,
                    "event={i} finder={} action=resolve-{} before={} after=0",
                    finder_name(finder),
                    if private_wins { "private" } else { "public" },
                    before.unwrap_or_default()
                );
            }
            stage_tip = None;
            priv_len = 0;
            pub_owners.clear();
            reserved = 0;
            primed = false;
            continue;
        }

        if !primed {
            match (reserved, finder) {
                (_, Finder::SelfishPool) => reserved += 1,
                (0, Finder::HonestPool) => tally.credit_adversary(1),
                (0, Finder::Others) => tally.credit_other(1),
                (0, Finder::Target(t)) => tally.credit_target(t as usize, 1),
                (1, f) => {
                    // Fork forms; bribery initiation stage.
                    pub_owners.push(owner_of(f));
                    priv_len += 1;
                    reserved = 0;
                    stage_tip = Some(tip_of(f));
                }
                (2, Finder::HonestPool) => {
                    pub_owners.push(Owner::HonestPool);
                    primed = true;
                }
                (2, f) => {
                    // Override: release both reserved blocks, private wins.
                    pub_owners.push(owner_of(f));
                    tally.credit_adversary(priv_len + reserved as u64);
                    priv_len = 0;
                    pub_owners.clear();
                    reserved = 0;
                    if pending_deep {
                        deep.total += 1;
                        deep.private_wins += 1;
                        pending_deep = false;
                    }
                }
                (_, Finder::HonestPool) => {
                    pub_owners.push(Owner::HonestPool);
                    primed = true;
                }
                (_, f) => {
                    pub_owners.push(owner_of(f));
                    priv_len += 1;
                    reserved -= 1;
                }
            }
        } else {
            let kp = reserved - 1;
            match (kp, finder) {
                (_, Finder::SelfishPool) => reserved += 1,
                (1, f) => {
                    pub_owners.push(owner_of(f));
                    priv_len += 2;
                    reserved -= 2;
                    primed = false;
                    stage_tip = Some(tip_of(f));
                }
                (2, Finder::HonestPool) => {
                    pub_owners.push(Owner::HonestPool);
                    priv_len += 1;
                    reserved -= 1;
                }
                (2, f) => {
                    // Override from the primed ladder.
                    pub_owners.push(owner_of(f));
                    tally.credit_adversary(priv_len + reserved as u64);
                    priv_len = 0;
                    pub_owners.clear();
                    reserved = 0;
                    primed = false;
                    if pending_deep {
                        deep.total += 1;
                        deep.private_wins += 1;
                        pending_deep = false;
                    }
                }
                (_, Finder::HonestPool) => {
                    pub_owners.push(Owner::HonestPool);
                    priv_len += 1;
                    reserved -= 1;
                }
                (_, f) => {
                    pub_owners.push(owner_of(f));
                    priv_len += 2;
                    reserved -= 2;
                    primed = false;
                }
            }
        }

        let lead = if primed { reserved - 1 } else { reserved };
        if stage_tip.is_none() && lead >= 2 {
            pending_deep = true;
        }
        if let Some(w) = trace.as_mut() {
            let _ = writeln!(
                w,
                "event={i} finder={} action=step before={} after={}",
                finder_name(finder),
                before.unwrap_or_default(),
                label(&stage_tip, primed, reserved)
            );
        }
    }

    // Force-settle whatever is pending: a standing lead is released and
    // wins; a pending equal fork is resolved by one extra draw.
    if let Some(tip) = stage_tip {
        let finder = powers.draw(rng.gen::<f64>());
        let private_wins = match finder {
            Finder::SelfishPool => true,
            Finder::HonestPool => false,
            Finder::Others => rng.gen::<f64>() < p.gamma,
            Finder::Target(t) => {
                !matches!(tip, StageTip::Target(j) if j == t) && accepts(t)
            }
        };
        if private_wins {
            tally.credit_adversary(priv_len);
        } else {
            for &o in &pub_owners {
                tally.credit_owner(o);
            }
        }
    } else if reserved > 0 || priv_len > 0 {
        tally.credit_adversary(priv_len + reserved as u64);
    }

    finish_stats(
        cfg,
        tally,
        batch_events,
        visits.into_map(&["0'o", "0'b", "0'a"]),
        public_extensions,
        deep,
        stage,
        warnings,
    )
}

fn run_bsm_family(
    cfg: &SimConfig,
    warnings: Vec<String>,
    mut trace: Option<&mut dyn Write>,
) -> Result<SimStats, ModelError> {
    let p = &cfg.params;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let powers = PowerTable::new(p, false);
    let (batch_len, n_batches) = batch_layout(cfg.rounds);
    let mut tally = Tally::new(p.n_targets(), n_batches);
    let mut batch_events = vec![0u64; n_batches];
    let mut visits = VisitCounter::new();

    let mut hidden: u32 = 0;
    let mut fork = false;
    let mut priv_len: u64 = 0;
    let mut pub_owners: Vec<Owner> = Vec::new();
    let mut stage_tip: Option<StageTip> = None;
    let mut public_extensions: u64 = 0;
    let mut deep = ResolutionCounts::default();
    let mut stage = ResolutionCounts::default();
    let mut pending_deep = false;

    let accepts = |t: u16| -> bool { cfg.accept_flags[t as usize].accepts() };

    let label = |stage_tip: &Option<StageTip>, fork: bool, hidden: u32| -> String {
        match stage_tip {
            Some(StageTip::Others) => "0'o".into(),
            Some(_) => "0'b".into(),
            None if fork => format!("{hidden}'"),
            None => format!("{hidden}"),
        }
    };

    for i in 0..cfg.rounds {
        tally.batch = ((i / batch_len) as usize).min(n_batches - 1);
        batch_events[tally.batch] += 1;

        if stage_tip.is_some() {
            visits.stage(if matches!(stage_tip, Some(StageTip::Others)) { 0 } else { 1 });
        } else if fork {
            visits.ladder_prime(hidden);
        } else if hidden > 0 {
            visits.ladder(hidden);
        } else {
            visits.zero();
        }
        let before = trace.as_ref().map(|_| label(&stage_tip, fork, hidden));

        let finder = powers.draw(rng.gen::<f64>());
        if !matches!(finder, Finder::SelfishPool) {
            public_extensions += 1;
        }

        if let Some(tip) = stage_tip {
            let (private_wins, resolver) = match finder {
                Finder::SelfishPool => (true, Owner::HonestPool),
                Finder::HonestPool => unreachable!("bsm has no honest sub-pool"),
                Finder::Others => (rng.gen::<f64>() < p.gamma, Owner::Others),
                Finder::Target(t) => {
                    let own_tip = matches!(tip, StageTip::Target(j) if j == t);
                    (!own_tip && accepts(t), Owner::Target(t))
                }
            };
            if private_wins {
                tally.credit_adversary(priv_len);
            } else {
                for &o in &pub_owners {
                    tally.credit_owner(o);
                }
            }
            match resolver {
                Owner::HonestPool => tally.credit_adversary(1),
                Owner::Others => tally.credit_other(1),
                Owner::Target(t) => tally.credit_target(t as usize, 1),
            }
            stage.total += 1;
            if private_wins {
                stage.private_wins += 1;
            }
            if pending_deep {
                deep.total += 1;
                if private_wins {
                    deep.private_wins += 1;
                }
                pending_deep = false;
            }
            if let Some(w) = trace.as_mut() {
                let _ = writeln!(
                    w,
                    "event={i} finder={} action=resolve-{} before={} after=0",
                    finder_name(finder),
                    if private_wins { "private" } else { "public" },
                    before.unwrap_or_default()
                );
            }
            stage_tip = None;
            priv_len = 0;
            pub_owners.clear();
            hidden = 0;
            fork = false;
            continue;
        }

        match finder {
            Finder::SelfishPool => hidden += 1,
            Finder::HonestPool => unreachable!(),
            f => {
                if hidden == 0 {
                    match f {
                        Finder::Others => tally.credit_other(1),
                        Finder::Target(t) => tally.credit_target(t as usize, 1),
                        _ => unreachable!(),
                    }
                } else {
                    let to_private = if fork {
                        match f {
                            Finder::Others => rng.gen::<f64>() < p.gamma,
                            Finder::Target(t) => accepts(t),
                            _ => unreachable!(),
                        }
                    } else {
                        false
                    };
                    if to_private {
                        // Rebase: the published match prefix settles; the
                        // finder's block becomes the new contested tip.
                        tally.credit_adversary(priv_len);
                        pub_owners.clear();
                        pub_owners.push(owner_of(f));
                        priv_len = 1;
                    } else {
                        pub_owners.push(owner_of(f));
                        priv_len += 1;
                    }
                    hidden -= 1;
                    if hidden == 0 {
                        fork = false;
                        stage_tip = Some(tip_of(f));
                    } else {
                        fork = true;
                    }
                }
            }
        }

        if stage_tip.is_none() && hidden >= 2 {
            pending_deep = true;
        }
        if let Some(w) = trace.as_mut() {
            let _ = writeln!(
                w,
                "event={i} finder={} action=step before={} after={}",
                finder_name(finder),
                before.unwrap_or_default(),
                label(&stage_tip, fork, hidden)
            );
        }
    }

    if let Some(tip) = stage_tip {
        let finder = powers.draw(rng.gen::<f64>());
        let private_wins = match finder {
            Finder::SelfishPool => true,
            Finder::Others => rng.gen::<f64>() < p.gamma,
            Finder::Target(t) => !matches!(tip, StageTip::Target(j) if j == t) && accepts(t),
            Finder::HonestPool => false,
        };
        if private_wins {
            tally.credit_adversary(priv_len);
        } else {
            for &o in &pub_owners {
                tally.credit_owner(o);
            }
        }
    } else if hidden > 0 || priv_len > 0 {
        tally.credit_adversary(priv_len + hidden as u64);
    }

    finish_stats(
        cfg,
        tally,
        batch_events,
        visits.into_map(&["0'o", "0'b"]),
        public_extensions,
        deep,
        stage,
        warnings,
    )
}

fn owner_of(f: Finder) -> Owner {
    match f {
        Finder::HonestPool => Owner::HonestPool,
        Finder::Others => Owner::Others,
        Finder::Target(t) => Owner::Target(t),
        Finder::SelfishPool => unreachable!("selfish blocks never join the public branch"),
    }
}

fn tip_of(f: Finder) -> StageTip {
    match f {
        Finder::HonestPool => StageTip::HonestPool,
        Finder::Others => StageTip::Others,
        Finder::Target(t) => StageTip::Target(t),
        Finder::SelfishPool => unreachable!(),
    }
}

fn finder_name(f: Finder) -> &'static str {
    match f {
        Finder::SelfishPool => "a_s",
        Finder::HonestPool => "a_i",
        Finder::Others => "o",
        Finder::Target(_) => "b",
    }
}

/// One component's analytic-versus-simulation deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDeviation {
    /// Component name: `adversary`, `other`, or `targetN`.
    pub component: String,
    /// Closed-form value.
    pub analytic: f64,
    /// Simulated per-event value.
    pub simulated: f64,
    /// Absolute deviation.
    pub abs_dev: f64,
    /// Relative deviation against the analytic value.
    pub rel_dev: f64,
    /// Batch-means standard error of the simulated value.
    pub std_err: f64,
    /// Deviation in standard-error multiples.
    pub sigmas: f64,
}

/// Closed-form versus simulation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// Per-component deviations.
    pub components: Vec<ComponentDeviation>,
    /// Largest standard-error multiple.
    pub max_sigmas: f64,
    /// True when any component deviates beyond three standard errors.
    pub beyond_three_sigma: bool,
}

/// Compares a simulation run against a closed-form reward vector.
pub fn compare_closed_form(
    cfg: &SimConfig,
    stats: &SimStats,
    analytic: &RewardVector,
) -> Result<DeviationReport, ModelError> {
    if !matches!(cfg.strategy, Strategy::Bssm | Strategy::Bsm) {
        return Err(ModelError::Incompatible(
            "closed forms exist only for bssm/bsm".into(),
        ));
    }
    if analytic.reward_targets.len() != stats.settled_targets.len() {
        return Err(ModelError::Incompatible(
            "target count mismatch between closed form and simulation".into(),
        ));
    }
    let any_accept = cfg.accept_flags.iter().any(|d| d.accepts());
    if analytic.variant_accept != any_accept {
        return Err(ModelError::Incompatible(
            "accept/deny variant mismatch".into(),
        ));
    }
    let beta_acc: f64 = cfg
        .params
        .betas
        .iter()
        .zip(&cfg.accept_flags)
        .filter(|(_, d)| d.accepts())
        .map(|(b, _)| *b)
        .sum();
    let eps = if beta_acc > 0.0 { cfg.params.epsilon } else { 0.0 };
    let n_actors = 2 + stats.settled_targets.len();

    // Post-bribe per-event reward per batch; the bribe is a linear
    // transform of the batch tallies, so batch means remain valid.
    let mut batch_rewards: Vec<Vec<f64>> = Vec::with_capacity(stats.batch_settled.len());
    for (batch, &events) in stats.batch_settled.iter().zip(&stats.batch_events) {
        if events == 0 {
            continue;
        }
        let ev = events as f64;
        let adv = batch[0] as f64;
        let bribe = eps * adv;
        let mut row = vec![(adv - bribe) / ev, batch[1] as f64 / ev];
        for (t, &s) in batch[2..].iter().enumerate() {
            let share = if beta_acc > 0.0 && cfg.accept_flags[t].accepts() {
                bribe * cfg.params.betas[t] / beta_acc
            } else {
                0.0
            };
            row.push((s as f64 + share) / ev);
        }
        batch_rewards.push(row);
    }
    let b = batch_rewards.len() as f64;
    let mut components = Vec::with_capacity(n_actors);
    let names: Vec<String> = std::iter::once("adversary".to_string())
        .chain(std::iter::once("other".to_string()))
        .chain((0..stats.settled_targets.len()).map(|i| format!("target{}", i + 1)))
        .collect();
    let analytic_vals: Vec<f64> = std::iter::once(analytic.reward_adversary)
        .chain(std::iter::once(analytic.reward_other))
        .chain(analytic.reward_targets.iter().copied())
        .collect();
    for (idx, name) in names.into_iter().enumerate() {
        let mean = stats.per_actor_reward[idx];
        let var = batch_rewards
            .iter()
            .map(|r| (r[idx] - mean).powi(2))
            .sum::<f64>()
            / (b - 1.0).max(1.0);
        let std_err = (var / b).sqrt();
        let abs_dev = (mean - analytic_vals[idx]).abs();
        let rel_dev = if analytic_vals[idx] != 0.0 {
            abs_dev / analytic_vals[idx].abs()
        } else {
            0.0
        };
        let sigmas = if std_err > 0.0 { abs_dev / std_err } else if abs_dev == 0.0 { 0.0 } else { f64::INFINITY };
        components.push(ComponentDeviation {
            component: name,
            analytic: analytic_vals[idx],
            simulated: mean,
            abs_dev,
            rel_dev,
            std_err,
            sigmas,
        });
    }
    let max_sigmas = components.iter().map(|c| c.sigmas).fold(0.0, f64::max);
    Ok(DeviationReport {
        beyond_three_sigma: max_sigmas > 3.0,
        max_sigmas,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg(strategy: Strategy) -> SimConfig {
        SimConfig {
            params: StrategyParams::single(0.3, 0.1, 0.5, 0.02, 0.1).unwrap(),
            strategy,
            accept_flags: vec![Decision::Accept],
            rounds: 200_000,
            seed: 7,
        }
    }

    #[test]
    fn determinism() {
        let cfg = base_cfg(Strategy::Bssm);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn honest_rewards_match_power() {
        let cfg = SimConfig {
            params: StrategyParams::single(0.3, 0.0, 0.0, 0.0, 0.1).unwrap(),
            strategy: Strategy::Honest,
            accept_flags: vec![],
            rounds: 1_000_000,
            seed: 3,
        };
        let s = simulate(&cfg).unwrap();
        assert_eq!(s.main_chain_length, s.total_events);
        let se = (0.3f64 * 0.7 / 1e6).sqrt();
        assert!((s.per_actor_reward[0] - 0.3).abs() < 3.0 * se);
    }

    #[test]
    fn settled_never_exceeds_events() {
        for strat in [Strategy::Selfish, Strategy::LeadStubborn] {
            let cfg = SimConfig {
                params: StrategyParams::new(0.35, 0.0, 0.5, 0.0, vec![]).unwrap(),
                strategy: strat,
                accept_flags: vec![],
                rounds: 100_000,
                seed: 11,
            };
            let s = simulate(&cfg).unwrap();
            assert!(s.main_chain_length <= s.total_events);
            assert_eq!(
                s.main_chain_length,
                s.settled_adversary + s.settled_other
            );
        }
    }

    #[test]
    fn incompatible_configs_rejected() {
        let mut cfg = base_cfg(Strategy::Selfish);
        cfg.accept_flags.clear();
        assert!(simulate(&cfg).is_err()); // targets under selfish

        let cfg = SimConfig {
            params: StrategyParams::new(0.3, 0.2, 0.5, 0.0, vec![]).unwrap(),
            strategy: Strategy::Selfish,
            accept_flags: vec![],
            rounds: 10,
            seed: 0,
        };
        assert!(simulate(&cfg).is_err()); // rho under selfish

        let cfg = SimConfig {
            params: StrategyParams::new(0.3, 0.0, 0.5, 0.0, vec![]).unwrap(),
            strategy: Strategy::Bsm,
            accept_flags: vec![Decision::Accept],
            rounds: 10,
            seed: 0,
        };
        assert!(simulate(&cfg).is_err()); // flag count mismatch
    }

    #[test]
    fn bsm_ignores_rho_with_warning() {
        let cfg = SimConfig {
            params: StrategyParams::single(0.3, 0.2, 0.5, 0.02, 0.1).unwrap(),
            strategy: Strategy::Bsm,
            accept_flags: vec![Decision::Deny],
            rounds: 1000,
            seed: 0,
        };
        let s = simulate(&cfg).unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn visit_counts_sum_to_events() {
        let s = simulate(&base_cfg(Strategy::Bssm)).unwrap();
        let total: u64 = s.state_visit_counts.values().sum();
        assert_eq!(total, s.total_events);
    }

    #[test]
    fn compare_identical_vector_is_zero() {
        let cfg = base_cfg(Strategy::Bssm);
        let s = simulate(&cfg).unwrap();
        let rv = RewardVector {
            reward_adversary: s.per_actor_reward[0],
            reward_other: s.per_actor_reward[1],
            reward_targets: vec![s.per_actor_reward[2]],
            bribe_paid: s.bribes_transferred / s.total_events as f64,
            variant_accept: true,
        };
        let rep = compare_closed_form(&cfg, &s, &rv).unwrap();
        assert!(rep.max_sigmas < 1e-9);
        assert!(!rep.beyond_three_sigma);
    }

    #[test]
    fn standard_error_shrinks_with_rounds() {
        let mut cfg = base_cfg(Strategy::Bssm);
        cfg.rounds = 100_000;
        let small = simulate(&cfg).unwrap();
        cfg.rounds = 1_600_000;
        let large = simulate(&cfg).unwrap();
        let rv = RewardVector {
            reward_adversary: 0.24,
            reward_other: 0.48,
            reward_targets: vec![0.086],
            bribe_paid: 0.0,
            variant_accept: true,
        };
        let rs = compare_closed_form(&cfg_with_rounds(&cfg, 100_000), &small, &rv).unwrap();
        let rl = compare_closed_form(&cfg, &large, &rv).unwrap();
        // 16x the rounds should shrink the standard error by about 4x.
        assert!(rl.components[0].std_err < rs.components[0].std_err / 2.0);
    }

    fn cfg_with_rounds(cfg: &SimConfig, rounds: u64) -> SimConfig {
        SimConfig {
            rounds,
            ..cfg.clone()
        }
    }
}
