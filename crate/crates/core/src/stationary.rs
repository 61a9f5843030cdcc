//! Construction and solution of truncated birth-death-like Markov chains.
//!
//! Both attack models reduce to chains with a ladder of withholding states
//! plus a handful of fork states. The ladder is truncated at a configurable
//! depth `K`; upward transitions out of the deepest retained states are
//! redirected into self-loops, which keeps every row stochastic while
//! bounding the discarded tail geometrically.

use crate::params::ModelError;
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::hash::Hash;

/// A finite, row-stochastic transition model over opaque state labels.
#[derive(Debug, Clone)]
pub struct TransitionModel<L> {
    states: Vec<L>,
    index: HashMap<L, usize>,
    rows: Vec<Vec<(usize, f64)>>,
    truncation_depth: usize,
    up_rate: f64,
}

impl<L: Clone + Eq + Hash> TransitionModel<L> {
    /// Creates an empty model. `truncation_depth` is the deepest retained
    /// ladder index and `up_rate` the per-step probability of climbing, used
    /// for the analytic tail bound.
    pub fn new(truncation_depth: usize, up_rate: f64) -> Self {
        TransitionModel {
            states: Vec::new(),
            index: HashMap::new(),
            rows: Vec::new(),
            truncation_depth,
            up_rate,
        }
    }

    /// Registers a state (idempotent) and returns its dense index.
    pub fn add_state(&mut self, label: L) -> usize {
        if let Some(&i) = self.index.get(&label) {
            return i;
        }
        let i = self.states.len();
        self.states.push(label.clone());
        self.index.insert(label, i);
        self.rows.push(Vec::new());
        i
    }

    /// Adds probability mass to the `from -> to` transition.
    pub fn add_transition(&mut self, from: &L, to: &L, prob: f64) {
        let f = self.add_state(from.clone());
        let t = self.add_state(to.clone());
        if let Some(entry) = self.rows[f].iter_mut().find(|(j, _)| *j == t) {
            entry.1 += prob;
        } else {
            self.rows[f].push((t, prob));
        }
    }

    /// All registered states in insertion order.
    pub fn states(&self) -> &[L] {
        &self.states
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// True when no state has been registered.
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Configured truncation depth.
    pub fn truncation_depth(&self) -> usize {
        self.truncation_depth
    }

    /// Probability of one transition `from -> to` (zero when absent).
    pub fn prob(&self, from: &L, to: &L) -> f64 {
        let (Some(&f), Some(&t)) = (self.index.get(from), self.index.get(to)) else {
            return 0.0;
        };
        self.rows[f]
            .iter()
            .find(|(j, _)| *j == t)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    /// Largest deviation of any row sum from 1.
    pub fn stochasticity_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Verifies row sums, probability ranges, and irreducibility over the
    /// retained states.
    pub fn check(&self) -> Result<(), ModelError> {
        if self.is_empty() {
            return Err(ModelError::Structure("empty model".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(ModelError::Structure(format!(
                    "outgoing mass from state {i} sums to {sum}"
                )));
            }
            for &(_, p) in row {
                if !(0.0..=1.0 + 1e-12).contains(&p) {
                    return Err(ModelError::Structure(format!(
                        "probability {p} outside [0, 1]"
                    )));
                }
            }
        }
        let fwd = self.reachable(0, false);
        let bwd = self.reachable(0, true);
        if fwd.iter().any(|&r| !r) || bwd.iter().any(|&r| !r) {
            return Err(ModelError::Structure(
                "chain is reducible over retained states".into(),
            ));
        }
        Ok(())
    }

    fn reachable(&self, start: usize, reversed: bool) -> Vec<bool> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        if reversed {
            for (i, row) in self.rows.iter().enumerate() {
                for &(j, p) in row {
                    if p > 0.0 {
                        incoming[j].push(i);
                    }
                }
            }
        }
        while let Some(i) = stack.pop() {
            let next: Box<dyn Iterator<Item = usize>> = if reversed {
                Box::new(incoming[i].iter().copied())
            } else {
                Box::new(self.rows[i].iter().filter(|(_, p)| *p > 0.0).map(|(j, _)| *j))
            };
            for j in next {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    /// One step of `pi * P` into `out`.
    fn apply(&self, pi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let w = pi[i];
            if w == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += w * p;
            }
        }
    }

    fn residual_of(&self, pi: &[f64]) -> f64 {
        let mut next = vec![0.0; pi.len()];
        self.apply(pi, &mut next);
        pi.iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A solved stationary distribution with diagnostics.
#[derive(Debug, Clone)]
pub struct StationaryDistribution<L> {
    states: Vec<L>,
    index: HashMap<L, usize>,
    probs: Vec<f64>,
    /// Largest balance-equation violation `max |pi P - pi|`.
    pub residual: f64,
    /// Estimated probability mass lost to ladder truncation.
    pub tail_mass: f64,
}

impl<L: Clone + Eq + Hash> StationaryDistribution<L> {
    /// Stationary probability of a state; zero for unknown labels.
    pub fn prob(&self, label: &L) -> f64 {
        self.index.get(label).map(|&i| self.probs[i]).unwrap_or(0.0)
    }

    /// Iterates `(label, probability)` in model order.
    pub fn iter(&self) -> impl Iterator<Item = (&L, f64)> {
        self.states.iter().zip(self.probs.iter().copied())
    }

    /// Total probability (should be 1 up to solver tolerance).
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Solves `pi P = pi`, `sum(pi) = 1` by a dense linear solve with the
/// normalization row replacing one redundant balance equation. Falls back to
/// power iteration when the direct solve is unusable.
pub fn solve_stationary<L: Clone + Eq + Hash>(
    model: &TransitionModel<L>,
    tol: f64,
) -> Result<StationaryDistribution<L>, ModelError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(ModelError::Domain(format!("tolerance must be > 0, got {tol}")));
    }
    model.check()?;
    let n = model.len();

    // (P^T - I) pi = 0 with the last row replaced by the normalization.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, row) in model.rows.iter().enumerate() {
        for &(j, p) in row {
            a[(j, i)] += p;
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;

    let direct = a.lu().solve(&b).map(|x| x.iter().copied().collect::<Vec<f64>>());
    let mut pi = match direct {
        Some(x) if x.iter().all(|v| v.is_finite()) => x,
        _ => power_iterate(model, tol)?,
    };
    // Clamp the tiny negative round-off a direct solve can leave behind.
    for v in pi.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let sum: f64 = pi.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(ModelError::NoConvergence {
            residual: f64::INFINITY,
            tol,
        });
    }
    for v in pi.iter_mut() {
        *v /= sum;
    }

    let mut residual = model.residual_of(&pi);
    if residual > tol {
        // Direct solve was ill-conditioned for this chain; refine iteratively.
        let refined = power_iterate_from(model, pi.clone(), tol);
        let r2 = model.residual_of(&refined);
        if r2 < residual {
            pi = refined;
            residual = r2;
        }
    }
    if residual > tol {
        return Err(ModelError::NoConvergence { residual, tol });
    }
    if pi.iter().any(|&v| v < 0.0) {
        return Err(ModelError::NoConvergence { residual, tol });
    }

    let tail_mass = truncation_tail_bound_raw(model.up_rate, model.truncation_depth);

    Ok(StationaryDistribution {
        states: model.states.clone(),
        index: model.index.clone(),
        probs: pi,
        residual,
        tail_mass,
    })
}

fn power_iterate<L: Clone + Eq + Hash>(
    model: &TransitionModel<L>,
    tol: f64,
) -> Result<Vec<f64>, ModelError> {
    let n = model.len();
    let pi = vec![1.0 / n as f64; n];
    let out = power_iterate_from(model, pi, tol);
    let residual = model.residual_of(&out);
    if residual > tol.max(1e-13) * 10.0 {
        return Err(ModelError::NoConvergence { residual, tol });
    }
    Ok(out)
}

fn power_iterate_from<L: Clone + Eq + Hash>(
    model: &TransitionModel<L>,
    mut pi: Vec<f64>,
    tol: f64,
) -> Vec<f64> {
    let mut next = vec![0.0; pi.len()];
    for _ in 0..200_000 {
        model.apply(&pi, &mut next);
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= sum);
        let diff = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if diff < tol / 4.0 {
            break;
        }
    }
    pi
}

/// Geometric upper bound on the stationary mass beyond the truncation depth.
///
/// With upward rate `u` per event and everything else moving down, the
/// combined mass of ladder level `k+1` is at most `u / (1 - u)` times that
/// of level `k`, so the mass beyond depth `K` is bounded by
/// `r^(K-1) / (1 - r)` with `r = u / (1 - u)`.
pub fn truncation_tail_bound<L: Clone + Eq + Hash>(model: &TransitionModel<L>) -> f64 {
    truncation_tail_bound_raw(model.up_rate, model.truncation_depth)
}

fn truncation_tail_bound_raw(up_rate: f64, depth: usize) -> f64 {
    if up_rate <= 0.0 {
        return 0.0;
    }
    if up_rate >= 0.5 {
        return 1.0;
    }
    let r = up_rate / (1.0 - up_rate);
    r.powi(depth as i32 - 1) / (1.0 - r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_state() -> TransitionModel<&'static str> {
        let mut m = TransitionModel::new(1, 0.0);
        m.add_transition(&"a", &"b", 0.5);
        m.add_transition(&"a", &"a", 0.5);
        m.add_transition(&"b", &"a", 0.5);
        m.add_transition(&"b", &"b", 0.5);
        m
    }

    #[test]
    fn symmetric_two_state_chain() {
        let m = two_state();
        let pi = solve_stationary(&m, 1e-12).unwrap();
        assert_abs_diff_eq!(pi.prob(&"a"), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pi.prob(&"b"), 0.5, epsilon = 1e-12);
        assert!(pi.residual <= 1e-12);
        assert_abs_diff_eq!(pi.total(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_reducible_chain() {
        let mut m = TransitionModel::new(1, 0.0);
        m.add_transition(&"a", &"a", 1.0);
        m.add_transition(&"b", &"b", 1.0);
        assert!(matches!(
            solve_stationary(&m, 1e-12),
            Err(ModelError::Structure(_))
        ));
    }

    #[test]
    fn rejects_nonstochastic_row() {
        let mut m = TransitionModel::new(1, 0.0);
        m.add_transition(&"a", &"b", 0.4);
        m.add_transition(&"b", &"a", 1.0);
        assert!(solve_stationary(&m, 1e-12).is_err());
    }

    #[test]
    fn tail_bound_examples() {
        // r = alpha / (1 - alpha) governs the level decay.
        assert!(truncation_tail_bound_raw(0.3, 60) < 1e-20);
        assert!(truncation_tail_bound_raw(0.45, 80) < 1e-5);
        assert_eq!(truncation_tail_bound_raw(0.0, 10), 0.0);
        assert_eq!(truncation_tail_bound_raw(0.6, 10), 1.0);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let m = two_state();
        assert!(solve_stationary(&m, 0.0).is_err());
        assert!(solve_stationary(&m, -1.0).is_err());
    }
}
