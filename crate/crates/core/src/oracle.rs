//! Exact planning: finite-horizon and shortest-path optimal values, policy
//! evaluation, reachable sets and the PAC verdict for learned outputs.

use crate::mdp::{GoalAbsorbedView, NonStationaryPolicy, ResettingPolicy, TabularMdp};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

/// Values above this are treated as unreachable.
pub const V_MAX: f64 = 1e9;
/// Absolute tolerance on `V* <= L` comparisons.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Failure probabilities this close to 1 make a resetting policy unbounded.
pub const UNBOUNDED_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteHorizonValues {
    pub goal: usize,
    pub horizon: usize,
    /// `values[h - 1][s]` for `h = 1..=H+1`
    pub values: Vec<Vec<f64>>,
    pub policy: NonStationaryPolicy,
}

impl FiniteHorizonValues {
    pub fn value(&self, h: usize, s: usize) -> f64 {
        self.values[h - 1][s]
    }
}

/// Backward induction in the goal-absorbed model truncated at `H` steps.
pub fn finite_horizon_optimal(mdp: &TabularMdp, g: usize, horizon: usize) -> FiniteHorizonValues {
    let n = mdp.num_states();
    let mut values = vec![vec![0.0; n]; horizon + 1];
    let mut actions = vec![vec![0usize; n]; horizon];
    for h in (0..horizon).rev() {
        for s in 0..n {
            if s == g {
                continue;
            }
            let (mut best, mut best_a) = (f64::INFINITY, 0);
            for a in 0..mdp.num_actions() {
                let q = 1.0 + mdp.apply(&values[h + 1], s, a);
                if q < best {
                    best = q;
                    best_a = a;
                }
            }
            values[h][s] = best;
            actions[h][s] = best_a;
        }
    }
    FiniteHorizonValues { goal: g, horizon, values, policy: NonStationaryPolicy { horizon, actions } }
}

/// Exact value table of a non-stationary policy in the truncated model.
pub fn policy_finite_horizon_values(
    mdp: &TabularMdp,
    g: usize,
    policy: &NonStationaryPolicy,
) -> Vec<Vec<f64>> {
    let n = mdp.num_states();
    let horizon = policy.horizon;
    let mut values = vec![vec![0.0; n]; horizon + 1];
    for h in (0..horizon).rev() {
        for s in 0..n {
            if s != g {
                values[h][s] = 1.0 + mdp.apply(&values[h + 1], s, policy.actions[h][s]);
            }
        }
    }
    values
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SspValues {
    pub goal: usize,
    /// Expected steps to the goal; flagged entries hold `V_MAX`.
    pub values: Vec<f64>,
    pub unreachable: Vec<bool>,
    /// Optimal stationary action per state (arbitrary where unreachable).
    pub policy: Vec<usize>,
    pub tolerance: f64,
    /// Improvement steps that fell back to value iteration.
    pub fallbacks: usize,
}

impl SspValues {
    pub fn value(&self, s: usize) -> Option<f64> {
        if self.unreachable[s] {
            None
        } else {
            Some(self.values[s])
        }
    }
}

// States with a positive-probability path to `g`, and their hop distance.
fn hop_distances(mdp: &TabularMdp, g: usize) -> Vec<Option<usize>> {
    let n = mdp.num_states();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for a in 0..mdp.num_actions() {
            for (t, &p) in mdp.row(s, a).iter().enumerate() {
                if p > 0.0 && t != s {
                    preds[t].push(s);
                }
            }
        }
    }
    let mut dist = vec![None; n];
    dist[g] = Some(0);
    let mut queue = VecDeque::from([g]);
    while let Some(t) = queue.pop_front() {
        let d = dist[t].unwrap();
        for &s in &preds[t] {
            if dist[s].is_none() {
                dist[s] = Some(d + 1);
                queue.push_back(s);
            }
        }
    }
    dist
}

/// Solve `(I - P_pi) V = 1` on `states`, other entries of `v` fixed.
fn evaluate_stationary(
    mdp: &TabularMdp,
    g: usize,
    states: &[usize],
    policy: &[usize],
) -> Option<Vec<f64>> {
    let n = mdp.num_states();
    let m = states.len();
    if m == 0 {
        return Some(vec![0.0; n]);
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in states.iter().enumerate() {
        pos[s] = i;
    }
    let mut a_mat = DMatrix::<f64>::identity(m, m);
    for (i, &s) in states.iter().enumerate() {
        for (t, &p) in mdp.row(s, policy[s]).iter().enumerate() {
            if p == 0.0 || t == g {
                continue;
            }
            if pos[t] == usize::MAX {
                // leaks to a state that cannot reach the goal
                return None;
            }
            a_mat[(i, pos[t])] -= p;
        }
    }
    let b = DVector::<f64>::from_element(m, 1.0);
    let x = a_mat.lu().solve(&b)?;
    let mut v = vec![0.0; n];
    for (i, &s) in states.iter().enumerate() {
        if !x[i].is_finite() || x[i] < 0.0 {
            return None;
        }
        v[s] = x[i];
    }
    Some(v)
}

/// Plain value iteration on the goal-absorbed model, starting from `init`.
/// Used as a fallback and as an independent cross-check.
pub fn ssp_value_iteration(mdp: &TabularMdp, g: usize, iters: usize, init: Option<Vec<f64>>) -> Vec<f64> {
    let n = mdp.num_states();
    let support = mdp.support();
    let na = mdp.num_actions();
    let mut v = init.unwrap_or_else(|| vec![0.0; n]);
    v[g] = 0.0;
    let mut next = v.clone();
    for _ in 0..iters {
        let mut changed = false;
        for s in 0..n {
            if s == g {
                continue;
            }
            let mut best = f64::INFINITY;
            for a in 0..na {
                let q = 1.0 + support[s * na + a].iter().map(|&(t, p)| p * v[t]).sum::<f64>();
                if q < best {
                    best = q;
                }
            }
            if best != v[s] {
                changed = true;
            }
            next[s] = best;
        }
        std::mem::swap(&mut v, &mut next);
        if !changed {
            break;
        }
    }
    v
}

/// Exact shortest-path values to `g` by policy iteration with direct linear
/// solves, starting from a proper policy built on the hop-distance tree.
pub fn ssp_optimal(mdp: &TabularMdp, g: usize) -> SspValues {
    let n = mdp.num_states();
    let na = mdp.num_actions();
    let dist = hop_distances(mdp, g);
    let mut unreachable: Vec<bool> = dist.iter().map(|d| d.is_none()).collect();
    let states: Vec<usize> = (0..n).filter(|&s| s != g && dist[s].is_some()).collect();

    let mut policy = vec![0usize; n];
    for &s in &states {
        let d = dist[s].unwrap();
        policy[s] = (0..na)
            .find(|&a| {
                mdp.row(s, a)
                    .iter()
                    .enumerate()
                    .any(|(t, &p)| p > 0.0 && dist[t] == Some(d - 1))
            })
            .unwrap_or(0);
    }

    let mut v = vec![0.0; n];
    let mut fallbacks = 0;
    for _ in 0..10_000 {
        match evaluate_stationary(mdp, g, &states, &policy) {
            Some(x) => v = x,
            None => {
                fallbacks += 1;
                v = ssp_value_iteration(mdp, g, 1_000_000, Some(v));
            }
        }
        let mut stable = true;
        for &s in &states {
            let q = |a: usize| -> f64 {
                let mut acc = 1.0;
                for (t, &p) in mdp.row(s, a).iter().enumerate() {
                    if p > 0.0 {
                        if unreachable[t] {
                            return f64::INFINITY;
                        }
                        acc += p * v[t];
                    }
                }
                acc
            };
            let current = q(policy[s]);
            let (mut best, mut best_a) = (current, policy[s]);
            for a in 0..na {
                let qa = q(a);
                if qa < best {
                    best = qa;
                    best_a = a;
                }
            }
            if best < current - 1e-12 * current.max(1.0) {
                policy[s] = best_a;
                stable = false;
            }
        }
        if stable {
            break;
        }
    }
    for s in 0..n {
        if unreachable[s] || v[s] > V_MAX {
            unreachable[s] = true;
            v[s] = V_MAX;
        }
    }
    SspValues { goal: g, values: v, unreachable, policy, tolerance: 1e-9, fallbacks }
}

/// Goals whose shortest-path distance from the start state is at most
/// `l + slack` (with a 1e-9 absolute tolerance).
pub fn reachable_set(mdp: &TabularMdp, goal_space: &[usize], l: f64, slack: f64) -> Vec<usize> {
    goal_space
        .iter()
        .copied()
        .filter(|&g| {
            ssp_optimal(mdp, g)
                .value(mdp.start())
                .is_some_and(|v| v <= l + slack + MEMBERSHIP_TOL)
        })
        .collect()
}

/// Same as [`reachable_set`] with precomputed start-state distances.
pub fn reachable_from_distances(distances: &BTreeMap<usize, Option<f64>>, l: f64) -> Vec<usize> {
    distances
        .iter()
        .filter(|(_, v)| v.is_some_and(|v| v <= l + MEMBERSHIP_TOL))
        .map(|(g, _)| *g)
        .collect()
}

/// Truncated-model statistics of a policy started at `s0`: the expected
/// number of off-goal steps among the `H` steps and the probability of not
/// being at the goal after them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedStats {
    pub cost: f64,
    pub fail_prob: f64,
}

pub fn truncated_stats(mdp: &TabularMdp, g: usize, policy: &NonStationaryPolicy) -> TruncatedStats {
    let n = mdp.num_states();
    let view = GoalAbsorbedView { base: mdp, goal: g };
    let mut dist = vec![0.0; n];
    dist[mdp.start()] = 1.0;
    let mut cost = 0.0;
    let mut next = vec![0.0; n];
    for h in 1..=policy.horizon {
        cost += 1.0 - dist[g];
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n {
            let m = dist[s];
            if m == 0.0 {
                continue;
            }
            let a = policy.action(h, s);
            if s == g {
                next[g] += m;
                continue;
            }
            for (t, &p) in view.base.row(s, a).iter().enumerate() {
                next[t] += m * p;
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    TruncatedStats { cost, fail_prob: (1.0 - dist[g]).max(0.0) }
}

/// Probability that the state after `H` policy steps is not the goal.
pub fn reach_failure_prob(mdp: &TabularMdp, g: usize, policy: &NonStationaryPolicy) -> f64 {
    truncated_stats(mdp, g, policy).fail_prob
}

/// Expected steps to the goal under the resetting extension, `None` when the
/// goal is never reached.
pub fn evaluate_resetting_policy(mdp: &TabularMdp, g: usize, policy: &ResettingPolicy) -> Option<f64> {
    let st = truncated_stats(mdp, g, &policy.inner);
    if st.fail_prob >= 1.0 - UNBOUNDED_TOL {
        return None;
    }
    Some((st.cost + st.fail_prob) / (1.0 - st.fail_prob))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacVerdict {
    /// Per goal in the output set: policy within `ε` of optimal.
    pub c1_holds: BTreeMap<usize, bool>,
    /// `G_L ⊆ X ⊆ G_{L+ε}`
    pub c2_holds: bool,
    /// Policy value minus optimal value; `None` when unbounded or missing.
    pub gaps: BTreeMap<usize, Option<f64>>,
    /// Members of `G_L` absent from the output.
    pub missing: Vec<usize>,
    /// Output members outside `G_{L+ε}`.
    pub spurious: Vec<usize>,
    pub verdict: bool,
}

/// Check both PAC conditions for an output set and its policies.
pub fn verify_pac(
    mdp: &TabularMdp,
    goal_space: &[usize],
    l: f64,
    eps: f64,
    output: &[usize],
    policies: &BTreeMap<usize, ResettingPolicy>,
) -> PacVerdict {
    let n = mdp.num_states();
    let mut distances: BTreeMap<usize, Option<f64>> = BTreeMap::new();
    let mut dist_of = |g: usize| -> Option<f64> {
        *distances.entry(g).or_insert_with(|| ssp_optimal(mdp, g).value(mdp.start()))
    };
    let mut c1_holds = BTreeMap::new();
    let mut gaps = BTreeMap::new();
    let mut spurious = Vec::new();
    for &g in output {
        if g >= n {
            c1_holds.insert(g, false);
            gaps.insert(g, None);
            spurious.push(g);
            continue;
        }
        let optimal = dist_of(g);
        let gap = match (policies.get(&g), optimal) {
            (Some(p), Some(v)) => evaluate_resetting_policy(mdp, g, p).map(|pv| pv - v),
            _ => None,
        };
        c1_holds.insert(g, gap.is_some_and(|x| x <= eps + MEMBERSHIP_TOL));
        gaps.insert(g, gap);
        if !optimal.is_some_and(|v| v <= l + eps + MEMBERSHIP_TOL) {
            spurious.push(g);
        }
    }
    let mut missing = Vec::new();
    for &g in goal_space {
        if dist_of(g).is_some_and(|v| v <= l + MEMBERSHIP_TOL) && !output.contains(&g) {
            missing.push(g);
        }
    }
    let c2_holds = missing.is_empty() && spurious.is_empty();
    let verdict = c2_holds && c1_holds.values().all(|&b| b);
    PacVerdict { c1_holds, c2_holds, gaps, missing, spurious, verdict }
}
