#![allow(dead_code)]

use adagoal::mdp::{sample_step, NonStationaryPolicy, ResettingPolicy};
use adagoal::{RngStream, TabularMdp};

/// Random MDP. Each row keeps every successor with probability `density`
/// (at least one survives). With `reset`, an extra last action returns to
/// state 0.
pub fn random_mdp(rng: &mut RngStream, n: usize, na: usize, reset: bool, density: f64) -> TabularMdp {
    let total = if reset { na + 1 } else { na };
    let mut p = vec![vec![vec![0.0; n]; total]; n];
    for row_s in p.iter_mut() {
        for (a, row) in row_s.iter_mut().enumerate() {
            if reset && a == na {
                row[0] = 1.0;
                continue;
            }
            loop {
                for x in row.iter_mut() {
                    *x = if rng.uniform() < density { rng.uniform() + 0.05 } else { 0.0 };
                }
                if row.iter().any(|&x| x > 0.0) {
                    break;
                }
            }
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= z);
        }
    }
    TabularMdp::from_nested(n, total, 0, reset.then_some(na), &p).expect("valid random mdp")
}

pub fn random_policy(rng: &mut RngStream, horizon: usize, n: usize, na: usize) -> NonStationaryPolicy {
    NonStationaryPolicy {
        horizon,
        actions: (0..horizon).map(|_| (0..n).map(|_| rng.below(na)).collect()).collect(),
    }
}

/// Value of a fixed policy in the goal-absorbed, `H`-truncated model from
/// every start state, by plain backward evaluation with dense rows.
pub fn evaluate_policy(mdp: &TabularMdp, g: usize, actions: &[Vec<usize>]) -> Vec<f64> {
    let n = mdp.num_states();
    let mut v = vec![0.0; n];
    for rule in actions.iter().rev() {
        let mut next = vec![0.0; n];
        for s in 0..n {
            if s == g {
                continue;
            }
            let mut acc = 1.0;
            for t in 0..n {
                acc += mdp.prob(s, rule[s], t) * v[t];
            }
            next[s] = acc;
        }
        v = next;
    }
    v
}

/// Minimum over every deterministic non-stationary policy of its truncated
/// value, per start state. Policies differing only at the goal are skipped.
pub fn brute_force_optimal(mdp: &TabularMdp, g: usize, horizon: usize) -> Vec<f64> {
    let n = mdp.num_states();
    let na = mdp.num_actions();
    let free: Vec<usize> = (0..n).filter(|&s| s != g).collect();
    let rules = na.pow(free.len() as u32);
    let total = rules.pow(horizon as u32);
    let mut best = vec![f64::INFINITY; n];
    let mut actions = vec![vec![0usize; n]; horizon];
    for idx in 0..total {
        let mut code = idx;
        for rule in actions.iter_mut() {
            let mut r = code % rules;
            code /= rules;
            for &s in &free {
                rule[s] = r % na;
                r /= na;
            }
        }
        let v = evaluate_policy(mdp, g, &actions);
        for s in 0..n {
            best[s] = best[s].min(v[s]);
        }
    }
    best[g] = 0.0;
    best
}

/// Steps until `g` under a resetting policy, `None` past `cap`.
pub fn rollout_resetting(mdp: &TabularMdp, g: usize, policy: &ResettingPolicy, rng: &mut RngStream, cap: u64) -> Option<u64> {
    let mut s = mdp.start();
    let mut i = 0u64;
    while s != g {
        if i >= cap {
            return None;
        }
        i += 1;
        s = sample_step(mdp, s, policy.action(i as usize, s), rng);
    }
    Some(i)
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Probability mass off the goal and expected truncated cost of a horizon
/// policy from `start`, by forward propagation over sparse supports.
pub fn forward_cost(mdp: &TabularMdp, support: &[Vec<(usize, f64)>], g: usize, horizon: usize, start: usize, action: impl Fn(usize, usize) -> usize) -> f64 {
    let na = mdp.num_actions();
    let mut mass: Vec<(usize, f64)> = vec![(start, 1.0)];
    let mut cost = 0.0;
    let mut acc = vec![0.0; mdp.num_states()];
    for h in 1..=horizon {
        mass.retain(|&(s, m)| s != g && m > 0.0);
        if mass.is_empty() {
            break;
        }
        cost += mass.iter().map(|&(_, m)| m).sum::<f64>();
        for &(s, m) in &mass {
            for &(t, p) in &support[s * na + action(h, s)] {
                acc[t] += m * p;
            }
        }
        mass.clear();
        for (t, x) in acc.iter_mut().enumerate() {
            if *x > 0.0 {
                mass.push((t, *x));
                *x = 0.0;
            }
        }
    }
    cost
}
