//! Episode loop shared by the tabular and linear learners: goal selection,
//! one horizon of greedy play followed by a reset, model update, stopping.

use crate::mdp::{sample_step, NonStationaryPolicy, ResettingPolicy, RngStream, TabularMdp};
use crate::samplers::{GoalSampler, SamplerInput};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub next: usize,
}

/// What the loop needs from a learner. Goals are addressed by their index in
/// the goal space.
pub trait GoalLearner {
    fn goal_space(&self) -> &[usize];
    fn horizon(&self) -> usize;
    /// Current distance estimate `D(g)`.
    fn distance(&self, goal_idx: usize) -> f64;
    /// Current error bound at the start state, before the `8ε/9` offset.
    fn raw_error(&self, goal_idx: usize) -> f64;
    /// Greedy action at step `h` (1-based).
    fn action(&self, goal_idx: usize, h: usize, s: usize) -> usize;
    /// Consume one finished episode played for `goal_idx` and refresh.
    fn observe_episode(&mut self, goal_idx: usize, episode: usize, trajectory: &[Transition]);
    fn greedy_policy(&self, goal_idx: usize) -> NonStationaryPolicy;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub l: f64,
    pub epsilon: f64,
    pub max_episodes: usize,
    /// Keep playing until the cap even after the stopping rule fires.
    pub run_to_cap: bool,
    pub buckets: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppedBy {
    Rule,
    Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub k: usize,
    pub goal: usize,
    pub d: f64,
    pub e: f64,
    /// Environment steps after this episode, reset included.
    pub steps: u64,
}

/// Goal-selection counts per episode bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalFrequencyLog {
    pub goals: Vec<usize>,
    /// Half-open episode ranges `[start, end)`, 0-based.
    pub bounds: Vec<(usize, usize)>,
    /// `counts[goal_row][bucket]`
    pub counts: Vec<Vec<u64>>,
}

impl GoalFrequencyLog {
    /// Split `history` (goal per episode) into `buckets` contiguous ranges
    /// with boundaries `ceil(j * n / buckets)`.
    pub fn from_history(goals: &[usize], history: &[usize], buckets: usize) -> Self {
        let n = history.len();
        let b = buckets.max(1);
        let cut = |j: usize| (j * n).div_ceil(b);
        let bounds: Vec<(usize, usize)> = (0..b).map(|j| (cut(j), cut(j + 1))).collect();
        let row: BTreeMap<usize, usize> = goals.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let mut counts = vec![vec![0u64; b]; goals.len()];
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            for &g in &history[lo..hi] {
                if let Some(&r) = row.get(&g) {
                    counts[r][j] += 1;
                }
            }
        }
        GoalFrequencyLog { goals: goals.to_vec(), bounds, counts }
    }

    pub fn bucket_total(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Selections of any of `states` in bucket `j`.
    pub fn share(&self, states: &[usize], j: usize) -> f64 {
        let hits: u64 = self
            .goals
            .iter()
            .zip(&self.counts)
            .filter(|(g, _)| states.contains(g))
            .map(|(_, r)| r[j])
            .sum();
        hits as f64 / self.bucket_total(j).max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("goal_state");
        for j in 0..self.bounds.len() {
            out.push_str(&format!(",bucket_{j}"));
        }
        out.push('\n');
        for (g, row) in self.goals.iter().zip(&self.counts) {
            out.push_str(&g.to_string());
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub horizon: usize,
    /// Episode index at which the loop stopped.
    pub kappa: usize,
    pub tau: u64,
    pub stopped_by: StoppedBy,
    /// First episode index at which the stopping rule held.
    pub rule_met_at: Option<usize>,
    pub x: Vec<usize>,
    pub d: BTreeMap<usize, f64>,
    pub e: BTreeMap<usize, f64>,
    pub policies: BTreeMap<usize, ResettingPolicy>,
    pub history: Vec<usize>,
    pub records: Vec<EpisodeRecord>,
}

impl RunOutcome {
    pub fn frequencies(&self, goal_space: &[usize], buckets: usize) -> GoalFrequencyLog {
        GoalFrequencyLog::from_history(goal_space, &self.history, buckets)
    }
}

/// Drive `learner` until the stopping rule (or the cap). `observer` sees the
/// learner after every refresh together with the episode index.
pub fn run_loop<L: GoalLearner>(
    mdp: &TabularMdp,
    learner: &mut L,
    cfg: &LoopConfig,
    sampler: &GoalSampler,
    rng: &mut RngStream,
    mut observer: impl FnMut(usize, &L),
) -> RunOutcome {
    let reset = mdp.reset_action().expect("learners require a reset action");
    let horizon = learner.horizon();
    let goals = learner.goal_space().to_vec();
    let offset = 8.0 * cfg.epsilon / 9.0;
    let mut visits = vec![0u64; mdp.num_states()];
    let mut history = Vec::new();
    let mut records = Vec::new();
    let mut tau = 0u64;
    let mut rule_met_at = None;
    let mut k = 1;
    let mut trajectory = Vec::with_capacity(horizon);
    let (stopped_by, d, e) = loop {
        let d: Vec<f64> = (0..goals.len()).map(|i| learner.distance(i)).collect();
        let e: Vec<f64> = (0..goals.len()).map(|i| learner.raw_error(i) + offset).collect();
        let worst = (0..goals.len())
            .filter(|&i| d[i] <= cfg.l)
            .map(|i| e[i])
            .fold(f64::NEG_INFINITY, f64::max);
        if worst <= cfg.epsilon && rule_met_at.is_none() {
            rule_met_at = Some(k);
        }
        if worst <= cfg.epsilon && !cfg.run_to_cap {
            break (StoppedBy::Rule, d, e);
        }
        if k > cfg.max_episodes {
            break (StoppedBy::Cap, d, e);
        }
        let input = SamplerInput { goal_space: &goals, start: mdp.start(), d: &d, e: &e, visits: &visits, l: cfg.l };
        let gi = sampler.select(&input, rng);
        let goal = goals[gi];

        trajectory.clear();
        let mut s = mdp.start();
        for h in 1..=horizon {
            let a = learner.action(gi, h, s);
            let next = sample_step(mdp, s, a, rng);
            visits[s] += 1;
            trajectory.push(Transition { s, a, next });
            s = next;
        }
        tau += horizon as u64 + 1;
        learner.observe_episode(gi, k, &trajectory);
        observer(k, learner);
        records.push(EpisodeRecord { k, goal, d: d[gi], e: e[gi], steps: tau });
        history.push(goal);
        k += 1;
    };

    let x: Vec<usize> = (0..goals.len()).filter(|&i| d[i] <= cfg.l).map(|i| goals[i]).collect();
    let policies = (0..goals.len())
        .filter(|&i| d[i] <= cfg.l)
        .map(|i| (goals[i], ResettingPolicy { inner: learner.greedy_policy(i), reset_action: reset }))
        .collect();
    RunOutcome {
        horizon,
        kappa: k,
        tau,
        stopped_by,
        rule_met_at,
        x,
        d: goals.iter().copied().zip(d).collect(),
        e: goals.iter().copied().zip(e).collect(),
        policies,
        history,
        records,
    }
}
