//! Tabular learner: empirical model, optimistic/pessimistic goal-conditioned
//! tables with Bernstein-style bonuses, and error functions bounding the gap
//! of the greedy policies.

mod model;
mod tables;

pub use model::EmpiricalModel;
pub use tables::{prepare, rebuild_tables, BonusParams, Layer, OptimisticTables, PairRow, Prepared};

use crate::episode::{run_loop, GoalLearner, LoopConfig, RunOutcome, Transition};
use crate::mdp::{NonStationaryPolicy, RngStream, TabularMdp};
use crate::samplers::GoalSampler;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("epsilon = {0} outside (0, 1]")]
    Epsilon(f64),
    #[error("delta = {0} outside (0, 1)")]
    Delta(f64),
    #[error("L = {0} must be at least 1")]
    Radius(f64),
    #[error("goal state {0} out of range")]
    Goal(usize),
    #[error("the environment has no reset action")]
    NoReset,
    #[error("{0}")]
    Other(String),
}

/// `H = ceil(5 (L+2) log(10 (L+2) / ε) / log 2)`.
pub fn horizon_for(l: f64, eps: f64) -> Result<usize, ConfigError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(ConfigError::Epsilon(eps));
    }
    if l < 1.0 || l.is_nan() {
        return Err(ConfigError::Radius(l));
    }
    let x = 5.0 * (l + 2.0) * (10.0 * (l + 2.0) / eps).ln() / std::f64::consts::LN_2;
    Ok(x.ceil() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaGoalConfig {
    pub l: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Overrides the derived horizon.
    pub horizon: Option<usize>,
    /// Defaults to every state.
    pub goal_space: Option<Vec<usize>>,
    pub max_episodes: usize,
    /// Episodes between table rebuilds.
    pub table_update_period: usize,
    pub simplified_bonuses: bool,
    pub run_to_cap: bool,
    pub buckets: usize,
}

impl Default for AdaGoalConfig {
    fn default() -> Self {
        AdaGoalConfig {
            l: 10.0,
            epsilon: 0.5,
            delta: 0.1,
            horizon: None,
            goal_space: None,
            max_episodes: 100_000,
            table_update_period: 1,
            simplified_bonuses: false,
            run_to_cap: false,
            buckets: 3,
        }
    }
}

impl AdaGoalConfig {
    pub fn validate(&self, num_states: usize) -> Result<(), ConfigError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(ConfigError::Epsilon(self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::Delta(self.delta));
        }
        if self.l < 1.0 || self.l.is_nan() {
            return Err(ConfigError::Radius(self.l));
        }
        if let Some(gs) = &self.goal_space {
            if let Some(&g) = gs.iter().find(|&&g| g >= num_states) {
                return Err(ConfigError::Goal(g));
            }
            if gs.is_empty() {
                return Err(ConfigError::Other("empty goal space".into()));
            }
        }
        if self.table_update_period == 0 {
            return Err(ConfigError::Other("table_update_period must be positive".into()));
        }
        if self.horizon == Some(0) {
            return Err(ConfigError::Other("horizon override must be positive".into()));
        }
        Ok(())
    }

    pub fn effective_horizon(&self) -> Result<usize, ConfigError> {
        match self.horizon {
            Some(h) => Ok(h),
            None => horizon_for(self.l, self.epsilon),
        }
    }

    /// Sorted, deduplicated goal space.
    pub fn goals(&self, num_states: usize) -> Vec<usize> {
        let mut g = self.goal_space.clone().unwrap_or_else(|| (0..num_states).collect());
        g.sort_unstable();
        g.dedup();
        g
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            l: self.l,
            epsilon: self.epsilon,
            max_episodes: self.max_episodes,
            run_to_cap: self.run_to_cap,
            buckets: self.buckets,
        }
    }
}

pub struct TabularLearner {
    start: usize,
    goals: Vec<usize>,
    bonus: BonusParams,
    model: EmpiricalModel,
    tables: Vec<OptimisticTables>,
    update_period: usize,
    pending: usize,
}

impl TabularLearner {
    pub fn new(mdp: &TabularMdp, cfg: &AdaGoalConfig) -> Result<Self, ConfigError> {
        cfg.validate(mdp.num_states())?;
        if mdp.reset_action().is_none() {
            return Err(ConfigError::NoReset);
        }
        let horizon = cfg.effective_horizon()?;
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let goals = cfg.goals(ns);
        let tables = goals.iter().map(|&g| OptimisticTables::initial(g, ns, na, horizon)).collect();
        Ok(TabularLearner {
            start: mdp.start(),
            goals,
            bonus: BonusParams {
                num_states: ns,
                num_actions: na,
                horizon,
                delta: cfg.delta,
                simplified: cfg.simplified_bonuses,
            },
            model: EmpiricalModel::new(ns, na),
            tables,
            update_period: cfg.table_update_period,
            pending: 0,
        })
    }

    pub fn model(&self) -> &EmpiricalModel {
        &self.model
    }

    pub fn tables(&self, goal_idx: usize) -> &OptimisticTables {
        &self.tables[goal_idx]
    }

    pub fn bonus(&self) -> &BonusParams {
        &self.bonus
    }

    pub fn rebuild(&mut self) {
        let prep = prepare(&self.model, &self.bonus);
        for (t, &g) in self.tables.iter_mut().zip(&self.goals) {
            *t = rebuild_tables(&prep, g);
        }
    }
}

impl GoalLearner for TabularLearner {
    fn goal_space(&self) -> &[usize] {
        &self.goals
    }

    fn horizon(&self) -> usize {
        self.bonus.horizon
    }

    fn distance(&self, goal_idx: usize) -> f64 {
        self.tables[goal_idx].distance(self.start)
    }

    fn raw_error(&self, goal_idx: usize) -> f64 {
        self.tables[goal_idx].raw_error(self.start)
    }

    fn action(&self, goal_idx: usize, h: usize, s: usize) -> usize {
        self.tables[goal_idx].greedy_action(h, s)
    }

    fn observe_episode(&mut self, _goal_idx: usize, _episode: usize, trajectory: &[Transition]) {
        for t in trajectory {
            self.model.record_transition(t.s, t.a, t.next);
        }
        self.pending += 1;
        if self.pending >= self.update_period {
            self.pending = 0;
            self.rebuild();
        }
    }

    fn greedy_policy(&self, goal_idx: usize) -> NonStationaryPolicy {
        self.tables[goal_idx].greedy_policy()
    }
}

/// Full tabular run; `observer` sees the learner after every episode.
pub fn run_with_observer(
    mdp: &TabularMdp,
    cfg: &AdaGoalConfig,
    sampler: &GoalSampler,
    rng: &mut RngStream,
    observer: impl FnMut(usize, &TabularLearner),
) -> Result<RunOutcome, ConfigError> {
    let mut learner = TabularLearner::new(mdp, cfg)?;
    Ok(run_loop(mdp, &mut learner, &cfg.loop_config(), sampler, rng, observer))
}

pub fn run(
    mdp: &TabularMdp,
    cfg: &AdaGoalConfig,
    sampler: &GoalSampler,
    rng: &mut RngStream,
) -> Result<RunOutcome, ConfigError> {
    run_with_observer(mdp, cfg, sampler, rng, |_, _| {})
}
