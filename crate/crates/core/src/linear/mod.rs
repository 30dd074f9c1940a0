//! Linear-mixture learner: augmented goal features, value- and error-targeted
//! ridge regressions with confidence ellipsoids, and the optimistic Q/V/U
//! recursions built on them.

mod regress;

pub use regress::{GoalRegressors, RegressionError, Ridge};

use crate::episode::{run_loop, GoalLearner, RunOutcome, Transition};
use crate::mdp::{NonStationaryPolicy, RngStream, TabularMdp};
use crate::samplers::GoalSampler;
use crate::tabular::{AdaGoalConfig, ConfigError};
use serde::{Deserialize, Serialize};

/// Transition kernel `p(s'|s,a) = Σ_i φ_i(s'|s,a) θ*_i` over `d` basis
/// measures, together with the realized tabular kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMixtureModel {
    pub d: usize,
    pub num_states: usize,
    pub num_actions: usize,
    /// `basis[i][(s * A + a) * S + s']`
    pub basis: Vec<Vec<f64>>,
    pub theta_star: Vec<f64>,
    /// Norm bound on `theta_star`.
    pub b_norm: f64,
    /// Factor the basis was divided by to bound feature norms.
    pub rescale: f64,
    pub mdp: TabularMdp,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct MixtureJson {
    d: usize,
    B: f64,
    theta_star: Vec<f64>,
    basis: Vec<Vec<Vec<Vec<f64>>>>,
    rescale: f64,
    mdp: TabularMdp,
}

impl Serialize for LinearMixtureModel {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let (n, na) = (self.num_states, self.num_actions);
        let basis = self
            .basis
            .iter()
            .map(|b| {
                (0..n)
                    .map(|s| (0..na).map(|a| b[(s * na + a) * n..(s * na + a + 1) * n].to_vec()).collect())
                    .collect()
            })
            .collect();
        MixtureJson {
            d: self.d,
            B: self.b_norm,
            theta_star: self.theta_star.clone(),
            basis,
            rescale: self.rescale,
            mdp: self.mdp.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for LinearMixtureModel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let j = MixtureJson::deserialize(de)?;
        let (n, na) = (j.mdp.num_states(), j.mdp.num_actions());
        if j.basis.len() != j.d || j.theta_star.len() != j.d {
            return Err(D::Error::custom("basis / theta_star length differs from d"));
        }
        let mut basis = Vec::with_capacity(j.d);
        for b in &j.basis {
            let flat: Vec<f64> = b.iter().flatten().flatten().copied().collect();
            if flat.len() != n * na * n {
                return Err(D::Error::custom("basis shape does not match the embedded MDP"));
            }
            basis.push(flat);
        }
        let m = LinearMixtureModel {
            d: j.d,
            num_states: n,
            num_actions: na,
            basis,
            theta_star: j.theta_star,
            b_norm: j.B,
            rescale: j.rescale,
            mdp: j.mdp,
        };
        if m.max_kernel_error() > 1e-9 {
            return Err(D::Error::custom("mixture does not reproduce the embedded kernel"));
        }
        Ok(m)
    }
}

impl LinearMixtureModel {
    pub fn phi(&self, i: usize, s: usize, a: usize, next: usize) -> f64 {
        self.basis[i][(s * self.num_actions + a) * self.num_states + next]
    }

    /// Largest deviation between `⟨φ, θ*⟩` and the realized kernel.
    pub fn max_kernel_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for t in 0..self.num_states {
                    let p: f64 = (0..self.d).map(|i| self.phi(i, s, a, t) * self.theta_star[i]).sum();
                    worst = worst.max((p - self.mdp.prob(s, a, t)).abs());
                }
            }
        }
        worst
    }

    /// `θ*_g = (θ*; 1)`
    pub fn augmented_theta(&self) -> Vec<f64> {
        let mut t = self.theta_star.clone();
        t.push(1.0);
        t
    }
}

/// `β_k = H sqrt(d log(3 (1 + k H³ (B+1)²) / δ)) + 1`
pub fn confidence_radius(k: usize, d: usize, b: f64, h: usize, delta: f64) -> f64 {
    let hf = h as f64;
    let inner = 3.0 * (1.0 + k as f64 * hf.powi(3) * (b + 1.0).powi(2)) / delta;
    hf * (d as f64 * inner.ln()).sqrt() + 1.0
}

/// Augmented feature aggregate `ψ^g_V(s, a)` of length `d + 1`.
pub fn psi(model: &LinearMixtureModel, g: usize, value: &[f64], s: usize, a: usize) -> Vec<f64> {
    let mut out = vec![0.0; model.d + 1];
    if s == g {
        out[model.d] = value[g];
        return out;
    }
    let n = model.num_states;
    let base = (s * model.num_actions + a) * n;
    for (i, o) in out.iter_mut().take(model.d).enumerate() {
        *o = model.basis[i][base..base + n].iter().zip(value).map(|(p, v)| p * v).sum();
    }
    out
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `sqrt(xᵀ M x)` for a flat symmetric `M`.
fn quad_norm(m: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[i * n + j] * x[j];
        }
        acc += x[i] * row;
    }
    acc.max(0.0).sqrt()
}

/// One step layer of a goal's linear tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinLayer {
    /// `[s * A + a]`
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub pi: Vec<usize>,
}

/// Tables of one goal for steps `1..=H`; layers below `top` repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinTables {
    pub goal: usize,
    pub horizon: usize,
    top: usize,
    layers: Vec<LinLayer>,
    terminal: LinLayer,
}

impl LinTables {
    pub fn layer(&self, h: usize) -> &LinLayer {
        if h > self.horizon || self.layers.is_empty() {
            return &self.terminal;
        }
        let i = h.max(self.top) - self.top;
        &self.layers[i.min(self.layers.len() - 1)]
    }

    pub fn greedy_policy(&self) -> NonStationaryPolicy {
        NonStationaryPolicy {
            horizon: self.horizon,
            actions: (1..=self.horizon).map(|h| self.layer(h).pi.clone()).collect(),
        }
    }
}

/// Backward recursion for goal `g` with radius `beta`.
pub fn rebuild_lin_tables(
    model: &LinearMixtureModel,
    regs: &GoalRegressors,
    g: usize,
    horizon: usize,
    beta: f64,
) -> LinTables {
    let (ns, na) = (model.num_states, model.num_actions);
    let hf = horizon as f64;
    let zero = LinLayer { q: vec![0.0; ns * na], v: vec![0.0; ns], u: vec![0.0; ns], pi: vec![0; ns] };
    let theta = regs.value.theta();
    let theta_e = regs.error.theta();
    let inv = regs.value.inverse();
    let inv_e = regs.error.inverse();
    let mut stored: Vec<LinLayer> = Vec::new();
    let mut top = horizon + 1;
    for h in (1..=horizon).rev() {
        let next = stored.last().unwrap_or(&zero);
        let mut cur = zero.clone();
        let mut bonus_at = vec![0.0; na];
        for s in 0..ns {
            let cost = if s == g { 0.0 } else { 1.0 };
            for a in 0..na {
                let f = psi(model, g, &next.v, s, a);
                let b = beta * quad_norm(inv, &f);
                bonus_at[a] = b;
                cur.q[s * na + a] = (cost + dot(theta, &f) - b).clamp(0.0, hf);
            }
            let mut best = 0;
            for a in 1..na {
                if cur.q[s * na + a] < cur.q[s * na + best] {
                    best = a;
                }
            }
            cur.pi[s] = best;
            cur.v[s] = cur.q[s * na + best];
            let fu = psi(model, g, &next.u, s, best);
            cur.u[s] = (2.0 * bonus_at[best] + dot(&fu, theta_e) + beta * quad_norm(inv_e, &fu)).clamp(0.0, hf);
        }
        let settled = cur.v == next.v && cur.u == next.u;
        stored.push(cur);
        top = h;
        if settled {
            break;
        }
    }
    stored.reverse();
    LinTables { goal: g, horizon, top, layers: stored, terminal: zero }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearOptions {
    /// Multiplies the confidence radius; 1 is the theoretical choice.
    pub confidence_scale: f64,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { confidence_scale: 1.0 }
    }
}

pub struct LinearLearner<'m> {
    model: &'m LinearMixtureModel,
    goals: Vec<usize>,
    horizon: usize,
    delta: f64,
    opts: LinearOptions,
    lambda: f64,
    regs: Vec<GoalRegressors>,
    tables: Vec<LinTables>,
    /// Episode index the current tables are built for.
    k: usize,
    failure: Option<RegressionError>,
}

impl<'m> LinearLearner<'m> {
    pub fn new(model: &'m LinearMixtureModel, cfg: &AdaGoalConfig, opts: LinearOptions) -> Result<Self, ConfigError> {
        cfg.validate(model.num_states)?;
        if model.mdp.reset_action().is_none() {
            return Err(ConfigError::NoReset);
        }
        if !(opts.confidence_scale > 0.0) {
            return Err(ConfigError::Other("confidence_scale must be positive".into()));
        }
        let horizon = cfg.effective_horizon()?;
        let lambda = 1.0 / (model.b_norm + 1.0).powi(2);
        let goals = cfg.goals(model.num_states);
        let regs: Vec<GoalRegressors> = goals.iter().map(|_| GoalRegressors::new(model.d + 1, lambda)).collect();
        let mut l = LinearLearner {
            model,
            goals,
            horizon,
            delta: cfg.delta,
            opts,
            lambda,
            regs,
            tables: Vec::new(),
            k: 1,
            failure: None,
        };
        l.rebuild();
        Ok(l)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Unscaled radius for episode `k`.
    pub fn radius(&self, k: usize) -> f64 {
        confidence_radius(k, self.model.d, self.model.b_norm, self.horizon, self.delta)
    }

    /// Episode index the current tables serve.
    pub fn episode(&self) -> usize {
        self.k
    }

    pub fn regressors(&self, goal_idx: usize) -> &GoalRegressors {
        &self.regs[goal_idx]
    }

    pub fn tables(&self, goal_idx: usize) -> &LinTables {
        &self.tables[goal_idx]
    }

    pub fn failure(&self) -> Option<&RegressionError> {
        self.failure.as_ref()
    }

    fn rebuild(&mut self) {
        let beta = self.opts.confidence_scale * self.radius(self.k);
        self.tables = self
            .goals
            .iter()
            .zip(&self.regs)
            .map(|(&g, r)| rebuild_lin_tables(self.model, r, g, self.horizon, beta))
            .collect();
    }
}

impl GoalLearner for LinearLearner<'_> {
    fn goal_space(&self) -> &[usize] {
        &self.goals
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn distance(&self, goal_idx: usize) -> f64 {
        self.tables[goal_idx].layer(1).v[self.model.mdp.start()]
    }

    fn raw_error(&self, goal_idx: usize) -> f64 {
        self.tables[goal_idx].layer(1).u[self.model.mdp.start()]
    }

    fn action(&self, goal_idx: usize, h: usize, s: usize) -> usize {
        self.tables[goal_idx].layer(h).pi[s]
    }

    fn observe_episode(&mut self, _goal_idx: usize, _episode: usize, trajectory: &[Transition]) {
        for (gi, &g) in self.goals.iter().enumerate() {
            let tables = &self.tables[gi];
            let regs = &mut self.regs[gi];
            for (h0, t) in trajectory.iter().enumerate() {
                if t.s == g {
                    // absorbed step: zero context, nothing to learn
                    continue;
                }
                let layer = tables.layer(h0 + 1);
                let fv = psi(self.model, g, &layer.v, t.s, t.a);
                regs.value.push(&fv, layer.v[t.next]);
                let fu = psi(self.model, g, &layer.u, t.s, t.a);
                regs.error.push(&fu, layer.u[t.next]);
            }
            if let Err(e) = regs.refresh() {
                self.failure.get_or_insert(e);
            }
        }
        self.k += 1;
        self.rebuild();
    }

    fn greedy_policy(&self, goal_idx: usize) -> NonStationaryPolicy {
        self.tables[goal_idx].greedy_policy()
    }
}

pub fn run_linear_with_observer(
    model: &LinearMixtureModel,
    cfg: &AdaGoalConfig,
    opts: LinearOptions,
    sampler: &GoalSampler,
    rng: &mut RngStream,
    observer: impl FnMut(usize, &LinearLearner<'_>),
) -> Result<RunOutcome, ConfigError> {
    let mut learner = LinearLearner::new(model, cfg, opts)?;
    let out = run_loop(&model.mdp, &mut learner, &cfg.loop_config(), sampler, rng, observer);
    if let Some(e) = learner.failure() {
        return Err(ConfigError::Other(format!("regression failed: {e}")));
    }
    Ok(out)
}

pub fn run_linear(
    model: &LinearMixtureModel,
    cfg: &AdaGoalConfig,
    opts: LinearOptions,
    sampler: &GoalSampler,
    rng: &mut RngStream,
) -> Result<RunOutcome, ConfigError> {
    run_linear_with_observer(model, cfg, opts, sampler, rng, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{build_grid_mixture, MixtureParams};
    use crate::mdp::{goal_apply, GoalAbsorbedView};

    fn mixture() -> LinearMixtureModel {
        build_grid_mixture(&MixtureParams::default()).unwrap()
    }

    #[test]
    fn radius_examples() {
        let b1 = confidence_radius(1, 2, 1.0, 4, 0.1);
        let expect = 4.0 * (2.0 * (3.0 * (1.0 + 64.0 * 4.0) / 0.1f64).ln()).sqrt() + 1.0;
        assert!((b1 - expect).abs() < 1e-12);
        assert!(confidence_radius(2, 2, 1.0, 4, 0.1) > b1);
        assert!(confidence_radius(1, 2, 1.0, 4, 0.01) > b1);
    }

    #[test]
    fn psi_at_goal() {
        let m = mixture();
        let v = vec![0.3, 0.1, 0.2, 0.7, 0.9, 0.4];
        let f = psi(&m, 2, &v, 2, 1);
        assert_eq!(f, vec![0.0, 0.0, 0.2]);
    }

    #[test]
    fn psi_of_ones_gives_row_masses() {
        let m = mixture();
        let ones = vec![1.0; m.num_states];
        let f = psi(&m, 5, &ones, 0, 1);
        for (i, x) in f.iter().take(m.d).enumerate() {
            let mass: f64 = (0..m.num_states).map(|t| m.phi(i, 0, 1, t)).sum();
            assert!((x - mass).abs() < 1e-15);
        }
        assert!((dot(&f, &m.augmented_theta()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psi_matches_tabular_operator() {
        let m = mixture();
        let mut rng = RngStream::new(4, 0);
        for g in 0..m.num_states {
            let mut v: Vec<f64> = (0..m.num_states).map(|_| rng.uniform() * 5.0).collect();
            v[g] = 0.0;
            let view = GoalAbsorbedView::new(&m.mdp, g).unwrap();
            for s in 0..m.num_states {
                for a in 0..m.num_actions {
                    let lin = dot(&psi(&m, g, &v, s, a), &m.augmented_theta());
                    let tab = goal_apply(&view, &v, s, a).unwrap();
                    assert!((lin - tab).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn first_episode_tables() {
        let m = mixture();
        let cfg = AdaGoalConfig { l: 2.0, epsilon: 1.0, horizon: Some(6), ..Default::default() };
        let learner = LinearLearner::new(&m, &cfg, LinearOptions::default()).unwrap();
        let beta = learner.radius(1);
        let lam = learner.lambda();
        for gi in 0..m.num_states {
            let t = learner.tables(gi);
            let g = learner.goal_space()[gi];
            for h in 1..=6 {
                let next = t.layer(h + 1).v.clone();
                for s in 0..m.num_states {
                    for a in 0..m.num_actions {
                        let f = psi(&m, g, &next, s, a);
                        let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
                        let cost = if s == g { 0.0 } else { 1.0 };
                        let expect = (cost - beta * norm / lam.sqrt()).clamp(0.0, 6.0);
                        assert!((t.layer(h).q[s * m.num_actions + a] - expect).abs() < 1e-12);
                    }
                }
            }
            assert_eq!(t.layer(1).v[g], 0.0);
            assert_eq!(t.layer(1).u[g], 0.0);
        }
    }
}
