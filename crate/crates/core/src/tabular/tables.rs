use super::model::EmpiricalModel;
use serde::{Deserialize, Serialize};

/// Confidence thresholds of the tabular learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonusParams {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub delta: f64,
    pub simplified: bool,
}

impl BonusParams {
    fn log_term(&self) -> f64 {
        let (s, a, h) = (self.num_states as f64, self.num_actions as f64, self.horizon as f64);
        (3.0 * s * s * a * h / self.delta).ln()
    }

    /// `log(3 S² A H / δ) + S log(8e(n+1))`
    pub fn beta(&self, n: u64) -> f64 {
        self.log_term() + self.num_states as f64 * (8.0 * std::f64::consts::E * (n as f64 + 1.0)).ln()
    }

    /// `log(3 S² A H / δ) + log(8e(n+1))`
    pub fn beta_star(&self, n: u64) -> f64 {
        self.log_term() + (8.0 * std::f64::consts::E * (n as f64 + 1.0)).ln()
    }

    /// Single log-scale threshold of the simplified bonuses:
    /// `log(1/δ) + log(n+1)`.
    pub fn beta_hat(&self, n: u64) -> f64 {
        (1.0 / self.delta).ln() + (n as f64 + 1.0).ln()
    }
}

/// Per-pair quantities shared by every goal during one rebuild.
#[derive(Debug, Clone)]
pub struct PairRow {
    pub succ: Vec<(usize, f64)>,
    /// multiplies `sqrt(Var)` in the optimistic/pessimistic bonus
    pub var_coef_q: f64,
    pub lin_q: f64,
    pub var_coef_u: f64,
    pub lin_u: f64,
}

/// Empirical rows and bonus scales for every visited pair; `None` marks an
/// unvisited pair, whose cells take their initial values.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub rows: Vec<Option<PairRow>>,
}

pub fn prepare(model: &EmpiricalModel, bonus: &BonusParams) -> Prepared {
    let (ns, na) = (model.num_states(), model.num_actions());
    let h = bonus.horizon as f64;
    let mut rows = Vec::with_capacity(ns * na);
    for s in 0..ns {
        for a in 0..na {
            let n = model.count(s, a);
            if n == 0 {
                rows.push(None);
                continue;
            }
            let nf = n as f64;
            let succ = model.successors(s, a).iter().map(|&(t, c)| (t, c as f64 / nf)).collect();
            let row = if bonus.simplified {
                let b = bonus.beta_hat(n) / nf;
                PairRow { succ, var_coef_q: b.sqrt(), lin_q: b, var_coef_u: b.sqrt(), lin_u: b }
            } else {
                let bs = bonus.beta_star(n) / nf;
                let b = h * h * bonus.beta(n) / nf;
                PairRow {
                    succ,
                    var_coef_q: 3.0 * bs.sqrt(),
                    lin_q: 14.0 * b,
                    var_coef_u: 6.0 * bs.sqrt(),
                    lin_u: 36.0 * b,
                }
            };
            rows.push(Some(row));
        }
    }
    Prepared { num_states: ns, num_actions: na, horizon: bonus.horizon, rows }
}

/// One step layer of a goal's tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// optimistic Q, `[s * A + a]`
    pub q_opt: Vec<f64>,
    pub v_opt: Vec<f64>,
    /// pessimistic Q, `[s * A + a]`
    pub q_pes: Vec<f64>,
    pub v_pes: Vec<f64>,
    /// error function, `[s * A + a]`
    pub u: Vec<f64>,
    /// greedy action w.r.t. the optimistic Q
    pub pi: Vec<usize>,
}

impl Layer {
    fn zeros(ns: usize, na: usize) -> Self {
        Layer {
            q_opt: vec![0.0; ns * na],
            v_opt: vec![0.0; ns],
            q_pes: vec![0.0; ns * na],
            v_pes: vec![0.0; ns],
            u: vec![0.0; ns * na],
            pi: vec![0; ns],
        }
    }

    /// `U(s, π(s))` for every state.
    pub fn u_greedy(&self) -> Vec<f64> {
        let na = self.q_opt.len() / self.v_opt.len();
        self.pi.iter().enumerate().map(|(s, &a)| self.u[s * na + a]).collect()
    }

    // Everything the layer below reads from this one.
    fn same_outputs(&self, other: &Layer) -> bool {
        self.v_opt == other.v_opt && self.v_pes == other.v_pes && self.u_greedy() == other.u_greedy()
    }
}

/// Optimistic, pessimistic and error tables of one goal for steps `1..=H`.
///
/// The recursion is the same at every step, so once a layer reproduces the
/// outputs of the layer above it, all earlier layers are identical to it.
/// Only layers `top..=H` are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimisticTables {
    pub goal: usize,
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
    top: usize,
    /// `layers[i]` is step `top + i`
    layers: Vec<Layer>,
    terminal: Layer,
}

impl OptimisticTables {
    /// Tables before any data: `Q̃ = 1[s≠g]`, `U = H·1[s≠g]`, `Q̰ = H·1[s≠g]`.
    pub fn initial(goal: usize, num_states: usize, num_actions: usize, horizon: usize) -> Self {
        let hf = horizon as f64;
        let mut l = Layer::zeros(num_states, num_actions);
        for s in 0..num_states {
            if s == goal {
                continue;
            }
            l.v_opt[s] = 1.0;
            l.v_pes[s] = hf;
            for a in 0..num_actions {
                l.q_opt[s * num_actions + a] = 1.0;
                l.q_pes[s * num_actions + a] = hf;
                l.u[s * num_actions + a] = hf;
            }
        }
        OptimisticTables {
            goal,
            horizon,
            num_states,
            num_actions,
            top: 1,
            layers: vec![l; horizon.min(1)],
            terminal: Layer::zeros(num_states, num_actions),
        }
    }

    /// Layer at step `h` in `1..=H+1`.
    pub fn layer(&self, h: usize) -> &Layer {
        if h > self.horizon {
            return &self.terminal;
        }
        if self.layers.is_empty() {
            return &self.terminal;
        }
        let i = h.max(self.top) - self.top;
        &self.layers[i.min(self.layers.len() - 1)]
    }

    /// Number of distinct layers actually stored.
    pub fn stored_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn distance(&self, s0: usize) -> f64 {
        self.layer(1).v_opt[s0]
    }

    pub fn raw_error(&self, s0: usize) -> f64 {
        let l = self.layer(1);
        l.u[s0 * self.num_actions + l.pi[s0]]
    }

    pub fn greedy_action(&self, h: usize, s: usize) -> usize {
        self.layer(h).pi[s]
    }

    pub fn greedy_policy(&self) -> crate::mdp::NonStationaryPolicy {
        crate::mdp::NonStationaryPolicy {
            horizon: self.horizon,
            actions: (1..=self.horizon).map(|h| self.layer(h).pi.clone()).collect(),
        }
    }
}

fn argmin(q: &[f64]) -> (usize, f64) {
    let mut best = (0, q[0]);
    for (a, &v) in q.iter().enumerate().skip(1) {
        if v < best.1 {
            best = (a, v);
        }
    }
    best
}

/// Backward recursion of the optimistic, pessimistic and error tables of goal
/// `g` from the prepared empirical model.
pub fn rebuild_tables(prep: &Prepared, g: usize) -> OptimisticTables {
    let (ns, na, horizon) = (prep.num_states, prep.num_actions, prep.horizon);
    let hf = horizon as f64;
    let terminal = Layer::zeros(ns, na);
    let mut stored: Vec<Layer> = Vec::new();
    let mut top = horizon + 1;
    for h in (1..=horizon).rev() {
        let next = stored.last().unwrap_or(&terminal);
        let next_u = next.u_greedy();
        let mut cur = Layer::zeros(ns, na);
        for s in 0..ns {
            if s == g {
                continue;
            }
            for a in 0..na {
                let i = s * na + a;
                let (qo, qp, u) = match &prep.rows[i] {
                    None => (1.0, hf, hf),
                    Some(row) => {
                        let (mut pvo, mut pvp, mut pu) = (0.0, 0.0, 0.0);
                        for &(t, p) in &row.succ {
                            pvo += p * next.v_opt[t];
                            pvp += p * next.v_pes[t];
                            pu += p * next_u[t];
                        }
                        let mut var = 0.0;
                        for &(t, p) in &row.succ {
                            let d = next.v_opt[t] - pvo;
                            var += p * d * d;
                        }
                        let sd = var.max(0.0).sqrt();
                        let spread = (pvp - pvo) / hf;
                        let bq = row.var_coef_q * sd + row.lin_q;
                        let bu = row.var_coef_u * sd + row.lin_u;
                        (
                            (1.0 - bq - spread + pvo).clamp(0.0, hf),
                            (1.0 + bq + spread + pvp).clamp(0.0, hf),
                            (bu + (1.0 + 3.0 / hf) * pu).clamp(0.0, hf),
                        )
                    }
                };
                cur.q_opt[i] = qo;
                cur.q_pes[i] = qp;
                cur.u[i] = u;
            }
            let (a, v) = argmin(&cur.q_opt[s * na..(s + 1) * na]);
            cur.pi[s] = a;
            cur.v_opt[s] = v;
            cur.v_pes[s] = cur.q_pes[s * na..(s + 1) * na].iter().copied().fold(f64::INFINITY, f64::min);
        }
        let settled = cur.same_outputs(next);
        stored.push(cur);
        top = h;
        if settled {
            break;
        }
    }
    stored.reverse();
    OptimisticTables { goal: g, horizon, num_states: ns, num_actions: na, top, layers: stored, terminal }
}
