//! Tabular MDPs, goal-absorbed views, policies and seeded sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Row-sum tolerance at construction.
pub const ROW_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum MdpError {
    #[error("invalid MDP: {0}")]
    Invalid(ValidationReport),
    #[error("index out of range: {what} = {index} (limit {limit})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("value vector has length {got}, expected {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("value at goal {goal} is {value}, must be 0")]
    NonZeroAtGoal { goal: usize, value: f64 },
    #[error("MDP has no reset action")]
    NoReset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RowSum { s: usize, a: usize, sum: f64 },
    Negative { s: usize, a: usize, next: usize, p: f64 },
    ResetRow { s: usize, mass_on_start: f64 },
    IndexRange { field: String, index: usize, limit: usize },
    Shape { detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { s, a, sum } => write!(f, "row ({s},{a}) sums to {sum}"),
            Violation::Negative { s, a, next, p } => {
                write!(f, "negative entry P[{s}][{a}][{next}] = {p}")
            }
            Violation::ResetRow { s, mass_on_start } => {
                write!(f, "reset from {s} reaches the start state with mass {mass_on_start}")
            }
            Violation::IndexRange { field, index, limit } => {
                write!(f, "{field} = {index} out of range (limit {limit})")
            }
            Violation::Shape { detail } => write!(f, "shape: {detail}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Finite MDP with a designated start state and (usually) a reset action that
/// returns to the start state from anywhere.
///
/// `reset_action` is `None` only for reset-free instances, which the learners
/// refuse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpJson", into = "MdpJson")]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    start: usize,
    reset_action: Option<usize>,
    // P[s][a][s'] at (s * A + a) * S + s'
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct MdpJson {
    S: usize,
    A: usize,
    s0: usize,
    reset_action: Option<usize>,
    P: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<MdpJson> for TabularMdp {
    type Error = MdpError;
    fn try_from(j: MdpJson) -> Result<Self, MdpError> {
        TabularMdp::from_nested(j.S, j.A, j.s0, j.reset_action, &j.P)
    }
}

impl From<TabularMdp> for MdpJson {
    fn from(m: TabularMdp) -> Self {
        MdpJson {
            S: m.num_states,
            A: m.num_actions,
            s0: m.start,
            reset_action: m.reset_action,
            P: m.to_nested(),
        }
    }
}

/// Check every structural invariant of a raw transition table without
/// constructing anything.
pub fn validate_raw(
    s: usize,
    a: usize,
    s0: usize,
    reset_action: Option<usize>,
    p: &[Vec<Vec<f64>>],
) -> ValidationReport {
    let mut out = Vec::new();
    if s0 >= s {
        out.push(Violation::IndexRange { field: "s0".into(), index: s0, limit: s });
    }
    if let Some(r) = reset_action {
        if r >= a {
            out.push(Violation::IndexRange { field: "reset_action".into(), index: r, limit: a });
        }
    }
    if p.len() != s {
        out.push(Violation::Shape { detail: format!("P has {} state rows, expected {s}", p.len()) });
        return ValidationReport { violations: out };
    }
    for (si, rows) in p.iter().enumerate() {
        if rows.len() != a {
            out.push(Violation::Shape {
                detail: format!("P[{si}] has {} action rows, expected {a}", rows.len()),
            });
            continue;
        }
        for (ai, row) in rows.iter().enumerate() {
            if row.len() != s {
                out.push(Violation::Shape {
                    detail: format!("P[{si}][{ai}] has length {}, expected {s}", row.len()),
                });
                continue;
            }
            let mut sum = 0.0;
            for (ni, &pr) in row.iter().enumerate() {
                if pr < 0.0 || pr.is_nan() {
                    out.push(Violation::Negative { s: si, a: ai, next: ni, p: pr });
                }
                sum += pr;
            }
            if (sum - 1.0).abs() > ROW_TOL {
                out.push(Violation::RowSum { s: si, a: ai, sum });
            }
        }
        if let Some(r) = reset_action {
            if r < a && s0 < s && rows.len() == a && rows[r].len() == s && rows[r][s0] != 1.0 {
                out.push(Violation::ResetRow { s: si, mass_on_start: rows[r][s0] });
            }
        }
    }
    ValidationReport { violations: out }
}

/// Report-style validation of a constructed MDP.
pub fn validate_mdp(mdp: &TabularMdp) -> ValidationReport {
    validate_raw(
        mdp.num_states,
        mdp.num_actions,
        mdp.start,
        mdp.reset_action,
        &mdp.to_nested(),
    )
}

impl TabularMdp {
    /// Build from a nested `P[s][a][s']` table. Rows within 1e-12 of summing to
    /// one are renormalized; anything else is rejected with the full report.
    /// Rows already normalized to rounding are kept bit for bit, so a JSON
    /// roundtrip is exact.
    pub fn from_nested(
        s: usize,
        a: usize,
        s0: usize,
        reset_action: Option<usize>,
        p: &[Vec<Vec<f64>>],
    ) -> Result<Self, MdpError> {
        let report = validate_raw(s, a, s0, reset_action, p);
        if !report.is_ok() {
            return Err(MdpError::Invalid(report));
        }
        let mut flat = Vec::with_capacity(s * a * s);
        for rows in p {
            for row in rows {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() <= s as f64 * f64::EPSILON {
                    flat.extend_from_slice(row);
                } else {
                    flat.extend(row.iter().map(|x| x / sum));
                }
            }
        }
        Ok(TabularMdp { num_states: s, num_actions: a, start: s0, reset_action, p: flat })
    }

    /// Build from a flat row-major table, `P[(s*A + a)*S + s']`.
    pub fn from_flat(
        s: usize,
        a: usize,
        s0: usize,
        reset_action: Option<usize>,
        p: Vec<f64>,
    ) -> Result<Self, MdpError> {
        if p.len() != s * a * s {
            return Err(MdpError::Invalid(ValidationReport {
                violations: vec![Violation::Shape {
                    detail: format!("flat table has {} entries, expected {}", p.len(), s * a * s),
                }],
            }));
        }
        let nested: Vec<Vec<Vec<f64>>> = (0..s)
            .map(|si| (0..a).map(|ai| p[(si * a + ai) * s..(si * a + ai + 1) * s].to_vec()).collect())
            .collect();
        Self::from_nested(s, a, s0, reset_action, &nested)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn reset_action(&self) -> Option<usize> {
        self.reset_action
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.num_states;
        let i = (s * self.num_actions + a) * n;
        &self.p[i..i + n]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|s| (0..self.num_actions).map(|a| self.row(s, a).to_vec()).collect())
            .collect()
    }

    /// Copy of this MDP with the reset action's rows removed from the contract
    /// (the rows are kept; only the flag is dropped).
    pub fn without_reset(&self) -> TabularMdp {
        TabularMdp { reset_action: None, ..self.clone() }
    }

    fn check_sa(&self, s: usize, a: usize) -> Result<(), MdpError> {
        if s >= self.num_states {
            return Err(MdpError::OutOfRange { what: "state", index: s, limit: self.num_states });
        }
        if a >= self.num_actions {
            return Err(MdpError::OutOfRange { what: "action", index: a, limit: self.num_actions });
        }
        Ok(())
    }

    /// `Σ_{s'} P(s'|s,a) value(s')`.
    pub fn apply(&self, value: &[f64], s: usize, a: usize) -> f64 {
        self.row(s, a).iter().zip(value).map(|(p, v)| p * v).sum()
    }

    /// Unbounded (state, successor) support lists, useful for sparse sweeps.
    pub fn support(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.num_states * self.num_actions)
            .map(|i| {
                let (s, a) = (i / self.num_actions, i % self.num_actions);
                self.row(s, a)
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(n, p)| (n, *p))
                    .collect()
            })
            .collect()
    }
}

/// Checked expectation operator.
pub fn apply_transition_operator(
    mdp: &TabularMdp,
    value: &[f64],
    s: usize,
    a: usize,
) -> Result<f64, MdpError> {
    mdp.check_sa(s, a)?;
    if value.len() != mdp.num_states {
        return Err(MdpError::BadLength { got: value.len(), expected: mdp.num_states });
    }
    Ok(mdp.apply(value, s, a))
}

/// The MDP seen from a goal: the goal row becomes a self-loop and every step
/// off the goal costs 1. No kernel is copied.
#[derive(Debug, Clone, Copy)]
pub struct GoalAbsorbedView<'a> {
    pub base: &'a TabularMdp,
    pub goal: usize,
}

impl<'a> GoalAbsorbedView<'a> {
    pub fn new(base: &'a TabularMdp, goal: usize) -> Result<Self, MdpError> {
        if goal >= base.num_states() {
            return Err(MdpError::OutOfRange { what: "goal", index: goal, limit: base.num_states() });
        }
        Ok(GoalAbsorbedView { base, goal })
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        if s == self.goal {
            if next == self.goal {
                1.0
            } else {
                0.0
            }
        } else {
            self.base.prob(s, a, next)
        }
    }

    pub fn cost(&self, s: usize) -> f64 {
        if s == self.goal {
            0.0
        } else {
            1.0
        }
    }

    /// Absorbed-kernel expectation computed directly on the absorbed rows.
    pub fn apply_absorbed(&self, value: &[f64], s: usize, a: usize) -> f64 {
        (0..self.base.num_states()).map(|n| self.prob(s, a, n) * value[n]).sum()
    }
}

/// Expectation under the goal-absorbed kernel for vectors vanishing at the
/// goal, computed through the base kernel. The two agree for such vectors,
/// which is why learners never need the absorbed kernel itself.
pub fn goal_apply(
    view: &GoalAbsorbedView<'_>,
    value: &[f64],
    s: usize,
    a: usize,
) -> Result<f64, MdpError> {
    if value.len() != view.base.num_states() {
        return Err(MdpError::BadLength { got: value.len(), expected: view.base.num_states() });
    }
    if value[view.goal] != 0.0 {
        return Err(MdpError::NonZeroAtGoal { goal: view.goal, value: value[view.goal] });
    }
    view.base.check_sa(s, a)?;
    if s == view.goal {
        return Ok(0.0);
    }
    Ok(view.base.apply(value, s, a))
}

/// Horizon-`H` policy with steps numbered `1..=H`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonStationaryPolicy {
    pub horizon: usize,
    /// `actions[h - 1][s]`
    pub actions: Vec<Vec<usize>>,
}

impl NonStationaryPolicy {
    pub fn constant(horizon: usize, num_states: usize, action: usize) -> Self {
        NonStationaryPolicy { horizon, actions: vec![vec![action; num_states]; horizon] }
    }

    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h - 1][s]
    }

    pub fn is_valid(&self, num_states: usize, num_actions: usize) -> bool {
        self.actions.len() == self.horizon
            && self
                .actions
                .iter()
                .all(|row| row.len() == num_states && row.iter().all(|&a| a < num_actions))
    }
}

/// Runs the inner policy for `H` steps, then resets, forever.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResettingPolicy {
    pub inner: NonStationaryPolicy,
    pub reset_action: usize,
}

impl ResettingPolicy {
    pub fn period(&self) -> usize {
        self.inner.horizon + 1
    }

    /// Action at global step `i >= 1`.
    pub fn action(&self, i: usize, s: usize) -> usize {
        let r = i % self.period();
        if r == 0 {
            self.reset_action
        } else {
            self.inner.action(r, s)
        }
    }
}

/// Seeded ChaCha stream. Equal `(seed, stream)` pairs replay identically.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Index drawn proportionally to nonnegative `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let u = self.uniform() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }
}

pub fn sample_step(mdp: &TabularMdp, s: usize, a: usize, rng: &mut RngStream) -> usize {
    rng.categorical(mdp.row(s, a))
}
