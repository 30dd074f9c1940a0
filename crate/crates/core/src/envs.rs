//! Environment builders: the two-room gridworld, the reset-free separation
//! instance, the hard shortest-path instance and linear-mixture instances.

use crate::linear::LinearMixtureModel;
use crate::mdp::{MdpError, TabularMdp};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("bad parameters: {0}")]
    Params(String),
}

pub const UP: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const LEFT: usize = 3;
pub const GRID_RESET: usize = 4;

/// Gridworld layout. Cells are `[x, y]` with `y` growing downwards; the start
/// cell is `[0, 0]`. Rare-room cells are separated from the main room by
/// reflecting boundaries and can only be entered from the start cell: every
/// cardinal action there lands in each rare cell with probability `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<[usize; 2]>,
    pub rare_cells: Vec<[usize; 2]>,
    pub p_fail: f64,
    pub eta: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams::two_room()
    }
}

impl GridParams {
    /// 8x7 grid, a hook of 4 wall cells in the main room and a 2x2 rare room
    /// in the bottom-right corner: 52 states.
    pub fn two_room() -> Self {
        GridParams {
            width: 8,
            height: 7,
            walls: vec![[2, 2], [3, 2], [4, 2], [4, 3]],
            rare_cells: vec![[6, 5], [7, 5], [6, 6], [7, 6]],
            p_fail: 0.1,
            eta: 0.001,
        }
    }

    /// Single open room without walls or rare cells.
    pub fn open(width: usize, height: usize, p_fail: f64) -> Self {
        GridParams { width, height, walls: vec![], rare_cells: vec![], p_fail, eta: 0.0 }
    }
}

/// Grid MDP together with its cell bookkeeping.
#[derive(Debug, Clone)]
pub struct GridWorld {
    pub params: GridParams,
    pub mdp: TabularMdp,
    /// `cells[s] = [x, y]`
    pub cells: Vec<[usize; 2]>,
    /// States belonging to the rare room.
    pub rare_states: Vec<usize>,
}

impl GridWorld {
    pub fn state_of(&self, cell: [usize; 2]) -> Option<usize> {
        self.cells.iter().position(|&c| c == cell)
    }
}

pub fn build_two_room_grid(params: &GridParams) -> Result<GridWorld, EnvError> {
    let (w, h) = (params.width, params.height);
    if w == 0 || h == 0 {
        return Err(EnvError::Params("empty grid".into()));
    }
    if !(0.0..=1.0).contains(&params.p_fail) {
        return Err(EnvError::Params(format!("p_fail = {} outside [0, 1]", params.p_fail)));
    }
    let in_bounds = |c: &[usize; 2]| c[0] < w && c[1] < h;
    for c in params.walls.iter().chain(&params.rare_cells) {
        if !in_bounds(c) {
            return Err(EnvError::Params(format!("cell {c:?} outside the {w}x{h} grid")));
        }
    }
    let wall = |c: [usize; 2]| params.walls.contains(&c);
    let rare = |c: [usize; 2]| params.rare_cells.contains(&c);
    if wall([0, 0]) || rare([0, 0]) {
        return Err(EnvError::Params("start cell must be an open main-room cell".into()));
    }
    if params.rare_cells.iter().any(|&c| wall(c)) {
        return Err(EnvError::Params("a cell is both wall and rare".into()));
    }
    let door_mass = params.eta * params.rare_cells.len() as f64;
    if params.eta < 0.0 || door_mass >= 1.0 {
        return Err(EnvError::Params(format!("eta = {} gives door mass {door_mass}", params.eta)));
    }

    let mut cells = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !wall([x, y]) {
                cells.push([x, y]);
            }
        }
    }
    let n = cells.len();
    let index = |c: [usize; 2]| cells.iter().position(|&d| d == c).unwrap();
    let step = |c: [usize; 2], dir: usize| -> [usize; 2] {
        let t = match dir {
            UP if c[1] > 0 => [c[0], c[1] - 1],
            RIGHT if c[0] + 1 < w => [c[0] + 1, c[1]],
            DOWN if c[1] + 1 < h => [c[0], c[1] + 1],
            LEFT if c[0] > 0 => [c[0] - 1, c[1]],
            _ => return c,
        };
        if wall(t) || rare(t) != rare(c) {
            c
        } else {
            t
        }
    };

    // every main-room cell must be reachable from the start
    let mut seen = vec![false; n];
    seen[index([0, 0])] = true;
    let mut queue = VecDeque::from([[0usize, 0usize]]);
    while let Some(c) = queue.pop_front() {
        for dir in 0..4 {
            let t = step(c, dir);
            let i = index(t);
            if !seen[i] {
                seen[i] = true;
                queue.push_back(t);
            }
        }
    }
    if let Some(c) = cells.iter().zip(&seen).find(|(c, s)| !**s && !rare(**c)).map(|(c, _)| *c) {
        return Err(EnvError::Params(format!("main-room cell {c:?} is cut off from the start")));
    }

    let na = 5;
    let s0 = index([0, 0]);
    let rare_states: Vec<usize> = params.rare_cells.iter().map(|&c| index(c)).collect();
    let mut p = vec![0.0; n * na * n];
    for (s, &c) in cells.iter().enumerate() {
        for a in 0..4 {
            let row = &mut p[(s * na + a) * n..(s * na + a + 1) * n];
            let scale = if s == s0 { 1.0 - door_mass } else { 1.0 };
            for dir in 0..4 {
                let pr = if dir == a { 1.0 - params.p_fail } else { params.p_fail / 3.0 };
                if pr > 0.0 {
                    row[index(step(c, dir))] += scale * pr;
                }
            }
            if s == s0 {
                for &r in &rare_states {
                    row[r] += params.eta;
                }
            }
        }
        p[(s * na + GRID_RESET) * n + s0] = 1.0;
    }
    let mdp = TabularMdp::from_flat(n, na, s0, Some(GRID_RESET), p)?;
    Ok(GridWorld { params: params.clone(), mdp, cells, rare_states })
}

/// Five-state separation instance: `s0`, `x`, `s~`, `s-`, `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResetFreeParams {
    pub eta: f64,
    pub zeta: f64,
    /// Number of ordinary actions (the reset action, when present, comes after).
    pub num_actions: usize,
    pub favorable_action: usize,
    /// Drop the reset action entirely.
    pub reset_free: bool,
}

impl Default for ResetFreeParams {
    fn default() -> Self {
        // zeta = 2 / L with L = 10
        ResetFreeParams { eta: 1e-3, zeta: 0.2, num_actions: 4, favorable_action: 0, reset_free: false }
    }
}

pub mod reset_free_states {
    pub const S0: usize = 0;
    pub const X: usize = 1;
    pub const TILDE: usize = 2;
    pub const BAR: usize = 3;
    pub const G: usize = 4;
}

pub fn build_hard_reset_free(params: &ResetFreeParams) -> Result<TabularMdp, EnvError> {
    use reset_free_states::*;
    let (eta, zeta) = (params.eta, params.zeta);
    if !(eta > 0.0 && eta < 1.0 && zeta > 0.0 && zeta < 1.0) {
        return Err(EnvError::Params("eta and zeta must lie in (0, 1)".into()));
    }
    let k = params.num_actions;
    if k == 0 || params.favorable_action >= k {
        return Err(EnvError::Params("favorable action out of range".into()));
    }
    let na = if params.reset_free { k } else { k + 1 };
    let n = 5;
    let mut p = vec![vec![vec![0.0; n]; na]; n];
    for a in 0..k {
        p[S0][a][TILDE] = eta;
        p[S0][a][X] = 1.0 - eta;
        p[X][a][G] = zeta;
        p[X][a][X] = 1.0 - zeta;
        if a == params.favorable_action {
            p[TILDE][a][G] = 1.0;
        } else {
            p[TILDE][a][BAR] = 1.0;
        }
        p[BAR][a][G] = eta / 2.0;
        p[BAR][a][BAR] = 1.0 - eta / 2.0;
        p[G][a][S0] = 1.0;
    }
    let reset = if params.reset_free {
        None
    } else {
        for row in p.iter_mut() {
            row[k][S0] = 1.0;
        }
        Some(k)
    };
    Ok(TabularMdp::from_nested(n, na, S0, reset, &p)?)
}

/// Four-state hard instance: `s0`, `s_d`, `s_g`, `s_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpiSspParams {
    pub l: f64,
    pub epsilon: f64,
    /// Number of ordinary actions (reset comes after).
    pub num_actions: usize,
    pub optimal_action: usize,
}

impl Default for BpiSspParams {
    fn default() -> Self {
        BpiSspParams { l: 10.0, epsilon: 0.5, num_actions: 2, optimal_action: 0 }
    }
}

pub mod bpi_states {
    pub const S0: usize = 0;
    pub const SD: usize = 1;
    pub const SG: usize = 2;
    pub const SB: usize = 3;
}

/// Derived constants `(H, q, ε~)` of the hard instance.
pub fn bpi_constants(l: f64, epsilon: f64) -> (usize, f64, f64) {
    let h = (l / 2.0 - 1.0).ceil().max(0.0) as usize;
    let q = 1.0 / h as f64;
    let eps_t = epsilon / (2.0 * (h as f64 + 1.0));
    (h, q, eps_t)
}

pub fn build_bpi_ssp_hard(params: &BpiSspParams) -> Result<TabularMdp, EnvError> {
    use bpi_states::*;
    let (h, q, eps_t) = bpi_constants(params.l, params.epsilon);
    if h < 1 {
        return Err(EnvError::Params(format!("L = {} gives H < 1", params.l)));
    }
    if !(params.epsilon > 0.0 && params.epsilon <= 1.0) {
        return Err(EnvError::Params("epsilon must lie in (0, 1]".into()));
    }
    let k = params.num_actions;
    if k == 0 || params.optimal_action >= k {
        return Err(EnvError::Params("optimal action out of range".into()));
    }
    let n = 4;
    let na = k + 1;
    let mut p = vec![vec![vec![0.0; n]; na]; n];
    for a in 0..k {
        p[S0][a][SD] = q;
        p[S0][a][S0] = 1.0 - q;
        let good = if a == params.optimal_action { 0.5 + eps_t } else { 0.5 };
        p[SD][a][SG] = good;
        p[SD][a][SB] = 1.0 - good;
        p[SG][a][SG] = 1.0;
        p[SB][a][S0] = 1.0;
    }
    for row in p.iter_mut() {
        row[k][S0] = 1.0;
    }
    Ok(TabularMdp::from_nested(n, na, S0, Some(k), &p)?)
}

/// Mixture of gridworld kernels that differ only in their slip probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixtureParams {
    pub width: usize,
    pub height: usize,
    pub slips: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Default for MixtureParams {
    fn default() -> Self {
        MixtureParams { width: 3, height: 2, slips: vec![0.0, 0.5], weights: vec![0.3, 0.7] }
    }
}

/// Combine `kernels` with weights `theta_star` into a linear mixture. Basis
/// rows are rescaled so that every feature aggregate of a `[0, 1]` value has
/// norm at most 1; `theta_star` absorbs the inverse factor.
pub fn build_mixture_env(kernels: &[TabularMdp], theta_star: &[f64]) -> Result<LinearMixtureModel, EnvError> {
    let d = kernels.len();
    if d == 0 || theta_star.len() != d {
        return Err(EnvError::Params(format!("{d} kernels but {} weights", theta_star.len())));
    }
    let k0 = &kernels[0];
    let (n, na) = (k0.num_states(), k0.num_actions());
    if kernels
        .iter()
        .any(|k| k.num_states() != n || k.num_actions() != na || k.start() != k0.start() || k.reset_action() != k0.reset_action())
    {
        return Err(EnvError::Params("kernels disagree on shape, start or reset".into()));
    }
    let mut realized = vec![0.0; n * na * n];
    for (k, &w) in kernels.iter().zip(theta_star) {
        for s in 0..n {
            for a in 0..na {
                for (t, &p) in k.row(s, a).iter().enumerate() {
                    realized[(s * na + a) * n + t] += w * p;
                }
            }
        }
    }
    if let Some(i) = realized.iter().position(|&x| x < -1e-12) {
        return Err(EnvError::Params(format!("mixture has a negative entry at flat index {i}")));
    }
    realized.iter_mut().for_each(|x| *x = x.max(0.0));
    let mdp = TabularMdp::from_flat(n, na, k0.start(), k0.reset_action(), realized)?;

    let mut basis: Vec<Vec<f64>> = kernels
        .iter()
        .map(|k| (0..n).flat_map(|s| (0..na).flat_map(move |a| k.row(s, a).to_vec())).collect())
        .collect();
    // For nonnegative basis rows the largest aggregate over [0,1] values is
    // reached by the all-ones value.
    let mut worst: f64 = 0.0;
    for s in 0..n {
        for a in 0..na {
            let sq: f64 = basis
                .iter()
                .map(|b| {
                    let pos: f64 = b[(s * na + a) * n..(s * na + a + 1) * n].iter().filter(|x| **x > 0.0).sum();
                    pos * pos
                })
                .sum();
            worst = worst.max(sq.sqrt());
        }
    }
    let rescale = if worst > 1.0 { worst } else { 1.0 };
    let mut theta: Vec<f64> = theta_star.to_vec();
    if rescale > 1.0 {
        basis.iter_mut().for_each(|b| b.iter_mut().for_each(|x| *x /= rescale));
        theta.iter_mut().for_each(|x| *x *= rescale);
    }
    let b_norm = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(LinearMixtureModel { d, num_states: n, num_actions: na, basis, theta_star: theta, b_norm, rescale, mdp })
}

pub fn build_grid_mixture(params: &MixtureParams) -> Result<LinearMixtureModel, EnvError> {
    if params.slips.len() != params.weights.len() {
        return Err(EnvError::Params("slips and weights differ in length".into()));
    }
    let kernels = params
        .slips
        .iter()
        .map(|&slip| build_two_room_grid(&GridParams::open(params.width, params.height, slip)).map(|g| g.mdp))
        .collect::<Result<Vec<_>, _>>()?;
    build_mixture_env(&kernels, &params.weights)
}
