use serde::{Deserialize, Serialize};

/// Visit and transition counts, stored sparsely per state-action pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalModel {
    num_states: usize,
    num_actions: usize,
    n_sa: Vec<u64>,
    /// successors of `(s, a)` with their counts, in order of first sighting
    succ: Vec<Vec<(usize, u64)>>,
    clock: u64,
}

impl EmpiricalModel {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        EmpiricalModel {
            num_states,
            num_actions,
            n_sa: vec![0; num_states * num_actions],
            succ: vec![Vec::new(); num_states * num_actions],
            clock: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn record_transition(&mut self, s: usize, a: usize, next: usize) {
        let i = s * self.num_actions + a;
        self.n_sa[i] += 1;
        match self.succ[i].iter_mut().find(|(t, _)| *t == next) {
            Some(e) => e.1 += 1,
            None => self.succ[i].push((next, 1)),
        }
        self.clock += 1;
    }

    pub fn count(&self, s: usize, a: usize) -> u64 {
        self.n_sa[s * self.num_actions + a]
    }

    pub fn joint_count(&self, s: usize, a: usize, next: usize) -> u64 {
        self.successors(s, a).iter().find(|(t, _)| *t == next).map_or(0, |e| e.1)
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, u64)] {
        &self.succ[s * self.num_actions + a]
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Dense empirical row: observed frequencies, or uniform when unvisited.
    pub fn p_hat(&self, s: usize, a: usize) -> Vec<f64> {
        let n = self.count(s, a);
        if n == 0 {
            return vec![1.0 / self.num_states as f64; self.num_states];
        }
        let mut row = vec![0.0; self.num_states];
        for &(t, c) in self.successors(s, a) {
            row[t] = c as f64 / n as f64;
        }
        row
    }
}
