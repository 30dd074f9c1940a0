//! Goal-selection rules.

use crate::mdp::RngStream;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Inputs shared by every rule. Vectors `d` and `e` are indexed like
/// `goal_space`; `visits` is indexed by state.
#[derive(Debug, Clone, Copy)]
pub struct SamplerInput<'a> {
    pub goal_space: &'a [usize],
    pub start: usize,
    pub d: &'a [f64],
    pub e: &'a [f64],
    pub visits: &'a [u64],
    pub l: f64,
}

impl SamplerInput<'_> {
    fn start_index(&self) -> usize {
        self.goal_space.iter().position(|&g| g == self.start).unwrap_or(0)
    }
}

/// Largest error among goals whose distance estimate is within `L`; ties go
/// to the lowest state index. Returns an index into the goal space.
pub fn adagoal_select(input: &SamplerInput<'_>) -> usize {
    let mut best: Option<usize> = None;
    for i in 0..input.goal_space.len() {
        if input.d[i] > input.l {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let better = input.e[i] > input.e[b]
                    || (input.e[i] == input.e[b] && input.goal_space[i] < input.goal_space[b]);
                Some(if better { i } else { b })
            }
        };
    }
    best.unwrap_or_else(|| input.start_index())
}

/// Uniform over the goal space without the start state.
pub fn unigoal_select(input: &SamplerInput<'_>, rng: &mut RngStream) -> usize {
    let support: Vec<usize> = (0..input.goal_space.len())
        .filter(|&i| input.goal_space[i] != input.start)
        .collect();
    if support.is_empty() {
        return input.start_index();
    }
    support[rng.below(support.len())]
}

/// Selection probabilities of the rarity rule, indexed like the goal space.
pub fn raregoal_probabilities(input: &SamplerInput<'_>, alpha: f64) -> Vec<f64> {
    let w: Vec<f64> = input
        .goal_space
        .iter()
        .map(|&g| if g == input.start { 0.0 } else { 1.0 / (input.visits[g] as f64).max(alpha) })
        .collect();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return w;
    }
    w.iter().map(|x| x / total).collect()
}

/// Goals drawn with probability inversely proportional to their visit count,
/// floored at `alpha`.
pub fn raregoal_select(input: &SamplerInput<'_>, alpha: f64, rng: &mut RngStream) -> usize {
    let p = raregoal_probabilities(input, alpha);
    if p.iter().all(|&x| x == 0.0) {
        return input.start_index();
    }
    rng.categorical(&p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalSampler {
    AdaGoal,
    UniGoal,
    RareGoal { alpha: f64 },
}

impl GoalSampler {
    pub fn select(&self, input: &SamplerInput<'_>, rng: &mut RngStream) -> usize {
        match *self {
            GoalSampler::AdaGoal => adagoal_select(input),
            GoalSampler::UniGoal => unigoal_select(input, rng),
            GoalSampler::RareGoal { alpha } => raregoal_select(input, alpha, rng),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown sampler {0:?} (expected adagoal, unigoal or raregoal:<alpha>)")]
pub struct ParseSamplerError(String);

impl FromStr for GoalSampler {
    type Err = ParseSamplerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adagoal" => Ok(GoalSampler::AdaGoal),
            "unigoal" => Ok(GoalSampler::UniGoal),
            _ => {
                let alpha = s
                    .strip_prefix("raregoal:")
                    .and_then(|a| a.parse::<f64>().ok())
                    .filter(|a| *a > 0.0 && *a <= 1.0)
                    .ok_or_else(|| ParseSamplerError(s.to_string()))?;
                Ok(GoalSampler::RareGoal { alpha })
            }
        }
    }
}

impl fmt::Display for GoalSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalSampler::AdaGoal => write!(f, "adagoal"),
            GoalSampler::UniGoal => write!(f, "unigoal"),
            GoalSampler::RareGoal { alpha } => write!(f, "raregoal:{alpha}"),
        }
    }
}

impl Serialize for GoalSampler {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for GoalSampler {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
