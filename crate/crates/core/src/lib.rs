//! Multi-goal exploration: learn near-optimal goal-reaching policies for every
//! state that is reliably reachable from the start state within `L` expected
//! steps, and nothing beyond `L + ε`.
//!
//! The crate ships two learners sharing one episode loop (a tabular one with
//! Bernstein-style bonuses and a linear-mixture one driven by ridge
//! regression), goal samplers, environment builders, and an exact planning
//! oracle used to verify learned outputs.

pub mod envs;
pub mod episode;
pub mod harness;
pub mod linear;
pub mod mdp;
pub mod oracle;
pub mod samplers;
pub mod tabular;

pub use mdp::{NonStationaryPolicy, ResettingPolicy, RngStream, TabularMdp};
