//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond `JSON.parse`. The plain Rust functions underneath are what the
//! native tests exercise.

use adagoal::envs::{build_two_room_grid, GridParams};
use adagoal::oracle::ssp_optimal;
use adagoal::samplers::GoalSampler;
use adagoal::tabular::{self, AdaGoalConfig};
use adagoal::RngStream;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn grid_from(params: &str) -> Result<adagoal::envs::GridWorld, String> {
    let p: GridParams = if params.trim().is_empty() {
        GridParams::two_room()
    } else {
        serde_json::from_str(params).map_err(|e| e.to_string())?
    };
    build_two_room_grid(&p).map_err(|e| e.to_string())
}

/// Shortest-path distance from the start to every cell, and whether it lies
/// within `l`.
pub fn distance_field(params: &str, l: f64) -> Result<Value, String> {
    let grid = grid_from(params)?;
    let cells: Vec<Value> = (0..grid.mdp.num_states())
        .map(|g| {
            let v = ssp_optimal(&grid.mdp, g).value(grid.mdp.start());
            json!({
                "x": grid.cells[g][0],
                "y": grid.cells[g][1],
                "distance": v,
                "reachable": v.is_some_and(|v| v <= l + 1e-9),
                "rare": grid.rare_states.contains(&g),
            })
        })
        .collect();
    Ok(json!({ "width": grid.params.width, "height": grid.params.height, "cells": cells }))
}

/// Goal-selection counts of one sampler over `episodes` episodes with a
/// fixed horizon and simplified bonuses, split into thirds.
pub fn selection_frequencies(params: &str, sampler: &str, episodes: usize, horizon: usize, l: f64, seed: u64) -> Result<Value, String> {
    let grid = grid_from(params)?;
    let sampler: GoalSampler = sampler.parse().map_err(|e: adagoal::samplers::ParseSamplerError| e.to_string())?;
    let cfg = AdaGoalConfig {
        l,
        epsilon: 1.0,
        delta: 0.1,
        horizon: Some(horizon),
        max_episodes: episodes,
        simplified_bonuses: true,
        run_to_cap: true,
        ..Default::default()
    };
    let mut rng = RngStream::new(seed, 0);
    let out = tabular::run(&grid.mdp, &cfg, &sampler, &mut rng).map_err(|e| e.to_string())?;
    let goals: Vec<usize> = (0..grid.mdp.num_states()).collect();
    let log = out.frequencies(&goals, 3);
    let rare_share: Vec<f64> = (0..3).map(|j| log.share(&grid.rare_states, j)).collect();
    let cells: Vec<Value> = goals
        .iter()
        .map(|&g| json!({ "x": grid.cells[g][0], "y": grid.cells[g][1], "counts": log.counts[g] }))
        .collect();
    Ok(json!({
        "width": grid.params.width,
        "height": grid.params.height,
        "bounds": log.bounds,
        "rare_share": rare_share,
        "cells": cells,
    }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = distanceField)]
pub fn distance_field_js(params: &str, l: f64) -> Result<String, JsValue> {
    to_js(distance_field(params, l))
}

#[wasm_bindgen(js_name = selectionFrequencies)]
pub fn selection_frequencies_js(
    params: &str,
    sampler: &str,
    episodes: usize,
    horizon: usize,
    l: f64,
    seed: u64,
) -> Result<String, JsValue> {
    to_js(selection_frequencies(params, sampler, episodes, horizon, l, seed))
}

#[wasm_bindgen(js_name = horizonFor)]
pub fn horizon_for_js(l: f64, eps: f64) -> Result<usize, JsValue> {
    tabular::horizon_for(l, eps).map_err(|e| JsValue::from_str(&e.to_string()))
}
