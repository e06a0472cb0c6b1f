//! Browser bindings. Every entry point takes a scenario as JSON text, in the
//! same format the command-line tool reads, and returns JSON text.

use serde::Serialize;
use traffic_core::report::{stability_report, StabilityReport};
use traffic_core::{build_initial_state, simulate, ScenarioConfig, Trajectory};
use wasm_bindgen::prelude::*;

/// Most frames handed to the page per run.
const MAX_FRAMES: usize = 600;
/// Points per velocity curve.
const CURVE_POINTS: usize = 200;

const PRESETS: [(&str, &str); 6] = [
    ("single_lane_stop_and_go", include_str!("../../cli/scenarios/single_lane_stop_and_go.json")),
    ("single_lane_insert", include_str!("../../cli/scenarios/single_lane_insert.json")),
    ("bando_collision", include_str!("../../cli/scenarios/bando_collision.json")),
    ("two_lane_outflow", include_str!("../../cli/scenarios/two_lane_outflow.json")),
    ("two_lane_from_rest", include_str!("../../cli/scenarios/two_lane_from_rest.json")),
    ("three_lane_to_fast", include_str!("../../cli/scenarios/three_lane_to_fast.json")),
];

#[derive(Debug, Serialize)]
pub struct Curve {
    pub headways_m: Vec<f64>,
    pub speeds: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub report: StabilityReport,
    /// Optimal velocity against headway, one curve per lane.
    pub curves: Vec<Curve>,
}

#[derive(Debug, Serialize)]
pub struct Frame {
    pub t: f64,
    /// `[x mod L, lane, speed]` per vehicle, lanes from 1.
    pub vehicles: Vec<[f64; 3]>,
    pub lane_counts: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct Run {
    pub length: f64,
    pub lanes: usize,
    pub frames: Vec<Frame>,
    /// `[t, vehicle id, from, to]`, lanes from 1.
    pub events: Vec<[f64; 4]>,
    /// Set when the run stopped early.
    pub error: Option<String>,
}

fn parse(config: &str) -> Result<ScenarioConfig, String> {
    ScenarioConfig::from_json(config).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn preset_list() -> String {
    let list: Vec<(&str, serde_json::Value)> = PRESETS
        .iter()
        .map(|(name, text)| (*name, serde_json::from_str(text).expect("bundled scenario")))
        .collect();
    serde_json::to_string(&list).expect("serializable")
}

pub fn analyze_config(config: &str) -> Result<String, String> {
    let cfg = parse(config)?;
    let report = stability_report(&cfg).map_err(|e| e.to_string())?;
    let curves = cfg
        .road
        .profiles
        .iter()
        .map(|p| {
            let top = 4.0 * p.security_distance.max(p.vehicle_length) + 100.0;
            let headways_m: Vec<f64> = (0..=CURVE_POINTS).map(|i| top * i as f64 / CURVE_POINTS as f64).collect();
            let speeds = headways_m.iter().map(|&h| p.velocity(h).unwrap_or(0.0)).collect();
            Curve { headways_m, speeds }
        })
        .collect();
    to_json(&Analysis { report, curves })
}

fn thin(traj: &Trajectory, error: Option<String>) -> Run {
    let every = traj.samples.len().div_ceil(MAX_FRAMES).max(1);
    let frames = traj
        .samples
        .iter()
        .step_by(every)
        .map(|s| Frame {
            t: s.time,
            vehicles: s
                .vehicles
                .iter()
                .map(|v| [v.x.rem_euclid(traj.length), (v.lane + 1) as f64, v.v])
                .collect(),
            lane_counts: s.lane_counts.clone(),
        })
        .collect();
    let events = traj
        .events
        .iter()
        .map(|e| [e.time, e.vehicle_id as f64, (e.from + 1) as f64, (e.to + 1) as f64])
        .collect();
    Run { length: traj.length, lanes: traj.lane_count, frames, events, error }
}

pub fn run_config(config: &str) -> Result<String, String> {
    let cfg = parse(config)?;
    let state = build_initial_state(&cfg).map_err(|e| e.to_string())?;
    let run = match simulate(&state, &cfg.model, &cfg.road, &cfg.integrator) {
        Ok(out) => thin(&out.trajectory, None),
        Err(aborted) => thin(&aborted.partial, Some(aborted.source.to_string())),
    };
    to_json(&run)
}

/// Bundled scenarios as `[[name, config], ...]`.
#[wasm_bindgen]
pub fn presets() -> String {
    preset_list()
}

/// Stability report and velocity curves for a scenario.
#[wasm_bindgen]
pub fn analyze(config: &str) -> Result<String, JsError> {
    analyze_config(config).map_err(|e| JsError::new(&e))
}

/// Runs a scenario and returns thinned frames and lane-change events.
#[wasm_bindgen]
pub fn run(config: &str) -> Result<String, JsError> {
    run_config(config).map_err(|e| JsError::new(&e))
}
