//! Fixed-step fifth-order Runge–Kutta integration interleaved with the
//! discrete lane-change phase.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{accelerations_into, Topology};
use crate::error::{Error, Result};
use crate::lane_change::{candidate_budget, lane_change_phase, LaneChangeEvent};
use crate::model::{ModelParams, RoadConfig};
use crate::state::{TrafficState, Vehicle};

// Dormand–Prince nodes, coupling coefficients and fifth-order weights.
const C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];

/// One explicit fifth-order step of `y' = f(t, y)` with the Dormand–Prince
/// tableau, without error control.
pub fn rk5_fixed_step<F, E>(mut f: F, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let dim = y.len();
    let mut k = vec![vec![0.0; dim]; 6];
    let mut stage = vec![0.0; dim];
    for i in 0..6 {
        stage.copy_from_slice(y);
        for (j, a) in A[i].iter().enumerate().take(i) {
            if *a != 0.0 {
                for (s, kj) in stage.iter_mut().zip(&k[j]) {
                    *s += dt * a * kj;
                }
            }
        }
        f(t + C[i] * dt, &stage, &mut k[i])?;
    }
    let mut out = y.to_vec();
    for (i, b) in B.iter().enumerate() {
        if *b != 0.0 {
            for (o, ki) in out.iter_mut().zip(&k[i]) {
                *o += dt * b * ki;
            }
        }
    }
    Ok(out)
}

/// Advances positions and velocities by one step with the lane topology
/// frozen, then checks that every same-lane gap is still positive.
pub fn rk5_step(
    state: &TrafficState,
    params: &ModelParams,
    road: &RoadConfig,
    dt: f64,
) -> Result<TrafficState> {
    if !(dt > 0.0) {
        return Err(Error::Domain { what: "dt", value: dt });
    }
    let topology = Topology::from_state(state);
    let vehicles = state.vehicles();
    let count = vehicles.len();
    let lanes: Vec<usize> = vehicles.iter().map(|v| v.lane).collect();
    let mut y: Vec<f64> = vehicles.iter().map(|v| v.x).collect();
    y.extend(vehicles.iter().map(|v| v.v));

    let collision = |(n, lead, gap): (usize, usize, f64), time: f64| Error::Collision {
        time,
        follower: vehicles[n].id,
        leader: vehicles[lead].id,
        gap,
    };

    let next = rk5_fixed_step(
        |t, y: &[f64], dy: &mut [f64]| {
            let (x, v) = y.split_at(count);
            let (dx, dv) = dy.split_at_mut(count);
            dx.copy_from_slice(v);
            accelerations_into(params, road, &lanes, &topology, x, v, dv).map_err(|e| collision(e, t))
        },
        state.time(),
        &y,
        dt,
    )?;
    let (x, v) = next.split_at(count);
    let t_end = state.time() + dt;
    for n in 0..count {
        let gap = topology.gap(n, x);
        if !(gap > 0.0) {
            return Err(collision((n, topology.leader(n), gap), t_end));
        }
    }
    let mut out = state.clone();
    for (veh, (&xn, &vn)) in out.kinematics_mut().zip(x.iter().zip(v)) {
        veh.x = xn;
        veh.v = vn;
    }
    out.set_time(t_end);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(rename = "dt_s")]
    pub dt: f64,
    #[serde(rename = "t_final_s")]
    pub t_final: f64,
    pub seed: u64,
    /// Expected lane-change evaluations per second.
    #[serde(rename = "lane_changes_per_s")]
    pub lane_changes_per_s: f64,
    /// Record every `stride`-th step.
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        if !(self.lane_changes_per_s >= 0.0 && self.lane_changes_per_s.is_finite()) {
            return Err(Error::Config("lane_changes_per_s must be non-negative".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub vehicles: Vec<Vehicle>,
    pub lane_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub length: f64,
    pub lane_count: usize,
    pub samples: Vec<Sample>,
    pub events: Vec<LaneChangeEvent>,
}

impl Trajectory {
    fn new(state: &TrafficState) -> Self {
        Self {
            length: state.length(),
            lane_count: state.lane_count(),
            samples: Vec::new(),
            events: Vec::new(),
        }
    }

    fn record(&mut self, state: &TrafficState) {
        self.samples.push(Sample {
            time: state.time(),
            vehicles: state.vehicles().to_vec(),
            lane_counts: state.lane_counts(),
        });
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Time series `(t, v)` of the vehicle with the given id.
    pub fn speed_of(&self, id: usize) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter_map(|s| s.vehicles.iter().find(|v| v.id == id).map(|v| (s.time, v.v)))
            .collect()
    }
}

/// A simulation stopped by an error, with everything recorded up to it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("simulation aborted: {source}")]
pub struct Aborted {
    pub partial: Box<Trajectory>,
    pub final_state: Box<TrafficState>,
    pub source: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub trajectory: Trajectory,
    pub final_state: TrafficState,
}

/// Runs `cfg.steps()` steps of: refresh neighbors, lane-change phase with
/// the seeded stream, one Runge–Kutta step. Identical inputs give
/// bit-identical output.
pub fn simulate(
    initial: &TrafficState,
    params: &ModelParams,
    road: &RoadConfig,
    cfg: &IntegratorConfig,
) -> Result<SimulationOutput, Aborted> {
    let mut state = initial.clone();
    let mut trajectory = Trajectory::new(&state);
    let abort = |trajectory: Trajectory, state: TrafficState, source: Error| Aborted {
        partial: Box::new(trajectory),
        final_state: Box::new(state),
        source,
    };
    if let Err(e) = cfg.validate().and_then(|_| params.validate()) {
        return Err(abort(trajectory, state, e));
    }
    if road.lane_count() != state.lane_count() {
        let e = Error::Config(format!(
            "road has {} lanes but the state has {}",
            road.lane_count(),
            state.lane_count()
        ));
        return Err(abort(trajectory, state, e));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let expected = cfg.lane_changes_per_s * cfg.dt;
    let t0 = state.time();
    trajectory.record(&state);

    for step in 0..cfg.steps() {
        let budget = candidate_budget(&mut rng, expected);
        if budget > 0 && state.lane_count() > 1 {
            // Cross-lane neighbors drift as lanes slide past each other.
            let phase = state
                .rebuild_neighbors()
                .and_then(|_| lane_change_phase(&mut state, params, road, &mut rng, budget));
            match phase {
                Ok(events) => trajectory.events.extend(events),
                Err(e) => return Err(abort(trajectory, state, e)),
            }
        }
        match rk5_step(&state, params, road, cfg.dt) {
            Ok(mut next) => {
                next.set_time(t0 + (step + 1) as f64 * cfg.dt);
                state = next;
            }
            Err(e) => return Err(abort(trajectory, state, e)),
        }
        if (step + 1) % cfg.stride == 0 {
            trajectory.record(&state);
        }
    }
    if let Err(e) = state.rebuild_neighbors() {
        return Err(abort(trajectory, state, e));
    }
    Ok(SimulationOutput {
        trajectory,
        final_state: state,
    })
}
