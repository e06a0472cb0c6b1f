//! Declarative experiment description and initial-state construction.
//!
//! Lanes are numbered from 1 in configuration files and from 0 in code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{chain_equilibrium, multi_lane_equilibrium, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::model::{ring_gap, ModelParams, RoadConfig};
use crate::state::{TrafficState, Vehicle};

/// Stream of the seeded generator reserved for initial jitter, so that the
/// lane-change draws of a run do not depend on whether jitter was used.
const JITTER_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub road: RoadConfig,
    pub model: ModelParams,
    pub integrator: IntegratorConfig,
    pub initial: InitialCondition,
    /// Applied in order at `t = 0`, after the initial state is built.
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Steady state of `vehicles` vehicles shared among all lanes.
    GlobalEquilibrium {
        vehicles: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        perturbation: Option<HeadwayShift>,
    },
    /// Equal-speed steady state seeded by the headway of lane 1.
    ChainEquilibrium {
        headway_lane1_m: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        perturbation: Option<HeadwayShift>,
    },
    /// Explicit per-lane vehicle counts.
    Counts { lanes: Vec<LaneFill> },
}

/// Uniform change `epsilon` of the steady headway of one lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadwayShift {
    pub lane: usize,
    pub epsilon_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneFill {
    pub count: usize,
    /// Start with zero speed instead of `V_j(L / count)`.
    #[serde(default)]
    pub at_rest: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<Jitter>,
    /// Position of the first vehicle of the lane [m].
    #[serde(default)]
    pub offset_m: f64,
}

/// Headways `L/N + r_n` with `r_n` uniform on `[-r_max, r_max]`, shifted
/// to zero mean so the lane still closes on itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    #[serde(default = "default_r_max")]
    pub r_max_m: f64,
}

fn default_r_max() -> f64 {
    1.0
}

impl Default for Jitter {
    fn default() -> Self {
        Self { r_max_m: default_r_max() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    /// Add a vehicle halfway through the gap that closes the lane.
    Insert { lane: usize },
    /// Remove the vehicle with this id.
    Remove { vehicle: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_svg")]
    pub svg: bool,
}

fn default_svg() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, svg: true }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        self.model.validate()?;
        self.integrator.validate()?;
        let lanes = self.road.lane_count();
        let check_lane = |lane: usize| -> Result<()> {
            if lane == 0 || lane > lanes {
                return Err(Error::Config(format!("lane {lane} does not exist (road has {lanes})")));
            }
            Ok(())
        };
        match &self.initial {
            InitialCondition::GlobalEquilibrium { vehicles, perturbation } => {
                if *vehicles == 0 {
                    return Err(Error::Config("at least one vehicle is required".into()));
                }
                if let Some(p) = perturbation {
                    check_lane(p.lane)?;
                }
            }
            InitialCondition::ChainEquilibrium { headway_lane1_m, perturbation } => {
                if !(*headway_lane1_m > 0.0 && headway_lane1_m.is_finite()) {
                    return Err(Error::Config(format!("headway_lane1_m must be positive, got {headway_lane1_m}")));
                }
                if let Some(p) = perturbation {
                    check_lane(p.lane)?;
                }
            }
            InitialCondition::Counts { lanes: fills } => {
                if fills.len() != lanes {
                    return Err(Error::Config(format!("{} lane fills for {lanes} lanes", fills.len())));
                }
                if fills.iter().map(|f| f.count).sum::<usize>() == 0 {
                    return Err(Error::Config("at least one vehicle is required".into()));
                }
                for f in fills {
                    if let Some(j) = f.jitter {
                        if !(j.r_max_m >= 0.0 && j.r_max_m.is_finite()) {
                            return Err(Error::Config(format!("r_max_m must be non-negative, got {}", j.r_max_m)));
                        }
                    }
                    if !f.offset_m.is_finite() {
                        return Err(Error::Config("offset_m must be finite".into()));
                    }
                }
            }
        }
        for p in &self.perturbations {
            if let Perturbation::Insert { lane } = p {
                check_lane(*lane)?;
            }
        }
        Ok(())
    }

    /// The steady state the initial condition refers to. For explicit
    /// counts, the steady state with the same total number of vehicles.
    pub fn reference_equilibrium(&self) -> Result<EquilibriumSolution> {
        let length = self.road.length;
        let profiles = &self.road.profiles;
        match &self.initial {
            InitialCondition::GlobalEquilibrium { vehicles, .. } => solve_global(*vehicles, length, &self.road),
            InitialCondition::ChainEquilibrium { headway_lane1_m, .. } => {
                let eq = chain_equilibrium(*headway_lane1_m, profiles)?;
                Ok(with_length(eq, length))
            }
            InitialCondition::Counts { lanes } => {
                solve_global(lanes.iter().map(|f| f.count).sum(), length, &self.road)
            }
        }
    }

    /// Vehicles per lane before the `t = 0` perturbations.
    pub fn initial_counts(&self) -> Result<Vec<usize>> {
        Ok(self.lane_plan()?.iter().map(|p| p.count).collect())
    }

    fn lane_plan(&self) -> Result<Vec<LaneFill>> {
        let shifted = |eq: EquilibriumSolution, shift: &Option<HeadwayShift>| -> Result<Vec<LaneFill>> {
            eq.headways
                .iter()
                .enumerate()
                .map(|(j, h)| {
                    let eps = shift.filter(|s| s.lane == j + 1).map_or(0.0, |s| s.epsilon_m);
                    let spacing = h + eps;
                    if !(spacing > 0.0) {
                        return Err(Error::Config(format!("lane {} headway {spacing} m is not positive", j + 1)));
                    }
                    Ok(LaneFill {
                        count: (self.road.length / spacing).round() as usize,
                        at_rest: false,
                        jitter: None,
                        offset_m: 0.0,
                    })
                })
                .collect()
        };
        match &self.initial {
            InitialCondition::GlobalEquilibrium { perturbation, .. }
            | InitialCondition::ChainEquilibrium { perturbation, .. } => {
                shifted(self.reference_equilibrium()?, perturbation)
            }
            InitialCondition::Counts { lanes } => Ok(lanes.clone()),
        }
    }
}

fn with_length(eq: EquilibriumSolution, length: f64) -> EquilibriumSolution {
    let occupancy: Vec<f64> = eq.headways.iter().map(|h| length / h).collect();
    EquilibriumSolution {
        counts: occupancy.iter().map(|o| o.round() as usize).collect(),
        occupancy,
        ..eq
    }
}

fn solve_global(vehicles: usize, length: f64, road: &RoadConfig) -> Result<EquilibriumSolution> {
    if road.lane_count() == 1 {
        let h = length / vehicles as f64;
        let speed = road.profile(0).velocity(h)?;
        return Ok(with_length(
            EquilibriumSolution { headways: vec![h], occupancy: Vec::new(), counts: Vec::new(), speed },
            length,
        ));
    }
    multi_lane_equilibrium(vehicles, length, &road.profiles)
}

/// Builds the state described by `cfg.initial`, then applies
/// `cfg.perturbations`. Vehicles get ids `1, 2, ...` lane by lane in
/// order of position; each lane starts at its offset and is equally
/// spaced at `L / N_j`, moving at `V_j(L / N_j)` unless at rest.
pub fn build_initial_state(cfg: &ScenarioConfig) -> Result<TrafficState> {
    cfg.validate()?;
    let length = cfg.road.length;
    let plan = cfg.lane_plan()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.integrator.seed);
    rng.set_stream(JITTER_STREAM);
    let mut vehicles = Vec::new();
    for (lane, fill) in plan.iter().enumerate() {
        if fill.count == 0 {
            continue;
        }
        let spacing = length / fill.count as f64;
        let speed = if fill.at_rest { 0.0 } else { cfg.road.profile(lane).velocity(spacing)? };
        let headways = match fill.jitter {
            Some(j) => jittered_headways(&mut rng, fill.count, spacing, j.r_max_m)?,
            None => vec![spacing; fill.count],
        };
        let mut x = fill.offset_m;
        for (i, h) in headways.iter().enumerate() {
            if fill.jitter.is_none() {
                // One rounding per position keeps uniform lanes uniform to the last bit.
                x = fill.offset_m + i as f64 * spacing;
            }
            vehicles.push(Vehicle { id: vehicles.len() + 1, x, v: speed, lane });
            x += h;
        }
    }
    let mut state = TrafficState::new(length, cfg.road.lane_count(), vehicles)?;
    for p in &cfg.perturbations {
        state = match *p {
            Perturbation::Insert { lane } => insert_vehicle(&state, &cfg.road, lane - 1)?,
            Perturbation::Remove { vehicle } => remove_vehicle(&state, vehicle)?,
        };
    }
    Ok(state)
}

fn jittered_headways<R: Rng>(rng: &mut R, count: usize, spacing: f64, r_max: f64) -> Result<Vec<f64>> {
    let draws: Vec<f64> = (0..count)
        .map(|_| if r_max > 0.0 { rng.gen_range(-r_max..=r_max) } else { 0.0 })
        .collect();
    let mean = draws.iter().sum::<f64>() / count as f64;
    let headways: Vec<f64> = draws.iter().map(|r| spacing + r - mean).collect();
    if let Some(bad) = headways.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::Config(format!("jitter produced headway {bad} m; lower r_max_m")));
    }
    Ok(headways)
}

/// Adds a vehicle to `lane` halfway through the gap from its last vehicle
/// (in order of reduced position) to its first, moving at `V(L / N)` for
/// the lane's count `N` before the insertion. An empty lane gets its
/// vehicle at position 0.
pub fn insert_vehicle(state: &TrafficState, road: &RoadConfig, lane: usize) -> Result<TrafficState> {
    if lane >= state.lane_count() {
        return Err(Error::Config(format!("lane {} does not exist", lane + 1)));
    }
    let length = state.length();
    let profile = road.profile(lane);
    let order = state.lane(lane);
    let id = state.vehicles().iter().map(|v| v.id).max().unwrap_or(0) + 1;
    let (x, v) = match (order.first(), order.last()) {
        (Some(&first), Some(&last)) => {
            let (x_last, x_first) = (state.vehicles()[last].x, state.vehicles()[first].x);
            let gap = ring_gap(x_last, x_first, length);
            let min_gap = 2.0 * profile.vehicle_length;
            if !(gap > min_gap) {
                return Err(Error::Insertion(format!("gap of {gap} m is not wider than {min_gap} m")));
            }
            (x_last + gap / 2.0, profile.velocity(length / order.len() as f64)?)
        }
        _ => (0.0, profile.velocity(length)?),
    };
    let mut vehicles = state.vehicles().to_vec();
    vehicles.push(Vehicle { id, x, v, lane });
    rebuilt(state, vehicles)
}

/// Removes the vehicle with id `id`.
pub fn remove_vehicle(state: &TrafficState, id: usize) -> Result<TrafficState> {
    let n = state.index_of(id).ok_or(Error::UnknownVehicle(id))?;
    let mut vehicles = state.vehicles().to_vec();
    vehicles.remove(n);
    rebuilt(state, vehicles)
}

fn rebuilt(state: &TrafficState, vehicles: Vec<Vehicle>) -> Result<TrafficState> {
    let mut out = TrafficState::new(state.length(), state.lane_count(), vehicles)?;
    out.set_time(state.time());
    Ok(out)
}
