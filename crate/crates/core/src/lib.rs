//! Optimal-velocity / follow-the-leader traffic on a multi-lane ring road.

pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod integrator;
pub mod lane_change;
pub mod model;
mod numeric;
pub mod output;
pub mod profile;
pub mod report;
pub mod scenario;
pub mod stability;
pub mod state;

pub use equilibrium::EquilibriumSolution;
pub use error::{Error, Result};
pub use integrator::{simulate, Aborted, IntegratorConfig, SimulationOutput, Trajectory};
pub use model::{ModelParams, RoadConfig};
pub use profile::VelocityProfile;
pub use scenario::{build_initial_state, ScenarioConfig};
pub use state::{TrafficState, Vehicle};
