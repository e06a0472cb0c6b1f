//! Right-hand side of the multi-lane car-following system.

use crate::error::{Error, Result};
use crate::model::{acceleration, ring_gap, ModelParams, RoadConfig};
use crate::state::TrafficState;

/// Same-lane leaders frozen at a reference configuration.
///
/// Gaps are measured as `x[leader] - x[n] + shift[n]`, with the shift fixed
/// so that the gap equals the ring gap at the reference positions. Unlike the
/// ring gap itself, this goes negative when a follower overtakes its leader.
#[derive(Debug, Clone)]
pub struct Topology {
    leader: Vec<usize>,
    shift: Vec<f64>,
}

impl Topology {
    pub fn from_state(state: &TrafficState) -> Self {
        let length = state.length();
        let vehicles = state.vehicles();
        let mut leader = Vec::with_capacity(vehicles.len());
        let mut shift = Vec::with_capacity(vehicles.len());
        for (n, veh) in vehicles.iter().enumerate() {
            let s = state.successor(n, veh.lane).unwrap_or(n);
            let gap = if s == n {
                length
            } else {
                ring_gap(veh.x, vehicles[s].x, length)
            };
            leader.push(s);
            shift.push(gap - (vehicles[s].x - veh.x));
        }
        Self { leader, shift }
    }

    pub fn leader(&self, n: usize) -> usize {
        self.leader[n]
    }

    pub fn gap(&self, n: usize, x: &[f64]) -> f64 {
        x[self.leader[n]] - x[n] + self.shift[n]
    }
}

/// A gap that closed during integration: `(follower index, leader index, gap)`.
pub(crate) type GapViolation = (usize, usize, f64);

/// Fills `out` with the acceleration of every vehicle against its frozen
/// same-lane leader.
pub(crate) fn accelerations_into(
    params: &ModelParams,
    road: &RoadConfig,
    lanes: &[usize],
    topology: &Topology,
    x: &[f64],
    v: &[f64],
    out: &mut [f64],
) -> Result<(), GapViolation> {
    for n in 0..x.len() {
        let lead = topology.leader(n);
        let gap = topology.gap(n, x);
        out[n] = acceleration(params, road.profile(lanes[n]), gap, v[n], v[lead])
            .map_err(|_| (n, lead, gap))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
}

/// Time derivative of every position and velocity.
pub fn rhs(state: &TrafficState, params: &ModelParams, road: &RoadConfig) -> Result<StateDerivative> {
    let topology = Topology::from_state(state);
    let vehicles = state.vehicles();
    let x: Vec<f64> = vehicles.iter().map(|v| v.x).collect();
    let v: Vec<f64> = vehicles.iter().map(|v| v.v).collect();
    let lanes: Vec<usize> = vehicles.iter().map(|v| v.lane).collect();
    let mut dv = vec![0.0; x.len()];
    accelerations_into(params, road, &lanes, &topology, &x, &v, &mut dv).map_err(
        |(n, lead, gap)| Error::Collision {
            time: state.time(),
            follower: vehicles[n].id,
            leader: vehicles[lead].id,
            gap,
        },
    )?;
    Ok(StateDerivative { dx: v, dv })
}
