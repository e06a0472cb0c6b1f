//! Ring-road traffic state and neighbor bookkeeping.
//!
//! Every vehicle carries, for every lane `k`, the index of the nearest
//! vehicle ahead (`next[k]`) and behind (`prev[k]`) in that lane. In its own
//! lane these are the cyclic successor and predecessor; a vehicle alone in
//! its lane is its own successor and predecessor. In another lane they are
//! the vehicles at the smallest forward and backward ring offset, counting a
//! vehicle level with it (offset zero) as both. An empty lane gives `None`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ring_offset, wrap_position};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    /// Stable identifier, kept across insertions and removals.
    pub id: usize,
    /// Unbounded position [m]; reduce with [`wrap_position`] for display.
    pub x: f64,
    pub v: f64,
    /// Zero-based lane index, 0 being the slowest lane.
    pub lane: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborVector {
    pub lane: usize,
    pub prev: Vec<Option<usize>>,
    pub next: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    time: f64,
    length: f64,
    vehicles: Vec<Vehicle>,
    lanes: Vec<Vec<usize>>,
    neighbors: Vec<NeighborVector>,
}

impl TrafficState {
    pub fn new(length: f64, lane_count: usize, vehicles: Vec<Vehicle>) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!("road length must be positive, got {length}")));
        }
        if lane_count == 0 {
            return Err(Error::Config("at least one lane is required".into()));
        }
        let mut state = Self {
            time: 0.0,
            length,
            vehicles,
            lanes: vec![Vec::new(); lane_count],
            neighbors: Vec::new(),
        };
        state.rebuild_neighbors()?;
        Ok(state)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn lane_count(&self) -> usize {
        self.lanes.len()
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn vehicle_count(&self) -> usize {
        self.vehicles.len()
    }

    /// Vehicle indices of `lane`, in increasing order of reduced position.
    pub fn lane(&self, lane: usize) -> &[usize] {
        &self.lanes[lane]
    }

    pub fn lane_counts(&self) -> Vec<usize> {
        self.lanes.iter().map(Vec::len).collect()
    }

    pub fn neighbors(&self) -> &[NeighborVector] {
        &self.neighbors
    }

    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.vehicles.iter().position(|v| v.id == id)
    }

    pub fn successor(&self, n: usize, lane: usize) -> Option<usize> {
        self.neighbors[n].next[lane]
    }

    pub fn predecessor(&self, n: usize, lane: usize) -> Option<usize> {
        self.neighbors[n].prev[lane]
    }

    /// Forward ring offset from vehicle `from` to vehicle `to`, in `[0, L)`.
    pub fn offset(&self, from: usize, to: usize) -> f64 {
        ring_offset(self.vehicles[from].x, self.vehicles[to].x, self.length)
    }

    /// Headway to the same-lane successor; `L` for a vehicle alone in its lane.
    pub fn headway(&self, n: usize) -> f64 {
        let lane = self.vehicles[n].lane;
        match self.neighbors[n].next[lane] {
            Some(s) if s != n => self.offset(n, s),
            _ => self.length,
        }
    }

    pub(crate) fn kinematics_mut(&mut self) -> impl Iterator<Item = &mut Vehicle> {
        self.vehicles.iter_mut()
    }

    /// Rebuilds the per-lane ordered index sets and every neighbor vector
    /// from the current positions.
    pub fn rebuild_neighbors(&mut self) -> Result<()> {
        let lane_count = self.lanes.len();
        let length = self.length;
        let reduced: Vec<f64> = self
            .vehicles
            .iter()
            .map(|v| wrap_position(v.x, length))
            .collect();

        let mut lanes: Vec<Vec<usize>> = vec![Vec::new(); lane_count];
        for (i, v) in self.vehicles.iter().enumerate() {
            if v.lane >= lane_count {
                return Err(Error::Config(format!(
                    "vehicle {} is in lane {} but the road has {lane_count} lanes",
                    v.id,
                    v.lane + 1
                )));
            }
            if !(v.x.is_finite() && v.v.is_finite()) {
                return Err(Error::Config(format!("vehicle {} has a non-finite state", v.id)));
            }
            lanes[v.lane].push(i);
        }
        for (k, members) in lanes.iter_mut().enumerate() {
            members.sort_by(|&a, &b| reduced[a].total_cmp(&reduced[b]));
            for pair in members.windows(2) {
                if reduced[pair[0]] == reduced[pair[1]] {
                    return Err(Error::DegenerateOrdering {
                        lane: k,
                        first: self.vehicles[pair[0]].id,
                        second: self.vehicles[pair[1]].id,
                        position: reduced[pair[0]],
                    });
                }
            }
        }

        let mut rank = vec![0usize; self.vehicles.len()];
        for members in &lanes {
            for (pos, &i) in members.iter().enumerate() {
                rank[i] = pos;
            }
        }

        let sorted_positions: Vec<Vec<f64>> = lanes
            .iter()
            .map(|m| m.iter().map(|&i| reduced[i]).collect())
            .collect();

        self.neighbors = self
            .vehicles
            .iter()
            .enumerate()
            .map(|(n, veh)| {
                let mut prev = vec![None; lane_count];
                let mut next = vec![None; lane_count];
                for k in 0..lane_count {
                    let members = &lanes[k];
                    let len = members.len();
                    if len == 0 {
                        continue;
                    }
                    if veh.lane == k {
                        let pos = rank[n];
                        next[k] = Some(members[(pos + 1) % len]);
                        prev[k] = Some(members[(pos + len - 1) % len]);
                    } else {
                        let positions = &sorted_positions[k];
                        let r = reduced[n];
                        let ahead = positions.partition_point(|&p| p < r);
                        next[k] = Some(members[ahead % len]);
                        let at_or_behind = positions.partition_point(|&p| p <= r);
                        prev[k] = Some(members[(at_or_behind + len - 1) % len]);
                    }
                }
                NeighborVector {
                    lane: veh.lane,
                    prev,
                    next,
                }
            })
            .collect();
        self.lanes = lanes;
        Ok(())
    }

    /// Moves vehicle `n` into `target`, keeping its position and velocity,
    /// and patches only the neighbor entries the move invalidates.
    ///
    /// Requires neighbor vectors that are current for the present positions.
    pub fn apply_lane_change(&mut self, n: usize, target: usize) -> Result<()> {
        let from = self.vehicles[n].lane;
        if target >= self.lanes.len() {
            return Err(Error::Config(format!("lane {} does not exist", target + 1)));
        }
        if target == from {
            return Ok(());
        }
        let length = self.length;
        let x_n = self.vehicles[n].x;
        let r_n = wrap_position(x_n, length);

        let ahead_new = self.neighbors[n].next[target];
        let behind_new = self.neighbors[n].prev[target];
        if let Some(s) = ahead_new {
            if wrap_position(self.vehicles[s].x, length) == r_n {
                return Err(Error::DegenerateOrdering {
                    lane: target,
                    first: self.vehicles[s].id,
                    second: self.vehicles[n].id,
                    position: r_n,
                });
            }
        }

        let ahead_old = self.neighbors[n].next[from].filter(|&s| s != n);
        let behind_old = self.neighbors[n].prev[from].filter(|&p| p != n);

        // Leave the old lane.
        let pos = self.lanes[from]
            .iter()
            .position(|&i| i == n)
            .expect("vehicle listed in its lane");
        self.lanes[from].remove(pos);
        for (m, nb) in self.neighbors.iter_mut().enumerate() {
            if m == n {
                continue;
            }
            if nb.next[from] == Some(n) {
                nb.next[from] = ahead_old;
            }
            if nb.prev[from] == Some(n) {
                nb.prev[from] = behind_old;
            }
        }

        // Join the new lane.
        match (ahead_new, behind_new) {
            (Some(s), Some(p)) => {
                let x_s = self.vehicles[s].x;
                let x_p = self.vehicles[p].x;
                for m in 0..self.vehicles.len() {
                    if m == n {
                        continue;
                    }
                    let x_m = self.vehicles[m].x;
                    let in_target = self.vehicles[m].lane == target;
                    let nb = &mut self.neighbors[m];
                    if in_target {
                        if m == p {
                            nb.next[target] = Some(n);
                        }
                        if m == s {
                            nb.prev[target] = Some(n);
                        }
                    } else {
                        if nb.next[target] == Some(s)
                            && ring_offset(x_m, x_n, length) < ring_offset(x_m, x_s, length)
                        {
                            nb.next[target] = Some(n);
                        }
                        if nb.prev[target] == Some(p)
                            && ring_offset(x_n, x_m, length) < ring_offset(x_p, x_m, length)
                        {
                            nb.prev[target] = Some(n);
                        }
                    }
                }
            }
            _ => {
                for (m, nb) in self.neighbors.iter_mut().enumerate() {
                    if m != n {
                        nb.next[target] = Some(n);
                        nb.prev[target] = Some(n);
                    }
                }
            }
        }
        let reduced: Vec<f64> = self.lanes[target]
            .iter()
            .map(|&i| wrap_position(self.vehicles[i].x, length))
            .collect();
        let slot = reduced.partition_point(|&p| p < r_n);
        self.lanes[target].insert(slot, n);

        let nb = &mut self.neighbors[n];
        nb.lane = target;
        nb.next[from] = ahead_old;
        nb.prev[from] = behind_old;
        nb.next[target] = ahead_new.or(Some(n));
        nb.prev[target] = behind_new.or(Some(n));
        self.vehicles[n].lane = target;
        Ok(())
    }
}
