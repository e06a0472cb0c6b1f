//! Machine-readable analysis reports. Lanes are numbered from 1.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{outflow_threshold, EquilibriumSolution};
use crate::error::Result;
use crate::model::{ModelParams, RoadConfig};
use crate::profile::VelocityProfile;
use crate::scenario::{build_initial_state, ScenarioConfig};
use crate::stability::{classify_stability, growth_rates, stable_ranges, Interval, Stability, DEFAULT_GRID};

/// Inclusive range of vehicle counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrowth {
    pub vehicles: usize,
    pub headway_m: f64,
    pub max_growth_rate_per_s: f64,
    /// Largest root real part of modes `k = 1 .. N-1`, in order.
    pub growth_rates_per_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneStability {
    pub lane: usize,
    pub stable_headways_m: Vec<Interval>,
    /// Counts `N` whose uniform headway `L / N` is stable, up to the
    /// number of vehicle lengths that fit on the ring.
    pub stable_vehicle_counts: Vec<CountRange>,
    /// Mode growth rates at the lane's initial occupancy; absent for fewer
    /// than two vehicles.
    pub growth: Option<ModeGrowth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub perturbed_lane: usize,
    pub target_lane: usize,
    pub exact_m: f64,
    pub first_order_m: f64,
    /// Moves from the target lane into the perturbed one need `epsilon` above this.
    pub positive_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsReport {
    pub equilibrium: EquilibriumSolution,
    /// One entry per ordered pair of adjacent lanes.
    pub entries: Vec<ThresholdEntry>,
}

impl ThresholdsReport {
    pub fn entry(&self, perturbed_lane: usize, target_lane: usize) -> Option<&ThresholdEntry> {
        self.entries
            .iter()
            .find(|e| e.perturbed_lane == perturbed_lane && e.target_lane == target_lane)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub input: ScenarioConfig,
    pub lanes: Vec<LaneStability>,
    pub thresholds: Option<ThresholdsReport>,
}

pub fn stable_counts(params: &ModelParams, profile: &VelocityProfile, length: f64) -> Vec<CountRange> {
    let n_max = (length / profile.vehicle_length).floor().max(1.0) as usize;
    let mut out: Vec<CountRange> = Vec::new();
    for n in 1..=n_max {
        if classify_stability(params, profile, length / n as f64) != Stability::Stable {
            continue;
        }
        match out.last_mut() {
            Some(r) if r.max + 1 == n => r.max = n,
            _ => out.push(CountRange { min: n, max: n }),
        }
    }
    out
}

pub fn lane_stability(
    params: &ModelParams,
    road: &RoadConfig,
    lane: usize,
    vehicles: usize,
) -> Result<LaneStability> {
    let profile = road.profile(lane);
    let length = road.length;
    let h_min = (length / (length / profile.vehicle_length).floor().max(1.0)).min(length / 2.0);
    let growth = if vehicles >= 2 {
        let h = length / vehicles as f64;
        let rates = growth_rates(params, profile, h, vehicles)?;
        Some(ModeGrowth {
            vehicles,
            headway_m: h,
            max_growth_rate_per_s: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            growth_rates_per_s: rates,
        })
    } else {
        None
    };
    Ok(LaneStability {
        lane: lane + 1,
        stable_headways_m: stable_ranges(params, profile, h_min, length, DEFAULT_GRID)?,
        stable_vehicle_counts: stable_counts(params, profile, length),
        growth,
    })
}

/// Thresholds around `eq` for every perturbed lane and each adjacent target.
pub fn thresholds_around(
    params: &ModelParams,
    road: &RoadConfig,
    eq: EquilibriumSolution,
) -> Result<ThresholdsReport> {
    let lanes = road.lane_count();
    let mut entries = Vec::new();
    for p in 0..lanes {
        let targets = [p.checked_sub(1), (p + 1 < lanes).then_some(p + 1)];
        for t in targets.into_iter().flatten() {
            let r = outflow_threshold(params, &eq, &road.profiles, p, t)?;
            entries.push(ThresholdEntry {
                perturbed_lane: p + 1,
                target_lane: t + 1,
                exact_m: r.exact,
                first_order_m: r.first_order,
                positive_m: r.positive,
            });
        }
    }
    Ok(ThresholdsReport { equilibrium: eq, entries })
}

pub fn thresholds_report(cfg: &ScenarioConfig) -> Result<ThresholdsReport> {
    thresholds_around(&cfg.model, &cfg.road, cfg.reference_equilibrium()?)
}

/// Per-lane stability at the configured initial occupancy (after the
/// `t = 0` perturbations) and, on multi-lane roads, the threshold table.
pub fn stability_report(cfg: &ScenarioConfig) -> Result<StabilityReport> {
    let state = build_initial_state(cfg)?;
    let lanes = state
        .lane_counts()
        .into_iter()
        .enumerate()
        .map(|(j, n)| lane_stability(&cfg.model, &cfg.road, j, n))
        .collect::<Result<Vec<_>>>()?;
    let thresholds = if cfg.road.lane_count() > 1 { Some(thresholds_report(cfg)?) } else { None };
    Ok(StabilityReport { input: cfg.clone(), lanes, thresholds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::IntegratorConfig;
    use crate::scenario::{HeadwayShift, InitialCondition, OutputConfig, Perturbation};

    fn config(road: RoadConfig, model: ModelParams, vehicles: usize) -> ScenarioConfig {
        ScenarioConfig {
            road,
            model,
            integrator: IntegratorConfig { dt: 0.1, t_final: 1.0, seed: 1, lane_changes_per_s: 1.0, stride: 1 },
            initial: InitialCondition::GlobalEquilibrium { vehicles, perturbation: None },
            perturbations: Vec::new(),
            output: OutputConfig::default(),
        }
    }

    fn single_lane_ht(vehicles: usize) -> ScenarioConfig {
        config(
            RoadConfig::single_lane(1500.0, VelocityProfile::helbing_tilch()).unwrap(),
            ModelParams::new(1.0, 100.0).unwrap(),
            vehicles,
        )
    }

    #[test]
    fn single_lane_count_ranges() {
        let report = stability_report(&single_lane_ht(120)).unwrap();
        let ranges = &report.lanes[0].stable_vehicle_counts;
        assert_eq!(ranges.len(), 2);
        assert_eq!(ranges[0].min, 1);
        assert!(ranges[0].max.abs_diff(67) <= 1, "{ranges:?}");
        assert!(ranges[1].min.abs_diff(101) <= 1, "{ranges:?}");
        assert_eq!(ranges[1].max, 300);
        assert!(report.thresholds.is_none());
        let g = report.lanes[0].growth.as_ref().unwrap();
        assert_eq!(g.growth_rates_per_s.len(), 119);
        assert!(g.max_growth_rate_per_s < 0.0);
    }

    #[test]
    fn counts_agree_with_headway_intervals() {
        let report = stability_report(&single_lane_ht(90)).unwrap();
        let lane = &report.lanes[0];
        for n in 1..=300usize {
            let h = 1500.0 / n as f64;
            let by_count = lane.stable_vehicle_counts.iter().any(|r| r.min <= n && n <= r.max);
            let by_headway = lane.stable_headways_m.iter().any(|i| i.lo < h && h < i.hi);
            if by_count != by_headway {
                // Only possible within the bisection tolerance of an edge.
                let near = lane
                    .stable_headways_m
                    .iter()
                    .any(|i| (i.lo - h).abs() < 1e-5 || (i.hi - h).abs() < 1e-5);
                assert!(near, "N = {n}");
            }
        }
        assert!(lane.growth.as_ref().unwrap().max_growth_rate_per_s > 0.0);
    }

    #[test]
    fn insertion_changes_the_analyzed_count() {
        let mut cfg = single_lane_ht(120);
        cfg.perturbations.push(Perturbation::Insert { lane: 1 });
        let report = stability_report(&cfg).unwrap();
        assert_eq!(report.lanes[0].growth.as_ref().unwrap().vehicles, 121);
    }

    #[test]
    fn two_lane_thresholds_table() {
        let base = VelocityProfile::soft_ramp();
        let mut cfg = config(
            RoadConfig::new(1500.0, vec![base, base.scaled(2.0)]).unwrap(),
            ModelParams::new(5.0, 100.0).unwrap(),
            100,
        );
        cfg.initial = InitialCondition::GlobalEquilibrium {
            vehicles: 100,
            perturbation: Some(HeadwayShift { lane: 1, epsilon_m: -16.59 }),
        };
        let report = stability_report(&cfg).unwrap();
        assert_eq!(report.lanes[0].growth.as_ref().unwrap().vehicles, 52);
        assert!(report.lanes.iter().all(|l| l.stable_vehicle_counts == vec![CountRange { min: 1, max: 300 }]));
        let t = report.thresholds.unwrap();
        assert_eq!(t.entries.len(), 2);
        let slow = t.entry(1, 2).unwrap();
        assert!((slow.first_order_m - -16.5).abs() < 0.07 * 16.5);
        assert_eq!(slow.positive_m, 5.0);
        assert!(t.entry(2, 1).is_some());
        assert!(t.entry(1, 3).is_none());
    }

    #[test]
    fn reports_round_trip() {
        let base = VelocityProfile::soft_ramp();
        let cfg = config(
            RoadConfig::new(1500.0, vec![base, base.scaled(1.5), base.scaled(2.0)]).unwrap(),
            ModelParams::new(5.0, 100.0).unwrap(),
            141,
        );
        let report = stability_report(&cfg).unwrap();
        assert_eq!(report.thresholds.as_ref().unwrap().entries.len(), 4);
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: StabilityReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);

        let single = stability_report(&single_lane_ht(80)).unwrap();
        let back: StabilityReport = serde_json::from_str(&serde_json::to_string(&single).unwrap()).unwrap();
        assert_eq!(back, single);
    }
}
