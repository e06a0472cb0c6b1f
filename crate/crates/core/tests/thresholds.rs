//! The outflow thresholds against the lane-change rules and the simulator.

use proptest::prelude::*;
use traffic_core::equilibrium::{outflow_threshold, two_lane_equilibrium};
use traffic_core::lane_change::evaluate_change;
use traffic_core::scenario::{HeadwayShift, InitialCondition, OutputConfig};
use traffic_core::{
    build_initial_state, simulate, EquilibriumSolution, IntegratorConfig, ModelParams, RoadConfig, ScenarioConfig,
    TrafficState, Vehicle, VelocityProfile,
};

const LENGTH: f64 = 1500.0;
/// How far the probe sits inside the admissible target gap [m].
const INSET: f64 = 1e-9;
/// Perturbations this close to a threshold are not probed [m].
const EXCLUDED: f64 = 1e-3;

fn profiles() -> Vec<VelocityProfile> {
    let base = VelocityProfile::soft_ramp();
    vec![base, base.scaled(2.0)]
}

fn params() -> ModelParams {
    ModelParams::new(5.0, 100.0).unwrap()
}

fn equilibrium() -> EquilibriumSolution {
    two_lane_equilibrium(100, LENGTH, &profiles()).unwrap()
}

/// Lane `perturbed` filled uniformly at `h_p + epsilon`, and two target-lane
/// vehicles at steady speed placed so that vehicle 0 sees the widest gap
/// ahead that security still admits.
fn probe_state(eq: &EquilibriumSolution, perturbed: usize, target: usize, epsilon: f64) -> TrafficState {
    let profiles = profiles();
    let spacing = eq.headways[perturbed] + epsilon;
    let count = 20;
    let length = spacing * count as f64;
    let v = profiles[perturbed].velocity(spacing).unwrap();
    let mut vehicles: Vec<Vehicle> = (0..count)
        .map(|i| Vehicle { id: i + 1, x: i as f64 * spacing, v, lane: perturbed })
        .collect();
    let h_t = eq.headways[target];
    let ahead = h_t - profiles[target].security_distance - INSET;
    for (k, x) in [ahead, ahead - h_t].into_iter().enumerate() {
        vehicles.push(Vehicle { id: count + 1 + k, x: x.rem_euclid(length), v: eq.speed, lane: target });
    }
    TrafficState::new(length, 2, vehicles).unwrap()
}

fn check_probe(perturbed: usize, target: usize, offset: f64) -> std::result::Result<(), TestCaseError> {
    let eq = equilibrium();
    let exact = outflow_threshold(&params(), &eq, &profiles(), perturbed, target).unwrap().exact;
    let epsilon = exact + offset;
    prop_assume!(offset.abs() > EXCLUDED);
    let state = probe_state(&eq, perturbed, target, epsilon);
    let road = RoadConfig::new(state.length(), profiles()).unwrap();
    let decision = evaluate_change(&state, &params(), &road, 0, target);
    prop_assert_eq!(decision.accepted(), epsilon < exact, "epsilon {} exact {}", epsilon, exact);
    Ok(())
}

proptest! {
    #[test]
    fn slow_lane_moves_iff_below_threshold(offset in -8.0f64..8.0) {
        check_probe(0, 1, offset)?;
    }

    #[test]
    fn fast_lane_moves_iff_below_threshold(offset in -5.0f64..5.0) {
        check_probe(1, 0, offset)?;
    }
}

/// Lane-1 perturbation actually realized by the rounded initial state.
fn realized(cfg: &ScenarioConfig, eq: &EquilibriumSolution) -> f64 {
    let counts = cfg.initial_counts().unwrap();
    LENGTH / counts[0] as f64 - eq.headways[0]
}

fn events_for(epsilon: f64, t_final: f64) -> (f64, usize) {
    let cfg = ScenarioConfig {
        road: RoadConfig::new(LENGTH, profiles()).unwrap(),
        model: params(),
        integrator: IntegratorConfig { dt: 0.1, t_final, seed: 1, lane_changes_per_s: 1.0, stride: 100 },
        initial: InitialCondition::GlobalEquilibrium {
            vehicles: 100,
            perturbation: Some(HeadwayShift { lane: 1, epsilon_m: epsilon }),
        },
        perturbations: Vec::new(),
        output: OutputConfig::default(),
    };
    let state = build_initial_state(&cfg).unwrap();
    let out = simulate(&state, &cfg.model, &cfg.road, &cfg.integrator).unwrap();
    (realized(&cfg, &equilibrium()), out.trajectory.events.len())
}

#[test]
fn no_moves_between_the_thresholds() {
    let eq = equilibrium();
    let exact = outflow_threshold(&params(), &eq, &profiles(), 0, 1).unwrap().exact;
    let d_s = profiles()[0].security_distance;
    for nominal in [-12.0, -8.0, -3.0, 0.0, 2.0] {
        let (eps, events) = events_for(nominal, 200.0);
        assert!(exact < eps && eps < d_s, "realized {eps}");
        assert_eq!(events, 0, "epsilon {eps}");
    }
}

#[test]
fn moves_below_the_threshold() {
    let eq = equilibrium();
    let exact = outflow_threshold(&params(), &eq, &profiles(), 0, 1).unwrap().exact;
    let (eps, events) = events_for(-16.59, 200.0);
    assert!(eps < exact);
    assert!(events > 0);
}
