//! Multi-lane steady states and the headway perturbations that trigger
//! lane changes away from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::bisect;
use crate::profile::VelocityProfile;

/// Tolerance, in metres, of every equilibrium headway.
pub const HEADWAY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    /// Uniform headway of each lane [m].
    pub headways: Vec<f64>,
    /// `L / h_j`; empty when no road length is involved.
    pub occupancy: Vec<f64>,
    /// Nearest integer to each occupancy.
    pub counts: Vec<usize>,
    /// Common speed `V_j(h_j)` [m/s].
    pub speed: f64,
}

impl EquilibriumSolution {
    fn with_length(headways: Vec<f64>, speed: f64, length: Option<f64>) -> Self {
        let occupancy: Vec<f64> = match length {
            Some(l) => headways.iter().map(|h| l / h).collect(),
            None => Vec::new(),
        };
        let counts = occupancy.iter().map(|o| o.round() as usize).collect();
        Self {
            headways,
            occupancy,
            counts,
            speed,
        }
    }

    pub fn lane_count(&self) -> usize {
        self.headways.len()
    }
}

/// Equal-speed headways `h_j = V_j^{-1}(V_1(h1))` for every lane.
pub fn chain_equilibrium(h1: f64, profiles: &[VelocityProfile]) -> Result<EquilibriumSolution> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::Config("no lanes".into()))?;
    let speed = first.velocity(h1)?;
    let mut headways = vec![h1];
    for p in &profiles[1..] {
        headways.push(p.invert(speed)?);
    }
    Ok(EquilibriumSolution::with_length(headways, speed, None))
}

fn chain_with_length(h1: f64, profiles: &[VelocityProfile], length: f64) -> Result<EquilibriumSolution> {
    let eq = chain_equilibrium(h1, profiles)?;
    Ok(EquilibriumSolution::with_length(eq.headways, eq.speed, Some(length)))
}

/// Expands `[lo, lo + width]` until `f` changes sign, then bisects.
fn bracket_and_bisect<F: Fn(f64) -> f64>(f: F, lo: f64, what: &str) -> Result<f64> {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    let mut width = lo.max(1.0);
    for _ in 0..200 {
        let hi = lo + width;
        let f_hi = f(hi);
        if f_hi.signum() != f_lo.signum() {
            return bisect(&f, lo, hi, HEADWAY_TOLERANCE);
        }
        width *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::NoEquilibrium(what.to_string()))
}

/// Two-lane steady state with `n` vehicles on a ring of length `length`:
/// the root of `V_1(h_1) = V_2(L h_1 / (N h_1 - L))`.
pub fn two_lane_equilibrium(n: usize, length: f64, profiles: &[VelocityProfile]) -> Result<EquilibriumSolution> {
    if profiles.len() != 2 {
        return Err(Error::Config(format!("expected two lanes, got {}", profiles.len())));
    }
    if n < 2 {
        return Err(Error::NoEquilibrium(format!("{n} vehicles cannot fill two lanes")));
    }
    let (slow, fast) = (&profiles[0], &profiles[1]);
    let nf = n as f64;
    let partner = |h1: f64| length * h1 / (nf * h1 - length);
    // Strictly increasing in h1 on (L/N, inf).
    let mismatch = |h1: f64| slow.velocity_unchecked(h1) - fast.velocity_unchecked(partner(h1));
    let lo = length / nf * (1.0 + 1e-12);
    let h1 = bracket_and_bisect(mismatch, lo, "lane speeds never match")?;
    let h2 = partner(h1);
    let speed = slow.velocity_unchecked(h1);
    if !(speed > 0.0 && speed < slow.v_max()) {
        return Err(Error::NoEquilibrium(format!("common speed {speed} outside (0, V_max of lane 1)")));
    }
    Ok(EquilibriumSolution::with_length(vec![h1, h2], speed, Some(length)))
}

/// Steady state of any number of lanes holding `n` vehicles in total:
/// bisection on `h_1` for `sum_j L / h_j(h_1) = N` along the equal-speed chain.
pub fn multi_lane_equilibrium(n: usize, length: f64, profiles: &[VelocityProfile]) -> Result<EquilibriumSolution> {
    if profiles.len() < 2 {
        return Err(Error::Config("need at least two lanes".into()));
    }
    let slow = &profiles[0];
    let start = slow
        .branch_start()
        .ok_or_else(|| Error::NoEquilibrium("slowest lane has zero speed everywhere".into()))?;
    let v_cap = profiles.iter().map(VelocityProfile::v_max).fold(f64::INFINITY, f64::min);
    let target = n as f64;
    // Occupancy minus N, decreasing in h1. Off the chain's domain, speeds at
    // the bottom of the range read as "too many vehicles fit", speeds at the
    // top as "too few".
    let excess = |h1: f64| -> f64 {
        let speed = slow.velocity_unchecked(h1);
        if speed <= 0.0 {
            return f64::INFINITY;
        }
        if speed >= v_cap {
            return -target;
        }
        match chain_equilibrium(h1, profiles) {
            Ok(eq) => eq.headways.iter().map(|h| length / h).sum::<f64>() - target,
            Err(_) => f64::NAN,
        }
    };
    let lo = start * (1.0 + 1e-12) + 1e-12;
    if !(excess(lo) > 0.0) {
        return Err(Error::NoEquilibrium(format!("{n} vehicles exceed the densest equal-speed packing")));
    }
    let h1 = bracket_and_bisect(excess, lo, "occupancy never drops to N")?;
    chain_with_length(h1, profiles, length)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// Lane whose headways are perturbed by `epsilon` (zero-based).
    pub perturbed_lane: usize,
    /// Lane the perturbed lane's vehicles would move to.
    pub target_lane: usize,
    /// Exact threshold: outflow happens for `epsilon` below it [m].
    pub exact: f64,
    /// First-order approximation of `exact` [m].
    pub first_order: f64,
    /// Inflow from the target lane needs `epsilon` above this [m].
    pub positive: f64,
}

/// Thresholds for a uniform perturbation `epsilon` of the headways of
/// `perturbed` around the steady state `eq`, for moves to `target`.
///
/// With `d = h_t - d_s` (the widest admissible gap in the target lane) and
/// `g = gamma / d^2`:
///
/// ```text
/// exact       = V_p^{-1}((V_t(d) + g V_t(h_t)) / (1 + g)) - h_p
/// first_order = (V_t(d) - V_t(h_t)) / ((1 + g) V_p'(h_p))
/// ```
pub fn outflow_threshold(
    params: &ModelParams,
    eq: &EquilibriumSolution,
    profiles: &[VelocityProfile],
    perturbed: usize,
    target: usize,
) -> Result<ThresholdReport> {
    if perturbed >= eq.lane_count() || target >= eq.lane_count() || profiles.len() != eq.lane_count() {
        return Err(Error::Config("lane index outside the equilibrium".into()));
    }
    let (p, t) = (&profiles[perturbed], &profiles[target]);
    let (h_p, h_t) = (eq.headways[perturbed], eq.headways[target]);
    let d_s = t.security_distance;
    let widest = h_t - d_s;
    if !(widest > 0.0) {
        return Err(Error::Domain { what: "admissible gap", value: widest });
    }
    let weight = params.gamma() / (widest * widest);
    let v_widest = t.velocity(widest)?;
    let v_target = t.velocity(h_t)?;
    let blended = (v_widest + weight * v_target) / (1.0 + weight);
    let exact = p.invert(blended)? - h_p;
    let first_order = (v_widest - v_target) / ((1.0 + weight) * p.velocity_derivative(h_p)?);
    Ok(ThresholdReport {
        perturbed_lane: perturbed,
        target_lane: target,
        exact,
        first_order,
        positive: d_s,
    })
}

/// Perturbation of the slow lane of a two-lane steady state, moves to the fast lane.
pub fn threshold_slow_lane(
    params: &ModelParams,
    eq: &EquilibriumSolution,
    profiles: &[VelocityProfile],
) -> Result<ThresholdReport> {
    outflow_threshold(params, eq, profiles, 0, 1)
}

/// Perturbation of the fast lane of a two-lane steady state, moves to the slow lane.
pub fn threshold_fast_lane(
    params: &ModelParams,
    eq: &EquilibriumSolution,
    profiles: &[VelocityProfile],
) -> Result<ThresholdReport> {
    outflow_threshold(params, eq, profiles, 1, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiddleLaneThresholds {
    /// Moves from either outer lane into the middle need `epsilon` above this.
    pub inflow: f64,
    pub to_slower: ThresholdReport,
    pub to_faster: ThresholdReport,
}

/// Thresholds for a perturbation of the middle lane of a three-lane steady state.
pub fn middle_lane_thresholds(
    params: &ModelParams,
    eq: &EquilibriumSolution,
    profiles: &[VelocityProfile],
) -> Result<MiddleLaneThresholds> {
    if eq.lane_count() != 3 {
        return Err(Error::Config(format!("expected three lanes, got {}", eq.lane_count())));
    }
    let to_slower = outflow_threshold(params, eq, profiles, 1, 0)?;
    let to_faster = outflow_threshold(params, eq, profiles, 1, 2)?;
    Ok(MiddleLaneThresholds {
        inflow: to_slower.positive.max(to_faster.positive),
        to_slower,
        to_faster,
    })
}
