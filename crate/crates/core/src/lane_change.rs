//! Incentive and security criteria, target selection and the randomized
//! lane-change phase.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{acceleration, ModelParams, RoadConfig};
use crate::profile::VelocityProfile;
use crate::state::TrafficState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// The target lane does not offer a strictly larger acceleration.
    Incentive,
    /// A gap to the new successor or predecessor is within the security distance.
    Security,
    /// The vehicle has no successor in its own lane.
    NoLeader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

/// A neighbor as seen from the candidate vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub gap: f64,
    pub speed: f64,
}

/// Everything the change rules look at for one candidate and one target lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalView {
    pub speed: f64,
    pub own_successor: Option<Neighbor>,
    pub target_successor: Option<Neighbor>,
    /// Gap from the would-be predecessor in the target lane up to the candidate.
    pub target_predecessor_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOutcome {
    pub verdict: Verdict,
    /// `a_target - a_current`, when both accelerations are defined.
    pub margin: Option<f64>,
}

/// Applies the change rules, including the special cases for missing
/// neighbors:
///
/// * no successor in the own lane: stay;
/// * no successor and no predecessor in the target lane: change;
/// * no successor in the target lane: security criterion only;
/// * no predecessor in the target lane: incentive criterion only;
/// * otherwise both criteria must hold, with strict inequalities.
pub fn apply_rules(
    params: &ModelParams,
    own: &VelocityProfile,
    target: &VelocityProfile,
    view: &LocalView,
) -> RuleOutcome {
    let Some(current) = view.own_successor else {
        return RuleOutcome {
            verdict: Verdict::Reject(RejectReason::NoLeader),
            margin: None,
        };
    };
    let current_acc = acceleration(params, own, current.gap, view.speed, current.speed).ok();
    let margin = view.target_successor.and_then(|s| {
        let target_acc = acceleration(params, target, s.gap, view.speed, s.speed).ok()?;
        Some(target_acc - current_acc?)
    });
    let d_s = target.security_distance;

    let incentive = margin.is_some_and(|m| m > 0.0);
    let security = view.target_successor.map_or(true, |s| s.gap > d_s)
        && view.target_predecessor_gap.map_or(true, |g| g > d_s);

    let verdict = match (view.target_successor.is_some(), view.target_predecessor_gap.is_some()) {
        (false, false) => Verdict::Accept,
        (false, true) => judge(true, security),
        (true, false) => judge(incentive, true),
        (true, true) => judge(incentive, security),
    };
    RuleOutcome { verdict, margin }
}

fn judge(incentive: bool, security: bool) -> Verdict {
    if !incentive {
        Verdict::Reject(RejectReason::Incentive)
    } else if !security {
        Verdict::Reject(RejectReason::Security)
    } else {
        Verdict::Accept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeDecision {
    /// Index of the candidate in the state's vehicle list.
    pub vehicle: usize,
    pub from: usize,
    pub to: usize,
    pub margin: Option<f64>,
    /// Acceleration the candidate would have in the target lane.
    pub target_acceleration: f64,
    /// Gap to the new successor; `L` if the target lane is empty.
    pub successor_gap: f64,
    /// Gap from the new predecessor; `L` if the target lane is empty.
    pub predecessor_gap: f64,
    pub verdict: Verdict,
}

impl ChangeDecision {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }
}

fn local_view(state: &TrafficState, n: usize, target: usize) -> LocalView {
    let vehicles = state.vehicles();
    let me = &vehicles[n];
    let own_successor = state.successor(n, me.lane).map(|s| Neighbor {
        gap: if s == n { state.length() } else { state.offset(n, s) },
        speed: vehicles[s].v,
    });
    let target_successor = state.successor(n, target).map(|s| Neighbor {
        gap: state.offset(n, s),
        speed: vehicles[s].v,
    });
    let target_predecessor_gap = state.predecessor(n, target).map(|p| state.offset(p, n));
    LocalView {
        speed: me.v,
        own_successor,
        target_successor,
        target_predecessor_gap,
    }
}

/// Incentive criterion: whether the target lane offers a strictly larger
/// acceleration, with the margin `a_target - a_current`. `None` if either
/// acceleration is undefined (no target successor, or one level with the
/// candidate).
pub fn incentive_ok(
    state: &TrafficState,
    params: &ModelParams,
    road: &RoadConfig,
    n: usize,
    target: usize,
) -> Option<(bool, f64)> {
    let view = local_view(state, n, target);
    let own = road.profile(state.vehicles()[n].lane);
    let current = view.own_successor?;
    let s = view.target_successor?;
    let a_current = acceleration(params, own, current.gap, view.speed, current.speed).ok()?;
    let a_target = acceleration(params, road.profile(target), s.gap, view.speed, s.speed).ok()?;
    let margin = a_target - a_current;
    Some((margin > 0.0, margin))
}

/// Security criterion with the gaps `(to new successor, from new predecessor)`;
/// an empty target lane reports `(L, L)`.
pub fn security_ok(state: &TrafficState, road: &RoadConfig, n: usize, target: usize) -> (bool, f64, f64) {
    let view = local_view(state, n, target);
    let length = state.length();
    let ahead = view.target_successor.map_or(length, |s| s.gap);
    let behind = view.target_predecessor_gap.unwrap_or(length);
    let d_s = road.profile(target).security_distance;
    (ahead > d_s && behind > d_s, ahead, behind)
}

/// Full rule evaluation for moving vehicle `n` into `target`.
pub fn evaluate_change(
    state: &TrafficState,
    params: &ModelParams,
    road: &RoadConfig,
    n: usize,
    target: usize,
) -> ChangeDecision {
    let me = state.vehicles()[n];
    let view = local_view(state, n, target);
    let target_profile = road.profile(target);
    let outcome = apply_rules(params, road.profile(me.lane), target_profile, &view);
    let length = state.length();
    let (gap, lead_speed) = view
        .target_successor
        .map_or((length, me.v), |s| (s.gap, s.speed));
    let target_acceleration =
        acceleration(params, target_profile, gap, me.v, lead_speed).unwrap_or(f64::NEG_INFINITY);
    ChangeDecision {
        vehicle: n,
        from: me.lane,
        to: target,
        margin: outcome.margin,
        target_acceleration,
        successor_gap: view.target_successor.map_or(length, |s| s.gap),
        predecessor_gap: view.target_predecessor_gap.unwrap_or(length),
        verdict: outcome.verdict,
    }
}

/// Best accepted move to an adjacent lane: the one with the larger
/// target-lane acceleration, the faster lane on a tie.
pub fn best_target(
    state: &TrafficState,
    params: &ModelParams,
    road: &RoadConfig,
    n: usize,
) -> Option<ChangeDecision> {
    let lane = state.vehicles()[n].lane;
    let mut best: Option<ChangeDecision> = None;
    let candidates = [lane.checked_sub(1), Some(lane + 1).filter(|&l| l < state.lane_count())];
    for target in candidates.into_iter().flatten() {
        let decision = evaluate_change(state, params, road, n, target);
        if !decision.accepted() {
            continue;
        }
        best = match best {
            Some(b) if b.target_acceleration > decision.target_acceleration => Some(b),
            _ => Some(decision),
        };
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeEvent {
    pub time: f64,
    pub vehicle_id: usize,
    pub from: usize,
    pub to: usize,
    pub margin: Option<f64>,
}

/// Number of candidates for one step when `expected` are wanted on average:
/// the integer part, plus one more with probability equal to the fractional part.
pub fn candidate_budget<R: Rng + ?Sized>(rng: &mut R, expected: f64) -> usize {
    let whole = expected.floor();
    let frac = expected - whole;
    let extra = usize::from(frac > 0.0 && rng.gen::<f64>() < frac);
    whole as usize + extra
}

/// Draws `budget` distinct candidates uniformly and processes them in draw
/// order, each seeing the moves accepted before it. Candidates that stay
/// still still use up the budget.
///
/// Neighbor vectors must be current on entry; they are kept current.
pub fn lane_change_phase<R: Rng + ?Sized>(
    state: &mut TrafficState,
    params: &ModelParams,
    road: &RoadConfig,
    rng: &mut R,
    budget: usize,
) -> Result<Vec<LaneChangeEvent>> {
    let count = state.vehicle_count();
    let budget = budget.min(count);
    if budget == 0 || state.lane_count() < 2 {
        return Ok(Vec::new());
    }
    let mut events = Vec::new();
    for n in rand::seq::index::sample(rng, count, budget) {
        if let Some(decision) = best_target(state, params, road, n) {
            state.apply_lane_change(n, decision.to)?;
            events.push(LaneChangeEvent {
                time: state.time(),
                vehicle_id: state.vehicles()[n].id,
                from: decision.from,
                to: decision.to,
                margin: decision.margin,
            });
        }
    }
    Ok(events)
}
