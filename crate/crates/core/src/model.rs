//! Model parameters, road geometry and the acceleration law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::VelocityProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Relaxation rate towards the optimal velocity [1/s].
    #[serde(rename = "alpha_per_s")]
    pub alpha: f64,
    /// Follow-the-leader coefficient [m^2/s].
    #[serde(rename = "beta_m2_per_s")]
    pub beta: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let params = Self { alpha, beta };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be non-negative, got {}", self.beta)));
        }
        Ok(())
    }

    /// `beta / alpha` [m^2].
    pub fn gamma(&self) -> f64 {
        self.beta / self.alpha
    }
}

/// Ring road of a given length with one velocity profile per lane,
/// ordered from the slowest lane (index 0) to the fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadConfig {
    #[serde(rename = "length_m")]
    pub length: f64,
    pub profiles: Vec<VelocityProfile>,
}

impl RoadConfig {
    pub fn new(length: f64, profiles: Vec<VelocityProfile>) -> Result<Self> {
        let road = Self { length, profiles };
        road.validate()?;
        Ok(road)
    }

    pub fn single_lane(length: f64, profile: VelocityProfile) -> Result<Self> {
        Self::new(length, vec![profile])
    }

    pub fn lane_count(&self) -> usize {
        self.profiles.len()
    }

    pub fn profile(&self, lane: usize) -> &VelocityProfile {
        &self.profiles[lane]
    }

    /// Checks the length, every profile, and that slower lanes never
    /// prescribe a higher speed than faster ones (sampled on a grid up to the
    /// road length).
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::Config(format!("road length must be positive, got {}", self.length)));
        }
        if self.profiles.is_empty() {
            return Err(Error::Config("road needs at least one lane".into()));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        const SAMPLES: usize = 4096;
        for (i, pair) in self.profiles.windows(2).enumerate() {
            for s in 1..=SAMPLES {
                let gap = self.length * s as f64 / SAMPLES as f64;
                let slow = pair[0].velocity_unchecked(gap);
                let fast = pair[1].velocity_unchecked(gap);
                if slow > fast + 1e-12 {
                    return Err(Error::Config(format!(
                        "lane {} is faster than lane {} at gap {gap} m",
                        i + 1,
                        i + 2
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Position reduced onto `[0, length)`.
pub fn wrap_position(x: f64, length: f64) -> f64 {
    let r = x.rem_euclid(length);
    if r >= length {
        0.0
    } else {
        r
    }
}

/// Forward distance from `from` to `to` on the ring, in `[0, length)`.
pub fn ring_offset(from: f64, to: f64, length: f64) -> f64 {
    let d = wrap_position(to, length) - wrap_position(from, length);
    if d >= 0.0 {
        d
    } else {
        d + length
    }
}

/// Forward gap from `x_from` to `x_to` on a ring of length `length`.
///
/// Coincident positions give a full loop, `length`: that is the headway of a
/// vehicle alone in its lane, which follows itself.
pub fn ring_gap(x_from: f64, x_to: f64, length: f64) -> f64 {
    let d = ring_offset(x_from, x_to, length);
    if d == 0.0 {
        length
    } else {
        d
    }
}

/// `alpha (V(gap) - v_self) + beta (v_lead - v_self) / gap^2`.
pub fn acceleration(
    params: &ModelParams,
    profile: &VelocityProfile,
    gap: f64,
    v_self: f64,
    v_lead: f64,
) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::NonPositiveGap { gap });
    }
    Ok(params.alpha * (profile.velocity_unchecked(gap) - v_self)
        + params.beta * (v_lead - v_self) / (gap * gap))
}
