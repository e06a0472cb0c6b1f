//! Optimal-velocity profiles.
//!
//! A profile maps the headway to the desired speed through a shifted and
//! scaled hyperbolic tangent, clamped to zero below the security distance
//! and wherever the tangent expression turns negative:
//!
//! ```text
//! V(g) = scale * max(0, v_off + v_amp * tanh(c1 * (g - l_c) - c2))   for g > d_s
//! V(g) = 0                                                           for g <= d_s
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Absolute tolerance, in metres, used when inverting a profile.
pub const INVERSION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    #[serde(rename = "v_off_m_per_s")]
    pub v_off: f64,
    #[serde(rename = "v_amp_m_per_s")]
    pub v_amp: f64,
    #[serde(rename = "c1_per_m")]
    pub c1: f64,
    pub c2: f64,
    #[serde(rename = "vehicle_length_m")]
    pub vehicle_length: f64,
    #[serde(rename = "security_distance_m")]
    pub security_distance: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl VelocityProfile {
    /// Helbing–Tilch calibration of the optimal-velocity model
    /// (`V_max = 14.66 m/s`), with a 5 m vehicle length and security distance.
    pub fn helbing_tilch() -> Self {
        Self {
            v_off: 6.75,
            v_amp: 7.91,
            c1: 0.13,
            c2: 1.57,
            vehicle_length: 5.0,
            security_distance: 5.0,
            scale: 1.0,
        }
    }

    /// `5 tanh(0.02 (g - 5))` above a 5 m security distance. Gentle enough
    /// that a single lane is linearly stable at every density for the usual
    /// `alpha = 5, beta = 100`.
    pub fn soft_ramp() -> Self {
        Self {
            v_off: 0.0,
            v_amp: 5.0,
            c1: 0.02,
            c2: 0.0,
            vehicle_length: 5.0,
            security_distance: 5.0,
            scale: 1.0,
        }
    }

    /// The same profile with its scale multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("v_off", self.v_off),
            ("v_amp", self.v_amp),
            ("c1", self.c1),
            ("c2", self.c2),
            ("vehicle_length", self.vehicle_length),
            ("security_distance", self.security_distance),
            ("scale", self.scale),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::Config(format!("profile {name} is not finite")));
            }
        }
        if self.v_amp <= 0.0 {
            return Err(Error::Config("profile v_amp must be positive".into()));
        }
        if self.c1 <= 0.0 {
            return Err(Error::Config("profile c1 must be positive".into()));
        }
        if self.scale <= 0.0 {
            return Err(Error::Config("profile scale must be positive".into()));
        }
        if self.security_distance < 0.0 {
            return Err(Error::Config("security distance must be non-negative".into()));
        }
        Ok(())
    }

    /// Upper bound of the profile, reached as the gap grows without bound.
    pub fn v_max(&self) -> f64 {
        (self.scale * (self.v_off + self.v_amp)).max(0.0)
    }

    fn argument(&self, gap: f64) -> f64 {
        self.c1 * (gap - self.vehicle_length) - self.c2
    }

    fn inner(&self, gap: f64) -> f64 {
        self.v_off + self.v_amp * self.argument(gap).tanh()
    }

    /// Start of the strictly increasing branch: the larger of the security
    /// distance and the gap where the tangent expression crosses zero.
    /// `None` if the profile is identically zero.
    pub fn branch_start(&self) -> Option<f64> {
        let ratio = -self.v_off / self.v_amp;
        if ratio >= 1.0 {
            return None;
        }
        let crossing = if ratio <= -1.0 {
            f64::NEG_INFINITY
        } else {
            self.vehicle_length + (self.c2 + ratio.atanh()) / self.c1
        };
        Some(crossing.max(self.security_distance))
    }

    /// Desired speed for a positive gap.
    pub fn velocity(&self, gap: f64) -> Result<f64> {
        if !(gap > 0.0) {
            return Err(Error::Domain { what: "gap", value: gap });
        }
        Ok(self.velocity_unchecked(gap))
    }

    /// Derivative of [`velocity`](Self::velocity) with respect to the gap;
    /// zero on the clamped branch.
    pub fn velocity_derivative(&self, gap: f64) -> Result<f64> {
        if !(gap > 0.0) {
            return Err(Error::Domain { what: "gap", value: gap });
        }
        Ok(self.derivative_unchecked(gap))
    }

    pub(crate) fn velocity_unchecked(&self, gap: f64) -> f64 {
        if gap <= self.security_distance {
            return 0.0;
        }
        self.scale * self.inner(gap).max(0.0)
    }

    pub(crate) fn derivative_unchecked(&self, gap: f64) -> f64 {
        if gap <= self.security_distance || self.inner(gap) <= 0.0 {
            return 0.0;
        }
        let sech = 1.0 / self.argument(gap).cosh();
        self.scale * self.v_amp * self.c1 * sech * sech
    }

    /// Gap on the increasing branch at which the profile equals `speed`.
    pub fn invert(&self, speed: f64) -> Result<f64> {
        let v_max = self.v_max();
        if !(speed > 0.0 && speed < v_max) {
            return Err(Error::Domain { what: "speed", value: speed });
        }
        let lo = self
            .branch_start()
            .ok_or(Error::Domain { what: "speed", value: speed })?;
        let mut width = lo.max(1.0);
        let mut hi = lo + width;
        while self.velocity_unchecked(hi) < speed {
            width *= 2.0;
            hi = lo + width;
            if !hi.is_finite() {
                return Err(Error::Domain { what: "speed", value: speed });
            }
        }
        bisect(
            |g| self.velocity_unchecked(g) - speed,
            lo,
            hi,
            INVERSION_TOLERANCE,
        )
    }
}
