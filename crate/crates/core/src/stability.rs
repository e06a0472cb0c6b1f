//! Linear stability of the uniform single-lane flow.
//!
//! Perturbing the steady state `x_n = h n + V(h) t` with Fourier modes
//! `exp(i a_k n + z t)`, `a_k = 2 pi k / N`, gives for each mode the quadratic
//!
//! ```text
//! z^2 + z (alpha - beta/h^2 (e^{i a_k} - 1)) - alpha V'(h) (e^{i a_k} - 1) = 0
//! ```
//!
//! whose roots must have negative real part for every `k > 0`. The long-wave
//! limit gives the stability condition `V'(h) < alpha/2 + beta/h^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::bisect;
use crate::profile::VelocityProfile;

/// Both roots of one Fourier mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRoots {
    pub k: usize,
    pub wavenumber: f64,
    pub roots: [Complex64; 2],
}

impl ModeRoots {
    pub fn max_real(&self) -> f64 {
        self.roots[0].re.max(self.roots[1].re)
    }
}

/// Linear and constant coefficients `(b, c)` of the mode quadratic
/// `z^2 + b z + c`.
pub fn mode_coefficients(params: &ModelParams, h: f64, vprime: f64, wavenumber: f64) -> (Complex64, Complex64) {
    let shift = Complex64::from_polar(1.0, wavenumber) - 1.0;
    let b = params.alpha - params.beta / (h * h) * shift;
    let c = -params.alpha * vprime * shift;
    (b, c)
}

/// Roots of `z^2 + b z + c` without cancellation: the larger-magnitude root
/// from the quadratic formula, the other from the product.
fn quadratic_roots(b: Complex64, c: Complex64) -> [Complex64; 2] {
    let disc = (b * b - 4.0 * c).sqrt();
    let sign = if (b.conj() * disc).re >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (b + sign * disc);
    if q.norm() == 0.0 {
        return [Complex64::new(0.0, 0.0); 2];
    }
    [q, c / q]
}

/// Roots of mode `k` out of `n` for uniform headway `h` and slope `vprime`.
pub fn dispersion_roots(params: &ModelParams, h: f64, vprime: f64, k: usize, n: usize) -> Result<ModeRoots> {
    if n == 0 || k >= n {
        return Err(Error::Domain { what: "mode index", value: k as f64 });
    }
    if !(h > 0.0) {
        return Err(Error::Domain { what: "headway", value: h });
    }
    let wavenumber = 2.0 * PI * k as f64 / n as f64;
    let (b, c) = mode_coefficients(params, h, vprime, wavenumber);
    Ok(ModeRoots {
        k,
        wavenumber,
        roots: quadratic_roots(b, c),
    })
}

/// Value of `V'(h)` at which mode `wavenumber` is marginally stable.
pub fn critical_curve(params: &ModelParams, h: f64, wavenumber: f64) -> Result<f64> {
    let half = 0.5 * wavenumber;
    let cos = half.cos();
    if cos.abs() < 1e-12 {
        return Err(Error::SingularMode(wavenumber));
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let ftl = beta / (h * h);
    let tan = half.tan();
    Ok(alpha / (2.0 * cos * cos) + ftl + 2.0 * tan * tan * ftl * (ftl / alpha + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

/// `V'(h) - alpha/2 - beta/h^2`: negative on stable headways.
pub fn stability_margin(params: &ModelParams, profile: &VelocityProfile, h: f64) -> f64 {
    profile.derivative_unchecked(h) - 0.5 * params.alpha - params.beta / (h * h)
}

pub fn classify_stability(params: &ModelParams, profile: &VelocityProfile, h: f64) -> Stability {
    let g = stability_margin(params, profile, h);
    if g.abs() <= 1e-12 {
        Stability::Marginal
    } else if g < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

pub const DEFAULT_GRID: usize = 10_000;
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Stable headway intervals inside `[h_min, h_max]`: sign changes of the
/// stability margin are bracketed on a uniform grid and refined by bisection.
pub fn stable_ranges(
    params: &ModelParams,
    profile: &VelocityProfile,
    h_min: f64,
    h_max: f64,
    grid: usize,
) -> Result<Vec<Interval>> {
    if !(h_min > 0.0 && h_min < h_max) {
        return Err(Error::Domain { what: "h_min", value: h_min });
    }
    let grid = grid.max(2);
    let g = |h: f64| stability_margin(params, profile, h);
    let step = (h_max - h_min) / grid as f64;
    let mut intervals = Vec::new();
    let mut prev_h = h_min;
    let mut prev_stable = g(h_min) < 0.0;
    let mut open = prev_stable.then_some(h_min);
    for i in 1..=grid {
        let h = if i == grid { h_max } else { h_min + step * i as f64 };
        let stable = g(h) < 0.0;
        if stable != prev_stable {
            let edge = bisect(
                |x| if g(x) < 0.0 { -1.0 } else { 1.0 },
                prev_h,
                h,
                BOUNDARY_TOLERANCE,
            )?;
            match open.take() {
                Some(lo) => intervals.push(Interval { lo, hi: edge }),
                None => open = Some(edge),
            }
        }
        prev_h = h;
        prev_stable = stable;
    }
    if let Some(lo) = open {
        intervals.push(Interval { lo, hi: h_max });
    }
    Ok(intervals)
}

/// Maps headway intervals to vehicle-count intervals `N = L / h` on a ring
/// of length `length`, in increasing order of `N`.
pub fn count_intervals(headways: &[Interval], length: f64) -> Vec<Interval> {
    let mut out: Vec<Interval> = headways
        .iter()
        .map(|i| Interval {
            lo: length / i.hi,
            hi: length / i.lo,
        })
        .collect();
    out.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    out
}

/// Largest real part over the roots of modes `k = 1..N-1`.
pub fn max_growth_rate(params: &ModelParams, profile: &VelocityProfile, h: f64, n: usize) -> Result<f64> {
    Ok(growth_rates(params, profile, h, n)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Largest real part of each mode `k = 1..N-1`.
pub fn growth_rates(params: &ModelParams, profile: &VelocityProfile, h: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Domain { what: "vehicle count", value: n as f64 });
    }
    let vprime = profile.velocity_derivative(h)?;
    (1..n)
        .map(|k| dispersion_roots(params, h, vprime, k, n).map(|m| m.max_real()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn residual(b: Complex64, c: Complex64, z: Complex64) -> f64 {
        (z * z + b * z + c).norm()
    }

    #[test]
    fn mode_zero_roots() {
        let params = ModelParams::new(1.3, 100.0).unwrap();
        let m = dispersion_roots(&params, 12.0, 0.7, 0, 50).unwrap();
        let mut re: Vec<f64> = m.roots.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_relative_eq!(re[0], -1.3, epsilon = 1e-14);
        assert!(re[1].abs() < 1e-14);
        assert!(m.roots.iter().all(|z| z.im.abs() < 1e-14));
    }

    #[test]
    fn back_substitution() {
        let params = ModelParams::new(1.0, 100.0).unwrap();
        let vprime = VelocityProfile::helbing_tilch().velocity_derivative(12.5).unwrap();
        let m = dispersion_roots(&params, 12.5, vprime, 1, 121).unwrap();
        let (b, c) = mode_coefficients(&params, 12.5, vprime, m.wavenumber);
        for z in m.roots {
            assert!(residual(b, c, z) < 1e-12);
        }
    }

    #[test]
    fn critical_curve_limits() {
        let params = ModelParams::new(1.0, 100.0).unwrap();
        assert_relative_eq!(critical_curve(&params, 15.0, 0.0).unwrap(), 0.5 + 100.0 / 225.0, epsilon = 1e-15);
        let near = critical_curve(&params, 15.0, 1e-5).unwrap();
        assert!((near - (0.5 + 100.0 / 225.0)).abs() < 1e-8);
        let bando = ModelParams::new(1.0, 0.0).unwrap();
        let a: f64 = 1.1;
        assert_relative_eq!(
            critical_curve(&bando, 15.0, a).unwrap(),
            1.0 / (2.0 * (a / 2.0).cos().powi(2)),
            epsilon = 1e-14
        );
        assert!(matches!(critical_curve(&params, 15.0, PI), Err(Error::SingularMode(_))));
    }

    #[test]
    fn critical_curve_reference_value() {
        // 40-digit evaluation of the closed form at alpha=1, beta=100, h=15, a=pi/4.
        let params = ModelParams::new(1.0, 100.0).unwrap();
        let v = critical_curve(&params, 15.0, PI / 4.0).unwrap();
        assert!((v - 1.250_521_981_162_660_875_263).abs() < 1e-13);
    }

    #[test]
    fn critical_curve_is_where_a_root_crosses_the_axis() {
        // Independent route: bisect V' until the dominant root is purely imaginary.
        let params = ModelParams::new(1.0, 100.0).unwrap();
        for (h, a) in [(15.0, PI / 4.0), (12.5, 0.3), (25.0, 2.0)] {
            let dominant = |vp: f64| {
                let (b, c) = mode_coefficients(&params, h, vp, a);
                let [z1, z2] = quadratic_roots(b, c);
                z1.re.max(z2.re)
            };
            let crossing = bisect(dominant, 1e-6, 100.0, 1e-13).unwrap();
            let curve = critical_curve(&params, h, a).unwrap();
            assert!((crossing - curve).abs() < 1e-9, "{crossing} {curve}");
        }
    }

    #[test]
    fn classification_examples() {
        let params = ModelParams::new(1.0, 100.0).unwrap();
        let p = VelocityProfile::helbing_tilch();
        assert_eq!(classify_stability(&params, &p, 1500.0 / 120.0), Stability::Stable);
        assert_eq!(classify_stability(&params, &p, 1500.0 / 90.0), Stability::Unstable);
    }

    #[test]
    fn marginal_when_slope_equals_half_alpha() {
        // Pick h where V' = alpha/2 with beta = 0: solve on the rising side of the peak.
        let p = VelocityProfile::helbing_tilch();
        let peak = 5.0 + 1.57 / 0.13;
        let alpha = 1.0;
        let h = bisect(|h| p.derivative_unchecked(h) - alpha / 2.0, 8.0, peak, 1e-15).unwrap();
        // Rescale alpha so the margin is exactly zero in floating point.
        let params = ModelParams::new(2.0 * p.derivative_unchecked(h), 0.0).unwrap();
        assert_eq!(classify_stability(&params, &p, h), Stability::Marginal);
    }

    #[test]
    fn helbing_tilch_stable_counts() {
        let params = ModelParams::new(1.0, 100.0).unwrap();
        let p = VelocityProfile::helbing_tilch();
        let ranges = stable_ranges(&params, &p, 1.0, 1500.0, DEFAULT_GRID).unwrap();
        assert_eq!(ranges.len(), 2);
        let counts = count_intervals(&ranges, 1500.0);
        // Unstable between roughly 68 and 100 vehicles.
        assert!((counts[0].hi - 68.0).abs() <= 1.0, "{counts:?}");
        assert!((counts[1].lo - 100.0).abs() <= 1.0, "{counts:?}");
    }

    #[test]
    fn soft_ramp_is_stable_everywhere() {
        let params = ModelParams::new(5.0, 100.0).unwrap();
        for scale in [1.0, 1.5, 2.0] {
            let p = VelocityProfile::soft_ramp().scaled(scale);
            let ranges = stable_ranges(&params, &p, 1.0, 1500.0, DEFAULT_GRID).unwrap();
            assert_eq!(ranges, vec![Interval { lo: 1.0, hi: 1500.0 }]);
        }
    }

    #[test]
    fn large_beta_stabilises_everything() {
        let params = ModelParams::new(1.0, 1e7).unwrap();
        let ranges = stable_ranges(&params, &VelocityProfile::helbing_tilch(), 1.0, 1500.0, 2000).unwrap();
        assert_eq!(ranges.len(), 1);
    }

    #[test]
    fn growth_rate_signs() {
        let params = ModelParams::new(1.0, 100.0).unwrap();
        let p = VelocityProfile::helbing_tilch();
        assert!(max_growth_rate(&params, &p, 12.5, 120).unwrap() < 0.0);
        assert!(max_growth_rate(&params, &p, 1500.0 / 90.0, 90).unwrap() > 0.0);
    }

    #[test]
    fn two_vehicles_have_a_single_mode() {
        let params = ModelParams::new(1.0, 100.0).unwrap();
        let p = VelocityProfile::helbing_tilch();
        let h = 16.0;
        let rate = max_growth_rate(&params, &p, h, 2).unwrap();
        let vp = p.velocity_derivative(h).unwrap();
        let m = dispersion_roots(&params, h, vp, 1, 2).unwrap();
        assert_eq!(rate, m.max_real());
        assert_relative_eq!(m.wavenumber, PI);
    }

    #[test]
    fn boundary_consistency_large_n() {
        // With many vehicles the longest mode approaches the long-wave
        // limit, so the growth rate flips sign where the margin does.
        let params = ModelParams::new(1.0, 100.0).unwrap();
        let p = VelocityProfile::helbing_tilch();
        let n = 4000;
        let hs: Vec<f64> = (0..300).map(|i| 8.0 + 0.1 * i as f64).collect();
        let growth_unstable: Vec<bool> = hs
            .iter()
            .map(|&h| max_growth_rate(&params, &p, h, n).unwrap() > 0.0)
            .collect();
        let margin_unstable: Vec<bool> = hs.iter().map(|&h| stability_margin(&params, &p, h) > 0.0).collect();
        let mismatches: Vec<usize> = (0..hs.len()).filter(|&i| growth_unstable[i] != margin_unstable[i]).collect();
        for i in &mismatches {
            // Disagreement only allowed in a cell adjacent to a flip.
            let near_flip = (i.saturating_sub(1)..=(*i + 1).min(hs.len() - 1))
                .any(|j| j > 0 && margin_unstable[j] != margin_unstable[j - 1]);
            assert!(near_flip, "h={} disagrees away from the boundary", hs[*i]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn roots_satisfy_quadratic_and_vieta(
            alpha in 0.1f64..5.0,
            beta in 0.0f64..300.0,
            h in 3.0f64..60.0,
            vprime in 0.0f64..3.0,
            n in 2usize..400,
            kf in 0.0f64..1.0,
        ) {
            let k = ((n as f64) * kf) as usize % n;
            let params = ModelParams::new(alpha, beta).unwrap();
            let m = dispersion_roots(&params, h, vprime, k, n).unwrap();
            let (b, c) = mode_coefficients(&params, h, vprime, m.wavenumber);
            for z in m.roots {
                prop_assert!(residual(b, c, z) < 1e-10);
            }
            let [z1, z2] = m.roots;
            let a = m.wavenumber;
            let ftl = beta / (h * h);
            prop_assert!(((z1.re + z2.re) - (-alpha + ftl * (a.cos() - 1.0))).abs() < 1e-10);
            prop_assert!(((z1.im + z2.im) - ftl * a.sin()).abs() < 1e-10);
            prop_assert!(((z1.re * z2.re - z1.im * z2.im) - (-alpha * vprime * (a.cos() - 1.0))).abs() < 1e-10);
            prop_assert!(((z1.re * z2.im + z1.im * z2.re) - (-alpha * vprime * a.sin())).abs() < 1e-10);
        }
    }
}
