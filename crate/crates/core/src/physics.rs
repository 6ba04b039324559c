//! Gaussian temporal modes of the signal and local oscillator, and their
//! overlap.
//!
//! Both fields are single Gaussian temporal modes
//! `u(t) = exp(-t²/(2τ²)) / (sqrt(τ)·π^{1/4})`, each normalized to unit
//! energy. When the widths differ, the homodyne detector only projects the
//! signal onto the LO mode with amplitude `γ = |∫ u_LO(t)·u_s(t) dt|`, which
//! for Gaussians has the closed form `sqrt(2·τ_s·τ_LO / (τ_s² + τ_LO²))`.
//!
//! Time units are abstract: only the width ratio enters `γ`.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Signal and LO pulse widths, in the same (arbitrary) time unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub tau_s: f64,
    pub tau_lo: f64,
}

impl PulseSpec {
    pub fn new(tau_s: f64, tau_lo: f64) -> Result<Self> {
        check_width("tau_s", tau_s)?;
        check_width("tau_lo", tau_lo)?;
        Ok(Self { tau_s, tau_lo })
    }

    /// Matched pulses of width `tau`.
    pub fn matched(tau: f64) -> Result<Self> {
        Self::new(tau, tau)
    }

    pub fn overlap(&self) -> Result<OverlapCoefficient> {
        overlap_coefficient(*self)
    }
}

/// Mode-matching factor `γ ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct OverlapCoefficient(f64);

impl OverlapCoefficient {
    pub const MATCHED: OverlapCoefficient = OverlapCoefficient(1.0);

    pub fn new(gamma: f64) -> Result<Self> {
        if gamma.is_finite() && gamma > 0.0 && gamma <= 1.0 {
            Ok(Self(gamma))
        } else {
            Err(domain(format!("overlap coefficient must lie in (0, 1], got {gamma}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<OverlapCoefficient> for f64 {
    fn from(g: OverlapCoefficient) -> f64 {
        g.0
    }
}

fn check_width(name: &str, tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be a positive pulse width, got {tau}")))
    }
}

/// Amplitude of a unit-energy Gaussian temporal mode of width `tau` at time `t`.
pub fn temporal_mode(t: f64, tau: f64) -> Result<f64> {
    check_width("tau", tau)?;
    let norm = 1.0 / (tau.sqrt() * PI.powf(0.25));
    Ok(norm * (-t * t / (2.0 * tau * tau)).exp())
}

/// Closed-form overlap of the signal and LO temporal modes.
pub fn overlap_coefficient(spec: PulseSpec) -> Result<OverlapCoefficient> {
    check_width("tau_s", spec.tau_s)?;
    check_width("tau_lo", spec.tau_lo)?;
    let (a, b) = (spec.tau_s, spec.tau_lo);
    // Written in terms of the ratio so that extreme absolute scales do not overflow.
    let r = a.min(b) / a.max(b);
    let gamma = (2.0 * r / (1.0 + r * r)).sqrt();
    OverlapCoefficient::new(gamma.min(1.0))
}

/// Width ratio `r = τ_LO/τ_s ≥ 1` that produces overlap `gamma`.
///
/// Inverts `γ² = 2r/(1+r²)`; the mirror solution is `1/r`.
pub fn width_ratio_for_overlap(gamma: OverlapCoefficient) -> f64 {
    let g2 = gamma.value() * gamma.value();
    let disc = (1.0 - g2 * g2).max(0.0);
    (1.0 + disc.sqrt()) / g2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Trapezoidal sum over a fixed uniform grid; tails of a Gaussian beyond
    /// ten widths are far below double precision.
    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / (n - 1) as f64;
        let inner: f64 = (1..n - 1).map(|i| f(lo + i as f64 * h)).sum();
        h * (inner + 0.5 * (f(lo) + f(hi)))
    }

    #[test]
    fn peak_values() {
        assert_relative_eq!(temporal_mode(0.0, 1.0).unwrap(), 1.0 / PI.powf(0.25), epsilon = 1e-15);
        assert_relative_eq!(temporal_mode(0.0, 4.0).unwrap(), 0.5 / PI.powf(0.25), epsilon = 1e-15);
        assert_relative_eq!(temporal_mode(0.0, 1.0).unwrap(), 0.751_125_544_464_942_5, epsilon = 1e-12);
    }

    #[test]
    fn mode_is_symmetric_and_positive() {
        for &t in &[0.1, 0.7, 2.5, 8.0] {
            let a = temporal_mode(t, 1.3).unwrap();
            assert!(a > 0.0);
            assert_eq!(a, temporal_mode(-t, 1.3).unwrap());
        }
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(temporal_mode(0.0, 0.0).is_err());
        assert!(temporal_mode(0.0, -1.0).is_err());
        assert!(PulseSpec::new(1.0, 0.0).is_err());
        assert!(overlap_coefficient(PulseSpec { tau_s: -1.0, tau_lo: 1.0 }).is_err());
        assert!(OverlapCoefficient::new(0.0).is_err());
        assert!(OverlapCoefficient::new(1.0 + 1e-12).is_err());
    }

    #[test]
    fn mode_normalization_by_quadrature() {
        for &tau in &[0.01, 0.3, 1.0, 7.5, 100.0] {
            let e = trapezoid(|t| temporal_mode(t, tau).unwrap().powi(2), -10.0 * tau, 10.0 * tau, 8192);
            assert!((e - 1.0).abs() < 1e-9, "tau={tau} energy={e}");
        }
    }

    #[test]
    fn matched_widths_give_unit_overlap() {
        for &tau in &[1e-3, 0.5, 1.0, 42.0] {
            assert_eq!(PulseSpec::matched(tau).unwrap().overlap().unwrap().value(), 1.0);
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let g = overlap_coefficient(PulseSpec::new(1.0, 3.0).unwrap()).unwrap().value();
        let q = trapezoid(|t| temporal_mode(t, 1.0).unwrap() * temporal_mode(t, 3.0).unwrap(), -30.0, 30.0, 8192);
        assert!((g - q).abs() < 1e-8);
        assert!((g - 0.6f64.sqrt()).abs() < 1e-12);

        for i in 0..=40 {
            let k = 10f64.powf(-1.0 + i as f64 * 0.05);
            let spec = PulseSpec::new(1.0, k).unwrap();
            let span = 10.0 * k.max(1.0);
            let q = trapezoid(|t| temporal_mode(t, 1.0).unwrap() * temporal_mode(t, k).unwrap(), -span, span, 16384);
            assert!((overlap_coefficient(spec).unwrap().value() - q).abs() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn concealment_width_ratio() {
        // Root of 2r/(1+r²) = 0.8452² found by bisection, independent of the closed-form inverse.
        let target = 0.8452f64 * 0.8452;
        let (mut lo, mut hi) = (1.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * mid / (1.0 + mid * mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 2.3793).abs() < 1e-3, "r={lo}");
        let g = overlap_coefficient(PulseSpec::new(1.0, 2.3793).unwrap()).unwrap().value();
        assert!((g - 0.8452).abs() < 1e-3);
        let r = width_ratio_for_overlap(OverlapCoefficient::new(0.8452).unwrap());
        assert_relative_eq!(r, lo, epsilon = 1e-9);
    }

    #[test]
    fn decreasing_in_log_ratio() {
        let mut prev = 1.0;
        for i in 1..200 {
            let k = 1.0 + i as f64 * 0.05;
            let g = overlap_coefficient(PulseSpec::new(2.0, 2.0 * k).unwrap()).unwrap().value();
            let g_inv = overlap_coefficient(PulseSpec::new(2.0, 2.0 / k).unwrap()).unwrap().value();
            assert!(g < prev);
            assert_relative_eq!(g, g_inv, epsilon = 1e-14);
            prev = g;
        }
    }
}
