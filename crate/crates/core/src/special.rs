//! Error function and the two-sided Gaussian quantile used for confidence
//! intervals.
//!
//! `erf` uses the everywhere-positive Taylor expansion
//! `erf(x) = (2/√π)·e^{−x²}·Σ (2x²)^k·x / (1·3·…·(2k+1))`, which has no
//! cancellation, for `|x| < 2.5`. Beyond that `erfc` is evaluated from its
//! continued fraction with the modified Lentz algorithm, so the far tail keeps
//! full relative precision.

use std::f64::consts::PI;

use crate::error::{domain, Result};

const SERIES_LIMIT: f64 = 2.5;
const CF_TINY: f64 = 1e-300;

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= 2.0 * x2 / (2.0 * k + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

/// `erfc(x)` for `x ≥ SERIES_LIMIT`.
fn erfc_continued_fraction(x: f64) -> f64 {
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = 0.5 * k as f64;
        d = x + a * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = x + a / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT { erf_series(ax) } else { 1.0 - erfc_continued_fraction(ax) };
    v.copysign(x)
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_LIMIT {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// Two-sided standard-normal quantile `z_{ε/2}`: the `z ≥ 0` with
/// `P(|Z| > z) = erfc(z/√2) = ε`.
///
/// Solved by bisection on the monotone `erfc` to an absolute tolerance of
/// 1e-12.
pub fn z_quantile(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("confidence failure probability must lie in (0, 1), got {eps}")));
    }
    let tail = |z: f64| erfc(z / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson rule, used as an independent check on `erf`.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn reference_values() {
        let cases = [(0.5, 0.520_499_877_813_046_5), (1.0, 0.842_700_792_949_714_9), (2.0, 0.995_322_265_018_952_7)];
        for (x, v) in cases {
            assert!((erf(x) - v).abs() < 1e-15, "erf({x})");
            assert!((erf(-x) + v).abs() < 1e-15);
        }
        let tails =
            [(3.0, 2.209_049_699_858_544e-5), (5.0, 1.537_459_794_428_035e-12), (10.0, 2.088_487_583_762_545e-45)];
        for (x, v) in tails {
            assert!(((erfc(x) - v) / v).abs() < 1e-12, "erfc({x}) = {}", erfc(x));
        }
        assert_eq!(erf(0.0), 0.0);
        assert!((erfc(-1.0) - (2.0 - erfc(1.0))).abs() < 1e-16);
    }

    #[test]
    fn agrees_with_gaussian_quadrature() {
        let density = |t: f64| 2.0 / PI.sqrt() * (-t * t).exp();
        for i in 1..=20 {
            let x = 0.25 * i as f64;
            let q = simpson(density, 0.0, x, 20_000);
            assert!(((erf(x) - q) / q).abs() < 1e-12, "x={x}: {} vs {q}", erf(x));
            let tail = simpson(density, x, x + 12.0, 200_000);
            assert!(((erfc(x) - tail) / tail).abs() < 1e-9, "x={x}: {} vs {tail}", erfc(x));
        }
    }

    #[test]
    fn branches_join_smoothly() {
        let below = erfc(SERIES_LIMIT - 1e-12);
        let above = erfc(SERIES_LIMIT);
        assert!(((below - above) / above).abs() < 1e-10);
    }

    #[test]
    fn quantiles() {
        assert!((z_quantile(0.05).unwrap() - 1.959_963_984_540_054).abs() < 1e-10);
        let z = z_quantile(1e-10).unwrap();
        assert!((z - 6.466_951_087_240_517).abs() < 1e-9, "z={z}");
        assert!(z_quantile(1.0 - 1e-12).unwrap() < 1e-10);
        for eps in [1e-14, 1e-10, 1e-6, 0.01, 0.3, 0.9] {
            let z = z_quantile(eps).unwrap();
            let back = erfc(z / std::f64::consts::SQRT_2);
            assert!(((back - eps) / eps).abs() < 1e-10, "eps={eps} back={back}");
        }
    }

    #[test]
    fn quantile_domain() {
        assert!(z_quantile(0.0).is_err());
        assert!(z_quantile(1.0).is_err());
        assert!(z_quantile(2.0).is_err());
        assert!(z_quantile(f64::NAN).is_err());
    }
}
