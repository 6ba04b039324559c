//! Channel-parameter estimation.
//!
//! Two estimators are provided. The maximum-likelihood route fits the linear
//! model `x_B = t·x_A + z` and builds worst-case finite-size bounds
//! `T_min`, `ε_max` from confidence offsets. The naive moment route inverts
//! the matched-detector moment relations; fed with data from a mismatched
//! detector it returns the biased pair `(γ²·T, ε − (1−γ²)·v_el/(η·T·γ²))`,
//! which [`mismatch_bias`] gives in closed form.

use crate::channel_sim::{QuadratureDataset, SampleMoments, SystemParams};
use crate::error::{domain, Error, Result};
use crate::physics::OverlapCoefficient;
use crate::special::z_quantile;

/// Output of the full estimation pipeline on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub t_hat: f64,
    pub sigma2_hat: f64,
    pub delta_t: f64,
    pub delta_sigma2: f64,
    /// Worst-case transmittance `(t̂ − Δt)²/η`.
    pub t_min_transmittance: f64,
    /// Worst-case excess noise (SNU); may be negative, see `negative_noise`.
    pub eps_max: f64,
    pub t_naive: f64,
    /// Naive excess-noise variance ξ, in the units of the quadrature data.
    pub xi_naive: f64,
    pub m_used: usize,
    /// Set when `eps_max` or `xi_naive` came out negative. The values are
    /// reported unclamped; the key-rate layer clamps before use.
    pub negative_noise: bool,
}

impl EstimationResult {
    /// Point estimate of the transmittance from the ML gain, `t̂²/η`.
    pub fn t_point(&self, sys: &SystemParams) -> f64 {
        self.t_hat * self.t_hat / sys.eta
    }

    /// Point estimate of the excess noise (SNU) from the ML fit, without
    /// confidence offsets.
    pub fn eps_point(&self, sys: &SystemParams) -> f64 {
        (self.sigma2_hat - sys.n0 - sys.v_el_abs()) / (self.t_hat * self.t_hat * sys.n0)
    }
}

/// Transmittance and excess noise as the legitimate parties would estimate
/// them with a mismatched detector they believe to be matched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPrediction {
    pub t_prime: f64,
    pub eps_prime: f64,
}

/// ML fit of `x_B = t·x_A + z`: `t̂ = Σx_A·x_B / Σx_A²`,
/// `σ̂² = (1/m)·Σ(x_B − t̂·x_A)²`.
pub fn ml_estimate(x_a: &[f64], x_b: &[f64]) -> Result<(f64, f64)> {
    if x_a.len() != x_b.len() {
        return Err(Error::Argument(format!("length mismatch: {} vs {}", x_a.len(), x_b.len())));
    }
    if x_a.len() < 2 {
        return Err(Error::Argument(format!("need at least 2 samples, got {}", x_a.len())));
    }
    let (mut aa, mut ab) = (0.0, 0.0);
    for (&a, &b) in x_a.iter().zip(x_b) {
        aa += a * a;
        ab += a * b;
    }
    if aa <= 0.0 {
        return Err(Error::SingularInput("Alice's samples are all zero".into()));
    }
    let t_hat = ab / aa;
    let ss: f64 = x_a.iter().zip(x_b).map(|(&a, &b)| (b - t_hat * a).powi(2)).sum();
    Ok((t_hat, ss / x_a.len() as f64))
}

/// Confidence offsets `Δt = z·sqrt(σ̂²/(m·V_A))` and `Δσ² = z·σ̂²·√2/√m`,
/// with `z` the two-sided quantile for failure probability `eps_pe`.
///
/// `v_a` is the variance of Alice's data in the units of the quadratures.
pub fn confidence_offsets(sigma2_hat: f64, m: u64, v_a: f64, eps_pe: f64) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::Argument(format!("need m ≥ 2, got {m}")));
    }
    if !(sigma2_hat >= 0.0) {
        return Err(domain(format!("noise variance must be non-negative, got {sigma2_hat}")));
    }
    if !(v_a > 0.0) {
        return Err(domain(format!("modulation variance must be positive, got {v_a}")));
    }
    let z = z_quantile(eps_pe)?;
    let m = m as f64;
    let delta_t = z * (sigma2_hat / (m * v_a)).sqrt();
    let delta_sigma2 = z * sigma2_hat * std::f64::consts::SQRT_2 / m.sqrt();
    Ok((delta_t, delta_sigma2))
}

/// Worst-case bounds `T_min = (t̂ − Δt)²/η` and
/// `ε_max = (σ̂² + Δσ² − N_0 − v_el·N_0) / (t̂²·N_0)`.
///
/// Fails with [`Error::InsufficientStatistics`] when the gain interval
/// reaches zero. `ε_max` is returned unclamped.
pub fn worst_case_bounds(
    t_hat: f64,
    sigma2_hat: f64,
    delta_t: f64,
    delta_sigma2: f64,
    sys: &SystemParams,
) -> Result<(f64, f64)> {
    if !(t_hat > delta_t) {
        return Err(Error::InsufficientStatistics(format!(
            "estimated gain {t_hat} does not exceed its confidence offset {delta_t}"
        )));
    }
    let t_min = (t_hat - delta_t).powi(2) / sys.eta;
    let eps_max = (sigma2_hat + delta_sigma2 - sys.n0 - sys.v_el_abs()) / (t_hat * t_hat * sys.n0);
    Ok((t_min, eps_max))
}

/// Matched-detector moment inversion: `T = Cov² / (η·V_A²)`,
/// `ξ = (V_B − N_0 − V_el)/(η·T) − V_A`.
///
/// `ξ` is returned in the units of the quadratures (equal to SNU when
/// `N_0 = 1`).
pub fn naive_channel_estimate(cov_ab: f64, var_b: f64, sys: &SystemParams) -> Result<(f64, f64)> {
    let v_a = sys.v_a_abs();
    if !(v_a > 0.0 && sys.eta > 0.0) {
        return Err(domain("modulation variance and efficiency must be positive"));
    }
    let t = cov_ab * cov_ab / (sys.eta * v_a * v_a);
    if !(t > 0.0) {
        return Err(Error::DegenerateChannel(format!("Alice/Bob covariance is {cov_ab}")));
    }
    let xi = (var_b - sys.n0 - sys.v_el_abs()) / (sys.eta * t) - v_a;
    Ok((t, xi))
}

/// Closed-form estimation bias of a mismatched detector:
/// `T' = γ²·T`, `ε' = ε − (1−γ²)·v_el/(η·T·γ²)`.
pub fn mismatch_bias(
    true_t: f64,
    eps_tot: f64,
    gamma: OverlapCoefficient,
    sys: &SystemParams,
) -> Result<BiasPrediction> {
    if !(true_t > 0.0 && true_t <= 1.0) {
        return Err(domain(format!("transmittance must lie in (0, 1], got {true_t}")));
    }
    let g2 = gamma.value() * gamma.value();
    Ok(BiasPrediction { t_prime: g2 * true_t, eps_prime: eps_tot - concealment_term(true_t, gamma, sys) })
}

/// Excess noise the parties would measure under a partial intercept-resend
/// attack of weight `u` through a mismatched detector:
/// `ε + 2u − (1−γ²)·v_el/(η·T·γ²)`.
pub fn pir_concealed_noise(
    eps_tot: f64,
    u: f64,
    gamma: OverlapCoefficient,
    sys: &SystemParams,
    true_t: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(domain(format!("attack weight must lie in [0, 1], got {u}")));
    }
    if !(true_t > 0.0 && true_t <= 1.0) {
        return Err(domain(format!("transmittance must lie in (0, 1], got {true_t}")));
    }
    Ok(eps_tot + 2.0 * u - concealment_term(true_t, gamma, sys))
}

fn concealment_term(true_t: f64, gamma: OverlapCoefficient, sys: &SystemParams) -> f64 {
    let g2 = gamma.value() * gamma.value();
    (1.0 - g2) * sys.v_el / (sys.eta * true_t * g2)
}

/// Largest overlap that pushes the measured noise of an attacked channel
/// down to `threshold`, found by bisection on [`pir_concealed_noise`].
///
/// Returns `None` when even the matched detector already shows noise below
/// the threshold (nothing to hide) or when no `γ ≥ 1e-6` reaches it.
pub fn concealing_overlap(
    eps_tot: f64,
    u: f64,
    threshold: f64,
    sys: &SystemParams,
    true_t: f64,
) -> Result<Option<OverlapCoefficient>> {
    let noise = |g: f64| pir_concealed_noise(eps_tot, u, OverlapCoefficient::new(g)?, sys, true_t);
    if noise(1.0)? <= threshold {
        return Ok(None);
    }
    let (mut lo, mut hi) = (1e-6, 1.0);
    if noise(lo)? > threshold {
        return Ok(None);
    }
    // noise(γ) increases with γ: below the root the attack is hidden.
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if noise(mid)? <= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(OverlapCoefficient::new(lo)?))
}

/// Exact second moments of Alice/Bob data through the linear channel and a
/// detector with overlap `gamma`.
pub fn model_moments(sys: &SystemParams, transmittance: f64, eps_tot: f64, gamma: OverlapCoefficient) -> SampleMoments {
    let g = gamma.value();
    let v_a = sys.v_a_abs();
    let xi = eps_tot * sys.n0;
    let et = sys.eta * transmittance;
    SampleMoments {
        var_a: v_a,
        var_b: et * g * g * v_a + et * g * g * xi + g * g * sys.v_el_abs() + sys.n0,
        cov_ab: g * et.sqrt() * v_a,
    }
}

/// Below this many samples the normal approximation behind the confidence
/// offsets is not trusted; estimation still runs but logs a warning.
pub const GAUSSIAN_REGIME_MIN: usize = 100_000;

/// Full pipeline on one dataset of `m` pairs: ML fit, confidence offsets
/// (using the sample variance of Alice's data), worst-case bounds and the
/// naive moment estimate.
pub fn estimate_parameters(data: &QuadratureDataset, sys: &SystemParams) -> Result<EstimationResult> {
    sys.validate()?;
    let (t_hat, sigma2_hat) = ml_estimate(&data.x_a, &data.x_b)?;
    let moments = data.moments();
    let m = data.len();
    if m < GAUSSIAN_REGIME_MIN {
        log::warn!(
            "m = {m} is below {GAUSSIAN_REGIME_MIN}; the normal-approximation confidence offsets may be too narrow"
        );
    }
    let (delta_t, delta_sigma2) = confidence_offsets(sigma2_hat, m as u64, moments.var_a, sys.eps_pe)?;
    let (t_min_transmittance, eps_max) = worst_case_bounds(t_hat, sigma2_hat, delta_t, delta_sigma2, sys)?;
    let (t_naive, xi_naive) = naive_channel_estimate(moments.cov_ab, moments.var_b, sys)?;
    let negative_noise = eps_max < 0.0 || xi_naive < 0.0;
    if negative_noise {
        log::warn!("negative excess-noise estimate (eps_max={eps_max}, xi_naive={xi_naive}); reported unclamped");
    }
    Ok(EstimationResult {
        t_hat,
        sigma2_hat,
        delta_t,
        delta_sigma2,
        t_min_transmittance,
        eps_max,
        t_naive,
        xi_naive,
        m_used: m,
        negative_noise,
    })
}
