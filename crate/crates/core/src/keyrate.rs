//! Finite-size secret key rate under collective attacks with reverse
//! reconciliation:
//!
//! ```text
//! K = (n/N)·(β·I_AB − S_BE − Δ(n))
//! ```
//!
//! `I_AB` is evaluated at the transmittance and excess noise the parties
//! believe in. `S_BE` uses the worst-case covariance matrix built from
//! `T_min` and `ε_max`, whose symplectic eigenvalues come from the
//! closed-form invariants `A, B, C, D`. `Δ(n)` is the privacy-amplification
//! penalty.
//!
//! [`secret_key_rate`] works from exact channel moments (the confidence
//! offsets are computed analytically for `m = N − n` samples).
//! [`secret_key_rate_from_estimate`] consumes an [`EstimationResult`]
//! obtained from sampled data.

use crate::channel_sim::{ChannelScenario, SystemParams};
use crate::error::{domain, Error, Result};
use crate::estimation::{confidence_offsets, mismatch_bias, worst_case_bounds, EstimationResult};
use crate::physics::OverlapCoefficient;

/// Discriminants of the eigenvalue quadratics more negative than this
/// (relative to the squared linear coefficient) are treated as failures.
pub const DISCRIMINANT_TOLERANCE: f64 = 1e-12;
/// Symplectic eigenvalues may undershoot 1 by at most this much.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-9;

/// Noise contributions, all in SNU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    /// Channel-added noise `1/T − 1 + ε`, referred to the channel input.
    pub chi_line: f64,
    /// Detection-added noise `((1−η) + v_el)/η`, referred to Bob's input.
    pub chi_hom: f64,
    /// `χ_line + χ_hom/T`.
    pub chi_tot: f64,
}

pub fn noise_budget(transmittance: f64, eps: f64, sys: &SystemParams) -> Result<NoiseBudget> {
    if !(transmittance > 0.0) {
        return Err(Error::DegenerateChannel(format!("transmittance must be positive, got {transmittance}")));
    }
    if transmittance > 1.0 {
        return Err(domain(format!("transmittance must not exceed 1, got {transmittance}")));
    }
    let chi_line = 1.0 / transmittance - 1.0 + eps;
    let chi_hom = ((1.0 - sys.eta) + sys.v_el) / sys.eta;
    Ok(NoiseBudget { chi_line, chi_hom, chi_tot: chi_line + chi_hom / transmittance })
}

/// `I_AB = ½·log₂((V + χ_tot)/(1 + χ_tot))` with `V = V_A + 1`.
pub fn mutual_information(v: f64, budget: &NoiseBudget) -> Result<f64> {
    if !(v >= 1.0) {
        return Err(Error::UnphysicalState(format!("total variance V must be at least 1, got {v}")));
    }
    let chi = budget.chi_tot;
    Ok((0.5 * ((v + chi) / (1.0 + chi)).log2()).max(0.0))
}

/// Independent entries of the worst-case covariance matrix
/// `[[Γ_A·I, σ_AB·Z], [σ_AB·Z, Γ_B·I]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix {
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub sigma_ab: f64,
}

impl CovarianceMatrix {
    /// Row-major 4×4 matrix in the `(x_A, p_A, x_B, p_B)` ordering.
    pub fn to_dense(&self) -> [[f64; 4]; 4] {
        let (a, b, c) = (self.gamma_a, self.gamma_b, self.sigma_ab);
        [[a, 0.0, c, 0.0], [0.0, a, 0.0, -c], [c, 0.0, b, 0.0], [0.0, -c, 0.0, b]]
    }
}

pub fn worst_case_covariance(v: f64, t_min: f64, eps_max: f64) -> Result<CovarianceMatrix> {
    if !(v >= 1.0) {
        return Err(Error::UnphysicalState(format!("total variance V must be at least 1, got {v}")));
    }
    if !(t_min > 0.0 && t_min <= 1.0) {
        return Err(domain(format!("T_min must lie in (0, 1], got {t_min}")));
    }
    let chi_line_max = 1.0 / t_min - 1.0 + eps_max;
    Ok(CovarianceMatrix { gamma_a: v, gamma_b: t_min * (v + chi_line_max), sigma_ab: (t_min * (v * v - 1.0)).sqrt() })
}

/// Symplectic spectrum needed for the Holevo bound, with the invariants it
/// was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticSpectrum {
    /// `λ1, λ2` of Alice–Bob, `λ3, λ4` of the state conditioned on Bob's
    /// homodyne outcome, `λ5 = 1`.
    pub lambdas: [f64; 5],
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

fn quadratic_roots(linear: f64, constant: f64, which: &str) -> Result<(f64, f64)> {
    let mut disc = linear * linear - 4.0 * constant;
    if disc < 0.0 {
        if disc < -DISCRIMINANT_TOLERANCE * linear * linear.max(1.0) {
            log::error!("negative discriminant for {which}: linear={linear} constant={constant} disc={disc}");
            return Err(Error::NumericalInstability(format!(
                "discriminant {disc} for {which} (linear={linear}, constant={constant})"
            )));
        }
        disc = 0.0;
    }
    let s = disc.sqrt();
    Ok((0.5 * (linear + s), 0.5 * (linear - s)))
}

fn root_of_square(l2: f64, which: &str) -> Result<f64> {
    if l2 < 0.0 {
        if l2 < -EIGENVALUE_TOLERANCE {
            return Err(Error::NumericalInstability(format!("{which}: squared eigenvalue {l2} is negative")));
        }
        return Ok(0.0);
    }
    Ok(l2.sqrt())
}

/// Closed-form symplectic eigenvalues of the worst-case state and of Eve's
/// conditional state.
pub fn symplectic_eigenvalues(v: f64, t_min: f64, chi_line_max: f64, chi_hom: f64) -> Result<SymplecticSpectrum> {
    if !(v >= 1.0) {
        return Err(Error::UnphysicalState(format!("total variance V must be at least 1, got {v}")));
    }
    if !(t_min > 0.0 && t_min <= 1.0) {
        return Err(domain(format!("T_min must lie in (0, 1], got {t_min}")));
    }
    let t = t_min;
    let vb = v + chi_line_max;
    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * vb * vb;
    let b = t * t * (v * chi_line_max + 1.0).powi(2);
    let sqrt_b = b.sqrt();
    let denom = t * (vb + chi_hom / t);
    let c = (a * chi_hom + v * sqrt_b + t * vb) / denom;
    let d = sqrt_b * (v + sqrt_b * chi_hom) / denom;

    let (l1s, l2s) = quadratic_roots(a, b, "lambda_1,2")?;
    let (l3s, l4s) = quadratic_roots(c, d, "lambda_3,4")?;
    let lambdas = [
        root_of_square(l1s, "lambda_1")?,
        root_of_square(l2s, "lambda_2")?,
        root_of_square(l3s, "lambda_3")?,
        root_of_square(l4s, "lambda_4")?,
        1.0,
    ];
    Ok(SymplecticSpectrum { lambdas, a, b, c, d })
}

/// Von Neumann entropy of a thermal mode with mean photon number `x`, in bits:
/// `G(x) = (x+1)·log₂(x+1) − x·log₂(x)`.
pub fn g_entropy(x: f64) -> f64 {
    if x < 1e-15 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

/// `S_BE = Σ_{i=1,2} G((λ_i−1)/2) − Σ_{i=3,4,5} G((λ_i−1)/2)`.
pub fn holevo_bound(lambdas: &[f64; 5]) -> Result<f64> {
    for (i, &l) in lambdas.iter().enumerate() {
        if !(l >= 1.0 - EIGENVALUE_TOLERANCE) {
            log::error!("unphysical symplectic eigenvalues {lambdas:?}");
            return Err(Error::UnphysicalEigenvalue(format!("lambda_{} = {l} < 1", i + 1)));
        }
    }
    let g = |l: f64| g_entropy(((l - 1.0) / 2.0).max(0.0));
    Ok(g(lambdas[0]) + g(lambdas[1]) - g(lambdas[2]) - g(lambdas[3]) - g(lambdas[4]))
}

/// Privacy-amplification penalty
/// `Δ(n) = 7·sqrt(log₂(1/ε̄)/n) + (2/n)·log₂(1/ε_PA)`.
pub fn finite_size_delta(n_key: u64, eps_bar: f64, eps_pa: f64) -> Result<f64> {
    if n_key == 0 {
        return Err(domain("key block size must be positive"));
    }
    for (name, p) in [("eps_bar", eps_bar), ("eps_pa", eps_pa)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain(format!("{name} must lie in (0, 1), got {p}")));
        }
    }
    let n = n_key as f64;
    Ok(7.0 * ((1.0 / eps_bar).log2() / n).sqrt() + 2.0 / n * (1.0 / eps_pa).log2())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateBreakdown {
    /// Transmittance and excess noise the rate was computed for.
    pub t_used: f64,
    pub eps_used: f64,
    pub t_min: f64,
    /// Worst-case excess noise before clamping at zero.
    pub eps_max: f64,
    pub budget: NoiseBudget,
    pub i_ab: f64,
    pub s_be: f64,
    pub delta_n: f64,
    pub lambdas: [f64; 5],
    pub abcd: [f64; 4],
    /// `(n/N)·(β·I_AB − S_BE − Δ(n))`, possibly negative.
    pub k_raw: f64,
    pub k: f64,
}

fn assemble(sys: &SystemParams, t_used: f64, eps_used: f64, t_min: f64, eps_max: f64) -> Result<KeyRateBreakdown> {
    let v = sys.v_a + 1.0;
    let budget = noise_budget(t_used, eps_used, sys)?;
    let i_ab = mutual_information(v, &budget)?;

    let eps_worst = eps_max.max(0.0);
    let t_worst = t_min.min(1.0);
    let worst = noise_budget(t_worst, eps_worst, sys)?;
    let spectrum = symplectic_eigenvalues(v, t_worst, worst.chi_line, worst.chi_hom)?;
    let s_be = holevo_bound(&spectrum.lambdas)?;
    let delta_n = finite_size_delta(sys.n_key, sys.eps_bar, sys.eps_pa)?;
    let k_raw = sys.n_key as f64 / sys.n_total as f64 * (sys.beta * i_ab - s_be - delta_n);
    Ok(KeyRateBreakdown {
        t_used,
        eps_used,
        t_min,
        eps_max,
        budget,
        i_ab,
        s_be,
        delta_n,
        lambdas: spectrum.lambdas,
        abcd: [spectrum.a, spectrum.b, spectrum.c, spectrum.d],
        k_raw,
        k: k_raw.max(0.0),
    })
}

/// Key rate for a channel believed to have transmittance `t_used` and
/// excess noise `eps_used`.
///
/// The estimates the parties would obtain from `m = N − n` samples are taken
/// at their expectation (`t̂ = sqrt(η·T)`, `σ̂² = η·T·ε·N_0 + N_0 + V_el`) and
/// widened by the analytic confidence offsets.
pub fn secret_key_rate(sys: &SystemParams, t_used: f64, eps_used: f64) -> Result<KeyRateBreakdown> {
    sys.validate()?;
    if !(t_used > 0.0 && t_used <= 1.0) {
        return Err(domain(format!("transmittance must lie in (0, 1], got {t_used}")));
    }
    let t_hat = (sys.eta * t_used).sqrt();
    let sigma2 = sys.eta * t_used * eps_used * sys.n0 + sys.n0 + sys.v_el_abs();
    let (delta_t, delta_sigma2) = confidence_offsets(sigma2, sys.m_est, sys.v_a_abs(), sys.eps_pe)?;
    let (t_min, eps_max) = worst_case_bounds(t_hat, sigma2, delta_t, delta_sigma2, sys)?;
    assemble(sys, t_used, eps_used, t_min, eps_max)
}

/// Key rate from estimates made on sampled data. `I_AB` uses the ML point
/// estimates; `S_BE` uses the estimate's worst-case bounds.
pub fn secret_key_rate_from_estimate(sys: &SystemParams, est: &EstimationResult) -> Result<KeyRateBreakdown> {
    sys.validate()?;
    let t_used = est.t_point(sys).min(1.0);
    let eps_used = est.eps_point(sys);
    assemble(sys, t_used, eps_used, est.t_min_transmittance, est.eps_max)
}

/// True key rate next to the one computed by parties unaware of a detector
/// overlap `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchComparison {
    pub k_true: KeyRateBreakdown,
    pub k_biased: KeyRateBreakdown,
    /// `k_biased.k_raw − k_true.k_raw`.
    pub overestimate: f64,
}

pub fn key_rate_with_mismatch(
    sys: &SystemParams,
    ch: &ChannelScenario,
    gamma: OverlapCoefficient,
) -> Result<MismatchComparison> {
    let k_true = secret_key_rate(sys, ch.transmittance, ch.eps_tot)?;
    let bias = mismatch_bias(ch.transmittance, ch.eps_tot, gamma, sys)?;
    let k_biased =
        if gamma.value() == 1.0 { k_true.clone() } else { secret_key_rate(sys, bias.t_prime, bias.eps_prime)? };
    let overestimate = k_biased.k_raw - k_true.k_raw;
    Ok(MismatchComparison { k_true, k_biased, overestimate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_values() {
        let ideal = SystemParams { eta: 1.0, v_el: 0.0, ..SystemParams::default() };
        let b = noise_budget(1.0, 0.0, &ideal).unwrap();
        assert_eq!(b.chi_tot, 0.0);
        let sys = SystemParams::default();
        let b = noise_budget(0.5, 0.04, &sys).unwrap();
        assert!((b.chi_hom - 0.2 / 0.9).abs() < 1e-15);
        assert!((b.chi_line - 1.04).abs() < 1e-15);
        assert!((b.chi_tot - (1.04 + 2.0 * 0.2 / 0.9)).abs() < 1e-14);
        assert!(matches!(noise_budget(0.0, 0.0, &sys), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn mutual_information_limits() {
        let sys = SystemParams::default();
        let b = noise_budget(0.5, 0.04, &sys).unwrap();
        assert_eq!(mutual_information(1.0, &b).unwrap(), 0.0);
        let huge = NoiseBudget { chi_line: 1e9, chi_hom: 0.0, chi_tot: 1e9 };
        assert!(mutual_information(41.0, &huge).unwrap() < 1e-7);
        let i = mutual_information(41.0, &b).unwrap();
        let chi: f64 = 1.04 + 0.4 / 0.9;
        assert!((i - 0.5 * ((41.0 + chi) / (1.0 + chi)).log2()).abs() < 1e-15);
        assert!(mutual_information(0.5, &b).is_err());
    }

    #[test]
    fn covariance_entries() {
        let cm = worst_case_covariance(1.0, 0.3, 0.1).unwrap();
        assert_eq!(cm.sigma_ab, 0.0);
        let cm = worst_case_covariance(41.0, 1.0, 0.0).unwrap();
        assert_eq!(cm.gamma_b, 41.0);
        let cm = worst_case_covariance(41.0, 0.45, 0.06).unwrap();
        assert!((cm.gamma_a - 41.0).abs() < 1e-15);
        assert!((cm.sigma_ab - (0.45f64 * 1680.0).sqrt()).abs() < 1e-12);
        assert!((cm.gamma_b - 0.45 * (41.0 + 1.0 / 0.45 - 1.0 + 0.06)).abs() < 1e-12);
        assert!(worst_case_covariance(0.9, 0.5, 0.0).is_err());
    }

    #[test]
    fn vacuum_input_identity() {
        let (t, chi) = (0.37, 1.0 / 0.37 - 1.0 + 0.08);
        let s = symplectic_eigenvalues(1.0, t, chi, 0.25).unwrap();
        assert!((s.lambdas[0] * s.lambdas[1] - s.b.sqrt()).abs() < 1e-12);
        assert!((s.b - t * t * (chi + 1.0).powi(2)).abs() < 1e-12);
        assert_eq!(s.lambdas[4], 1.0);
    }

    #[test]
    fn g_values() {
        assert_eq!(g_entropy(0.0), 0.0);
        assert!((g_entropy(1.0) - 2.0).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 1..1000 {
            let g = g_entropy(i as f64 * 0.01);
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn pure_states_have_no_holevo_information() {
        assert_eq!(holevo_bound(&[1.0; 5]).unwrap(), 0.0);
        assert!(matches!(holevo_bound(&[1.0, 0.99, 1.0, 1.0, 1.0]), Err(Error::UnphysicalEigenvalue(_))));
    }

    #[test]
    fn delta_values() {
        let d = finite_size_delta(500_000_000, 1e-10, 1e-10).unwrap();
        let l = 1e10f64.log2();
        assert!((d - (7.0 * (l / 5e8).sqrt() + 2.0 / 5e8 * l)).abs() < 1e-15);
        assert!((d - 1.8e-3).abs() < 0.05e-3);
        // 7·sqrt(33.2/n) only drops below 1e-6 past n ≈ 1.6·10^15.
        assert!(finite_size_delta(10_000_000_000_000_000, 1e-10, 1e-10).unwrap() < 1e-6);
        let d1 = finite_size_delta(1_000_000, 1e-10, 1.0 - 1e-16).unwrap();
        let d4 = finite_size_delta(4_000_000, 1e-10, 1.0 - 1e-16).unwrap();
        assert!((d1 / d4 - 2.0).abs() < 1e-6);
        assert!(finite_size_delta(0, 0.1, 0.1).is_err());
    }

    #[test]
    fn clamping_contract() {
        let sys = SystemParams::default();
        let r = secret_key_rate(&sys, 0.01, 0.2).unwrap();
        assert!(r.k_raw < 0.0);
        assert_eq!(r.k, 0.0);
        let r = secret_key_rate(&sys, 1.0, 0.02).unwrap();
        assert!(r.k_raw > 0.0);
        assert_eq!(r.k, r.k_raw);
    }

    #[test]
    fn rate_is_positive_then_vanishes() {
        let sys = SystemParams::default();
        let ks: Vec<f64> = (0..=60)
            .map(|l| {
                let ch = ChannelScenario::fiber(l as f64, 0.2, 0.04).unwrap();
                secret_key_rate(&sys, ch.transmittance, ch.eps_tot).unwrap()
            })
            .map(|r| r.k)
            .collect();
        assert!(ks[0] > 0.0);
        let cross = ks.iter().position(|&k| k == 0.0).expect("rate must vanish before 60 km");
        assert!(cross > 0);
        for w in ks.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn matched_detector_has_no_overestimate() {
        let sys = SystemParams::default();
        let ch = ChannelScenario::fiber(7.0, 0.2, 0.04).unwrap();
        let c = key_rate_with_mismatch(&sys, &ch, OverlapCoefficient::MATCHED).unwrap();
        assert_eq!(c.overestimate, 0.0);
    }

    #[test]
    fn negative_worst_case_noise_is_clamped() {
        let sys = SystemParams::default();
        let r = secret_key_rate(&sys, 0.2, -0.5).unwrap();
        assert!(r.eps_max < 0.0);
        assert!(r.s_be.is_finite());
    }
}
