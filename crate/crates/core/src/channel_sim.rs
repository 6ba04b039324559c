//! Monte Carlo generation of correlated Alice/Bob quadrature data.
//!
//! The channel is the linear model `x_B = t·x_A + z` with `t = sqrt(η·T)` and
//! `z ~ N(0, η·T·ξ + N_0 + V_el)`. A pulse-width mismatch at Bob's detector
//! replaces the measured value by `γ·x_B + sqrt(1−γ²)·x_vac`. A partial
//! intercept-resend attack is either folded into the excess noise
//! ([`apply_pir_effective`]) or sampled as a two-component mixture
//! ([`sample_pir_mixture`]).
//!
//! All variances are in units where the shot noise is `N_0` (1 by default).

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, ensure_finite, Error, Result};
use crate::physics::{OverlapCoefficient, PulseSpec};
use crate::rng::{self, Stream};

/// Trusted-station constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Modulation variance V_A (SNU).
    pub v_a: f64,
    /// Homodyne detector efficiency η.
    pub eta: f64,
    /// Electronic noise v_el (SNU).
    pub v_el: f64,
    /// Reverse reconciliation efficiency β.
    pub beta: f64,
    /// Total exchanged pulses N.
    pub n_total: u64,
    /// Pulses kept for the key, n.
    pub n_key: u64,
    /// Pulses disclosed for parameter estimation, m = N − n.
    pub m_est: u64,
    pub eps_pe: f64,
    pub eps_bar: f64,
    pub eps_pa: f64,
    /// Shot-noise variance N_0.
    pub n0: f64,
}

impl Default for SystemParams {
    /// The reference working point used throughout the analysis: V_A = 40,
    /// η = 0.9, v_el = 0.1, β = 0.8, N = 10⁹, n = N/2, all ε = 10⁻¹⁰.
    fn default() -> Self {
        Self {
            v_a: 40.0,
            eta: 0.9,
            v_el: 0.1,
            beta: 0.8,
            n_total: 1_000_000_000,
            n_key: 500_000_000,
            m_est: 500_000_000,
            eps_pe: 1e-10,
            eps_bar: 1e-10,
            eps_pa: 1e-10,
            n0: 1.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("v_a", self.v_a), ("eta", self.eta), ("v_el", self.v_el), ("beta", self.beta), ("n0", self.n0)]
        {
            ensure_finite(name, v)?;
        }
        if self.v_a <= 0.0 {
            return Err(domain(format!("v_a must be positive, got {}", self.v_a)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(domain(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.v_el < 0.0 {
            return Err(domain(format!("v_el must be non-negative, got {}", self.v_el)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(domain(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if self.n0 <= 0.0 {
            return Err(domain(format!("n0 must be positive, got {}", self.n0)));
        }
        if self.n_key == 0 || self.m_est == 0 || self.n_total == 0 {
            return Err(domain("block sizes must be positive"));
        }
        if self.n_key.checked_add(self.m_est) != Some(self.n_total) {
            return Err(domain(format!(
                "n_key + m_est must equal n_total ({} + {} != {})",
                self.n_key, self.m_est, self.n_total
            )));
        }
        for (name, p) in [("eps_pe", self.eps_pe), ("eps_bar", self.eps_bar), ("eps_pa", self.eps_pa)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(domain(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        Ok(())
    }

    /// Sets N and n, deriving m = N − n.
    pub fn with_blocks(mut self, n_total: u64, n_key: u64) -> Result<Self> {
        if n_key >= n_total {
            return Err(domain(format!("n_key ({n_key}) must be below n_total ({n_total})")));
        }
        self.n_total = n_total;
        self.n_key = n_key;
        self.m_est = n_total - n_key;
        Ok(self)
    }

    /// Alice's quadrature variance in absolute units, V_A·N_0.
    pub fn v_a_abs(&self) -> f64 {
        self.v_a * self.n0
    }

    /// Electronic noise variance in absolute units, V_el = v_el·N_0.
    pub fn v_el_abs(&self) -> f64 {
        self.v_el * self.n0
    }
}

/// Channel truth for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelScenario {
    pub distance_km: f64,
    pub alpha_db_per_km: f64,
    pub transmittance: f64,
    /// Lumped excess noise ε_tot (SNU, channel-input referred).
    pub eps_tot: f64,
    /// Fraction u of pulses intercepted and resent.
    pub pir_weight: f64,
    pub pulses: PulseSpec,
}

/// Fiber transmittance `10^(−α·L/10)`.
pub fn fiber_transmittance(distance_km: f64, alpha_db_per_km: f64) -> f64 {
    10f64.powf(-alpha_db_per_km * distance_km / 10.0)
}

impl ChannelScenario {
    /// Fiber channel of the given length; transmittance follows from the loss.
    pub fn fiber(distance_km: f64, alpha_db_per_km: f64, eps_tot: f64) -> Result<Self> {
        if !(distance_km >= 0.0 && distance_km.is_finite()) {
            return Err(domain(format!("distance must be non-negative, got {distance_km}")));
        }
        if !(alpha_db_per_km >= 0.0 && alpha_db_per_km.is_finite()) {
            return Err(domain(format!("fiber loss must be non-negative, got {alpha_db_per_km}")));
        }
        let s = Self {
            distance_km,
            alpha_db_per_km,
            transmittance: fiber_transmittance(distance_km, alpha_db_per_km),
            eps_tot,
            pir_weight: 0.0,
            pulses: PulseSpec { tau_s: 1.0, tau_lo: 1.0 },
        };
        s.validate()?;
        Ok(s)
    }

    /// Channel with a directly specified transmittance (distance reported as
    /// the equivalent fiber length at 0.2 dB/km).
    pub fn with_transmittance(transmittance: f64, eps_tot: f64) -> Result<Self> {
        let alpha = 0.2;
        let distance_km = if transmittance > 0.0 { -10.0 * transmittance.log10() / alpha } else { f64::NAN };
        let s = Self {
            distance_km,
            alpha_db_per_km: alpha,
            transmittance,
            eps_tot,
            pir_weight: 0.0,
            pulses: PulseSpec { tau_s: 1.0, tau_lo: 1.0 },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_pir_weight(mut self, u: f64) -> Result<Self> {
        self.pir_weight = u;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pulses(mut self, pulses: PulseSpec) -> Result<Self> {
        self.pulses = PulseSpec::new(pulses.tau_s, pulses.tau_lo)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.transmittance > 0.0 && self.transmittance <= 1.0) {
            return Err(domain(format!("transmittance must lie in (0, 1], got {}", self.transmittance)));
        }
        if !(self.eps_tot >= 0.0 && self.eps_tot.is_finite()) {
            return Err(domain(format!("eps_tot must be non-negative, got {}", self.eps_tot)));
        }
        if !(0.0..=1.0).contains(&self.pir_weight) {
            return Err(domain(format!("pir_weight must lie in [0, 1], got {}", self.pir_weight)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    fn transmission_stream(self) -> Stream {
        match self {
            Quadrature::X => Stream::TransmissionX,
            Quadrature::P => Stream::TransmissionP,
        }
    }

    fn vacuum_stream(self) -> Stream {
        match self {
            Quadrature::X => Stream::VacuumX,
            Quadrature::P => Stream::VacuumP,
        }
    }

    fn mixture_stream(self) -> Stream {
        match self {
            Quadrature::X => Stream::PirMixtureX,
            Quadrature::P => Stream::PirMixtureP,
        }
    }
}

impl fmt::Display for Quadrature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quadrature::X => "X",
            Quadrature::P => "P",
        })
    }
}

impl FromStr for Quadrature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "X" | "x" => Ok(Quadrature::X),
            "P" | "p" => Ok(Quadrature::P),
            other => Err(Error::Argument(format!("unknown quadrature {other:?}, expected X or P"))),
        }
    }
}

/// Paired Alice/Bob quadrature samples.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    pub x_a: Vec<f64>,
    pub x_b: Vec<f64>,
    pub quadrature: Quadrature,
    pub seed: u64,
    /// Overlap applied at detection; 1 for a matched detector.
    pub gamma_applied: f64,
}

/// Zero-mean second moments of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub var_a: f64,
    pub var_b: f64,
    pub cov_ab: f64,
}

impl QuadratureDataset {
    pub fn new(x_a: Vec<f64>, x_b: Vec<f64>, quadrature: Quadrature, seed: u64, gamma_applied: f64) -> Result<Self> {
        if x_a.len() != x_b.len() {
            return Err(Error::Argument(format!("x_a and x_b lengths differ ({} vs {})", x_a.len(), x_b.len())));
        }
        if x_a.len() < 2 {
            return Err(Error::Argument(format!("dataset needs at least 2 samples, got {}", x_a.len())));
        }
        Ok(Self { x_a, x_b, quadrature, seed, gamma_applied })
    }

    pub fn len(&self) -> usize {
        self.x_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_a.is_empty()
    }

    /// Second moments `⟨x_A²⟩`, `⟨x_B²⟩`, `⟨x_A·x_B⟩` about the known zero mean.
    pub fn moments(&self) -> SampleMoments {
        let m = self.len() as f64;
        let (mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0);
        for (&a, &b) in self.x_a.iter().zip(&self.x_b) {
            aa += a * a;
            bb += b * b;
            ab += a * b;
        }
        SampleMoments { var_a: aa / m, var_b: bb / m, cov_ab: ab / m }
    }

    /// Writes the columnar text format: one `# seed=.. quadrature=.. gamma=..`
    /// header line, then `x_a,x_b` per line with 17 significant digits.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# seed={} quadrature={} gamma={}", self.seed, self.quadrature, self.gamma_applied)?;
        for (a, b) in self.x_a.iter().zip(&self.x_b) {
            writeln!(w, "{a:.16e},{b:.16e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut seed = None;
        let mut quadrature = None;
        let mut gamma = None;
        let mut x_a = Vec::new();
        let mut x_b = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(header) = trimmed.strip_prefix('#') {
                for field in header.split_whitespace() {
                    let Some((k, v)) = field.split_once('=') else { continue };
                    let bad = |e: String| Error::Parse { line: lineno, message: e };
                    match k {
                        "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?),
                        "quadrature" => quadrature = Some(v.parse::<Quadrature>()?),
                        "gamma" => gamma = Some(v.parse::<f64>().map_err(|e| bad(format!("gamma: {e}")))?),
                        _ => {}
                    }
                }
                continue;
            }
            if trimmed == "x_a,x_b" {
                continue;
            }
            let (a, b) = trimmed.split_once(',').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("expected `x_a,x_b`, got {trimmed:?}"),
            })?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse { line: lineno, message: format!("{s:?}: {e}") })
            };
            x_a.push(parse(a)?);
            x_b.push(parse(b)?);
        }
        let seed = seed.ok_or_else(|| Error::Parse { line: 1, message: "missing seed in header".into() })?;
        let quadrature =
            quadrature.ok_or_else(|| Error::Parse { line: 1, message: "missing quadrature in header".into() })?;
        let gamma = gamma.ok_or_else(|| Error::Parse { line: 1, message: "missing gamma in header".into() })?;
        Self::new(x_a, x_b, quadrature, seed, gamma)
    }
}

fn check_count(count: usize) -> Result<()> {
    if count < 2 {
        Err(Error::Argument(format!("sample count must be at least 2, got {count}")))
    } else {
        Ok(())
    }
}

/// Variance of the channel noise `z`, `η·T·ξ + N_0 + V_el`, with `ξ = ε·N_0`.
fn noise_variance(sys: &SystemParams, transmittance: f64, eps: f64) -> f64 {
    sys.eta * transmittance * eps * sys.n0 + sys.n0 + sys.v_el_abs()
}

/// X-quadrature data through the linear channel with a matched detector.
pub fn simulate_transmission(
    sys: &SystemParams,
    ch: &ChannelScenario,
    count: usize,
    seed: u64,
) -> Result<QuadratureDataset> {
    simulate_quadrature(sys, ch, count, seed, Quadrature::X)
}

/// As [`simulate_transmission`] for either quadrature; X and P draw from
/// disjoint random streams.
pub fn simulate_quadrature(
    sys: &SystemParams,
    ch: &ChannelScenario,
    count: usize,
    seed: u64,
    quadrature: Quadrature,
) -> Result<QuadratureDataset> {
    check_count(count)?;
    sys.validate()?;
    ch.validate()?;
    let gain = (sys.eta * ch.transmittance).sqrt();
    let sd_a = sys.v_a_abs().sqrt();
    let sd_z = noise_variance(sys, ch.transmittance, ch.eps_tot).sqrt();

    let mut rng = rng::stream(seed, quadrature.transmission_stream());
    let mut x_a = Vec::with_capacity(count);
    let mut x_b = Vec::with_capacity(count);
    for _ in 0..count {
        let a = sd_a * rng.sample::<f64, _>(StandardNormal);
        let z = sd_z * rng.sample::<f64, _>(StandardNormal);
        x_a.push(a);
        x_b.push(gain * a + z);
    }
    QuadratureDataset::new(x_a, x_b, quadrature, seed, 1.0)
}

/// Projects Bob's data onto a mismatched LO mode: `x_B' = γ·x_B + sqrt(1−γ²)·v`
/// with fresh vacuum `v ~ N(0, N_0)`. A matched detector leaves the data
/// untouched.
pub fn apply_mismatch(
    mut data: QuadratureDataset,
    gamma: OverlapCoefficient,
    sys: &SystemParams,
    seed: u64,
) -> Result<QuadratureDataset> {
    let g = gamma.value();
    if g == 1.0 {
        return Ok(data);
    }
    let leak = ((1.0 - g * g) * sys.n0).sqrt();
    let mut rng = rng::stream(seed, data.quadrature.vacuum_stream());
    for b in data.x_b.iter_mut() {
        let v: f64 = rng.sample(StandardNormal);
        *b = g * *b + leak * v;
    }
    data.gamma_applied *= g;
    Ok(data)
}

/// Folds a partial intercept-resend attack into the excess noise:
/// `ε ← ε + 2u` (in SNU). The attack weight is kept for reporting.
pub fn apply_pir_effective(ch: &ChannelScenario) -> Result<ChannelScenario> {
    ch.validate()?;
    let mut out = ch.clone();
    out.eps_tot = ch.eps_tot + 2.0 * ch.pir_weight;
    Ok(out)
}

/// Samples the attack as a two-component Gaussian mixture: with probability
/// `u` a pulse goes through Eve's measure-and-resend branch, which adds
/// `2·N_0` of channel-input referred noise; otherwise it is untouched.
pub fn sample_pir_mixture(
    sys: &SystemParams,
    ch: &ChannelScenario,
    count: usize,
    seed: u64,
) -> Result<QuadratureDataset> {
    check_count(count)?;
    sys.validate()?;
    ch.validate()?;
    let u = ch.pir_weight;
    let t = ch.transmittance;
    let gain = (sys.eta * t).sqrt();
    let sd_a = sys.v_a_abs().sqrt();
    let sd_clean = noise_variance(sys, t, ch.eps_tot).sqrt();
    let sd_resend = noise_variance(sys, t, ch.eps_tot + 2.0).sqrt();

    let quadrature = Quadrature::X;
    let mut rng = rng::stream(seed, quadrature.mixture_stream());
    let mut x_a = Vec::with_capacity(count);
    let mut x_b = Vec::with_capacity(count);
    for _ in 0..count {
        let resent = rng.gen::<f64>() < u;
        let a = sd_a * rng.sample::<f64, _>(StandardNormal);
        let n: f64 = rng.sample(StandardNormal);
        let sd = if resent { sd_resend } else { sd_clean };
        x_a.push(a);
        x_b.push(gain * a + sd * n);
    }
    QuadratureDataset::new(x_a, x_b, quadrature, seed, 1.0)
}
