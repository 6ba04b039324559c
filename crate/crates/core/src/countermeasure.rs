//! Digital model of the pulse-width monitor.
//!
//! A small fraction of the signal and of the LO is tapped, sampled by an
//! ADC, and the two widths are compared. When they differ the LO is
//! stretched or compressed by the ratio so that `τ_LO = τ_s` and the overlap
//! returns to 1.
//!
//! The optical front end is reduced to intensity scaling, multiplicative
//! amplitude noise and uniform sampling. Widths are measured with a
//! baseline-subtracted, intensity-weighted RMS moment: an intensity
//! `exp(−t²/τ²)` has RMS width `τ/√2`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::physics::PulseSpec;
use crate::rng::{self, Stream};

pub const MIN_SAMPLES: usize = 64;
/// Default relative width tolerance below which no correction is applied.
pub const DEFAULT_TOLERANCE: f64 = 0.01;
pub const DEFAULT_TAP_FRACTION: f64 = 0.01;
/// Peak-to-floor-noise ratio below which the width estimate is refused.
pub const MIN_SNR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub timestamps: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub noise_sigma: f64,
    pub tap_fraction: f64,
}

impl SampledWaveform {
    pub fn new(timestamps: Vec<f64>, amplitudes: Vec<f64>, noise_sigma: f64, tap_fraction: f64) -> Result<Self> {
        if timestamps.len() != amplitudes.len() {
            return Err(Error::Argument("timestamps and amplitudes differ in length".into()));
        }
        if timestamps.len() < MIN_SAMPLES {
            return Err(Error::Argument(format!(
                "waveform needs at least {MIN_SAMPLES} samples, got {}",
                timestamps.len()
            )));
        }
        let step = timestamps[1] - timestamps[0];
        if !(step > 0.0) {
            return Err(Error::Argument("timestamps must be strictly increasing".into()));
        }
        for w in timestamps.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) || (d - step).abs() > 1e-9 * step.max(w[1].abs()) {
                return Err(Error::Argument("timestamps must be uniformly spaced".into()));
            }
        }
        Ok(Self { timestamps, amplitudes, noise_sigma, tap_fraction })
    }

    /// Two-column `time,amplitude` dump.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# noise_sigma={} tap_fraction={}", self.noise_sigma, self.tap_fraction)?;
        for (t, a) in self.timestamps.iter().zip(&self.amplitudes) {
            writeln!(w, "{t:.16e},{a:.16e}")?;
        }
        Ok(())
    }
}

/// Which tap a waveform comes from; selects an independent noise stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TapSource {
    Signal,
    LocalOscillator,
}

impl TapSource {
    fn stream(self) -> Stream {
        match self {
            TapSource::Signal => Stream::TapSignal,
            TapSource::LocalOscillator => Stream::TapLocalOscillator,
        }
    }
}

/// Uniform sampling window of total width `span`, centered on the pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleGrid {
    pub span: f64,
    pub count: usize,
}

/// Samples the intensity `peak·exp(−t²/τ²)` of a Gaussian pulse with
/// multiplicative noise `(1 + N(0, noise_sigma))`, floored at zero.
pub fn synthesize_tap(
    tau: f64,
    peak: f64,
    grid: SampleGrid,
    noise_sigma: f64,
    seed: u64,
    source: TapSource,
) -> Result<SampledWaveform> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain(format!("pulse width must be positive, got {tau}")));
    }
    if grid.count < MIN_SAMPLES {
        return Err(Error::Argument(format!("need at least {MIN_SAMPLES} samples, got {}", grid.count)));
    }
    if !(grid.span >= 6.0 * tau) {
        return Err(Error::SupportTruncation(format!(
            "window span {} does not cover ±3τ of a pulse with τ = {tau}",
            grid.span
        )));
    }
    if !(noise_sigma >= 0.0) {
        return Err(domain(format!("noise level must be non-negative, got {noise_sigma}")));
    }
    let half = 0.5 * grid.span;
    let step = grid.span / (grid.count - 1) as f64;
    let mut rng = rng::stream(seed, source.stream());
    let mut timestamps = Vec::with_capacity(grid.count);
    let mut amplitudes = Vec::with_capacity(grid.count);
    for i in 0..grid.count {
        let t = -half + i as f64 * step;
        let clean = peak * (-(t * t) / (tau * tau)).exp();
        let a = if noise_sigma > 0.0 {
            let n: f64 = rng.sample(StandardNormal);
            (clean * (1.0 + noise_sigma * n)).max(0.0)
        } else {
            clean
        };
        timestamps.push(t);
        amplitudes.push(a);
    }
    SampledWaveform::new(timestamps, amplitudes, noise_sigma, DEFAULT_TAP_FRACTION)
}

/// Estimates `τ` from a sampled intensity profile.
///
/// The floor is the mean of the outer 10% of samples (5% at each end); the
/// profile is rejected when its peak above the floor is less than
/// [`MIN_SNR`] times the floor's scatter, or when the region above half
/// maximum splits into separate lobes.
pub fn estimate_pulse_width(w: &SampledWaveform) -> Result<f64> {
    let n = w.amplitudes.len();
    if n < MIN_SAMPLES {
        return Err(Error::EstimationFailure(format!("only {n} samples")));
    }
    let edge = (n / 20).max(1);
    let floor: Vec<f64> = w.amplitudes[..edge].iter().chain(&w.amplitudes[n - edge..]).copied().collect();
    let baseline = floor.iter().sum::<f64>() / floor.len() as f64;
    let floor_sd = (floor.iter().map(|a| (a - baseline).powi(2)).sum::<f64>() / floor.len() as f64).sqrt();

    let signal: Vec<f64> = w.amplitudes.iter().map(|a| a - baseline).collect();
    let peak = signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) || peak < MIN_SNR * floor_sd {
        return Err(Error::EstimationFailure(format!(
            "peak {peak:.3e} above floor is below SNR {MIN_SNR} (floor scatter {floor_sd:.3e})"
        )));
    }
    if lobes_above_half_max(&signal, peak) != 1 {
        return Err(Error::EstimationFailure("waveform is not unimodal".into()));
    }

    let total: f64 = signal.iter().sum();
    let centroid = signal.iter().zip(&w.timestamps).map(|(a, t)| a * t).sum::<f64>() / total;
    let second = signal.iter().zip(&w.timestamps).map(|(a, t)| a * (t - centroid).powi(2)).sum::<f64>() / total;
    if !(second > 0.0) {
        return Err(Error::EstimationFailure(format!("non-positive second moment {second}")));
    }
    Ok(std::f64::consts::SQRT_2 * second.sqrt())
}

/// Counts contiguous runs above half maximum, bridging gaps of a few samples
/// so that noise flicker at the crossing does not split a lobe.
fn lobes_above_half_max(signal: &[f64], peak: f64) -> usize {
    let max_gap = (signal.len() / 64).max(3);
    let mut lobes = 0;
    let mut last_above: Option<usize> = None;
    for (i, &a) in signal.iter().enumerate() {
        if a >= 0.5 * peak {
            match last_above {
                Some(j) if i - j <= max_gap => {}
                _ => lobes += 1,
            }
            last_above = Some(i);
        }
    }
    lobes
}

/// Outcome of comparing the two measured widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthReport {
    pub tau_hat_s: f64,
    pub tau_hat_lo: f64,
    pub mismatch_ratio: f64,
    pub matched: bool,
    /// Multiplicative stretch for the LO width; 1 when matched.
    pub correction_factor: f64,
}

pub fn compare_and_correct(tau_hat_s: f64, tau_hat_lo: f64, tolerance: f64) -> Result<WidthReport> {
    if !(tau_hat_s > 0.0 && tau_hat_lo > 0.0) {
        return Err(domain(format!("width estimates must be positive, got {tau_hat_s} and {tau_hat_lo}")));
    }
    if !(tolerance > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tolerance}")));
    }
    let mismatch_ratio = tau_hat_lo / tau_hat_s;
    let matched = (mismatch_ratio - 1.0).abs() <= tolerance;
    let correction_factor = if matched { 1.0 } else { tau_hat_s / tau_hat_lo };
    Ok(WidthReport { tau_hat_s, tau_hat_lo, mismatch_ratio, matched, correction_factor })
}

/// Stretches the LO by the report's correction factor.
pub fn apply_correction(pulses: PulseSpec, report: &WidthReport) -> Result<PulseSpec> {
    if report.matched {
        return Ok(pulses);
    }
    PulseSpec::new(pulses.tau_s, pulses.tau_lo * report.correction_factor)
}

/// Settings for one monitoring pass over both taps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    pub grid: SampleGrid,
    pub noise_sigma: f64,
    pub peak: f64,
    pub tolerance: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { grid: SampleGrid { span: 12.0, count: 512 }, noise_sigma: 0.0, peak: 1.0, tolerance: DEFAULT_TOLERANCE }
    }
}

/// Taps both pulses, measures their widths and compares them.
pub fn monitor(pulses: PulseSpec, cfg: &MonitorConfig, seed: u64) -> Result<WidthReport> {
    let sig = synthesize_tap(pulses.tau_s, cfg.peak, cfg.grid, cfg.noise_sigma, seed, TapSource::Signal)?;
    let lo = synthesize_tap(pulses.tau_lo, cfg.peak, cfg.grid, cfg.noise_sigma, seed, TapSource::LocalOscillator)?;
    compare_and_correct(estimate_pulse_width(&sig)?, estimate_pulse_width(&lo)?, cfg.tolerance)
}

/// One monitor-and-correct cycle; returns the report and corrected pulses.
pub fn monitor_and_correct(pulses: PulseSpec, cfg: &MonitorConfig, seed: u64) -> Result<(WidthReport, PulseSpec)> {
    let report = monitor(pulses, cfg, seed)?;
    let corrected = apply_correction(pulses, &report)?;
    Ok((report, corrected))
}
