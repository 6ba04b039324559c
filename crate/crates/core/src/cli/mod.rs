//! Front end behind the `cvqkd-mismatch` binary. Every command writes to a
//! caller-supplied writer so it can be driven in-process.

pub mod config;
pub mod sweep;

use std::io::{BufRead, Write};

pub use config::{ChannelDefaults, CountermeasureConfig, Mode, Recipe, RunConfig, SweepAxis, SweepConfig};
pub use sweep::{compute_sweep, run_figure_sweep, SweepRow, TOOL_VERSION};

use crate::channel_sim::{
    apply_mismatch, apply_pir_effective, sample_pir_mixture, simulate_quadrature, Quadrature, QuadratureDataset,
};
use crate::countermeasure::{monitor_and_correct, WidthReport};
use crate::error::{Error, Result};
use crate::estimation::{concealing_overlap, estimate_parameters, mismatch_bias, pir_concealed_noise};
use crate::keyrate::{key_rate_with_mismatch, secret_key_rate_from_estimate, KeyRateBreakdown};
use crate::physics::{OverlapCoefficient, PulseSpec};

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn write_breakdown<W: Write>(out: &mut W, prefix: &str, b: &KeyRateBreakdown) -> Result<()> {
    let fields = [
        ("t_used", b.t_used),
        ("eps_used", b.eps_used),
        ("t_min", b.t_min),
        ("eps_max", b.eps_max),
        ("chi_line", b.budget.chi_line),
        ("chi_hom", b.budget.chi_hom),
        ("chi_tot", b.budget.chi_tot),
        ("i_ab", b.i_ab),
        ("s_be", b.s_be),
        ("delta_n", b.delta_n),
        ("lambda1", b.lambdas[0]),
        ("lambda2", b.lambdas[1]),
        ("lambda3", b.lambdas[2]),
        ("lambda4", b.lambdas[3]),
        ("lambda5", b.lambdas[4]),
        ("k_raw", b.k_raw),
        ("k", b.k),
    ];
    for (name, v) in fields {
        writeln!(out, "{prefix}{name}={}", fmt(v))?;
    }
    Ok(())
}

/// Overlap from an explicit value, falling back to the configured pulses.
fn resolve_gamma(cfg: &RunConfig, gamma: Option<f64>) -> Result<OverlapCoefficient> {
    match gamma {
        Some(g) => OverlapCoefficient::new(g),
        None => PulseSpec::new(cfg.channel.tau_s, cfg.channel.tau_lo)?.overlap(),
    }
}

/// Single operating point: true and mismatch-biased key rates as
/// `key=value` lines.
pub fn run_keyrate<W: Write>(cfg: &RunConfig, gamma: Option<f64>, mut out: W) -> Result<()> {
    cfg.validate()?;
    let gamma = resolve_gamma(cfg, gamma)?;
    let ch = apply_pir_effective(&cfg.channel.scenario()?)?;
    let cmp = key_rate_with_mismatch(&cfg.system, &ch, gamma)?;
    writeln!(out, "gamma={}", fmt(gamma.value()))?;
    writeln!(out, "distance_km={}", fmt(ch.distance_km))?;
    writeln!(out, "transmittance={}", fmt(ch.transmittance))?;
    writeln!(out, "eps_tot={}", fmt(ch.eps_tot))?;
    write_breakdown(&mut out, "true.", &cmp.k_true)?;
    write_breakdown(&mut out, "biased.", &cmp.k_biased)?;
    writeln!(out, "overestimate={}", fmt(cmp.overestimate))?;
    Ok(())
}

/// How the partial intercept-resend attack is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PirModel {
    /// Folded into the excess noise.
    Effective,
    /// Explicit two-component Gaussian mixture.
    Mixture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub count: usize,
    pub seed: u64,
    pub quadrature: Quadrature,
    pub gamma: Option<f64>,
    pub pir_model: PirModel,
}

pub fn simulate_dataset(cfg: &RunConfig, args: &SimulateArgs) -> Result<QuadratureDataset> {
    cfg.validate()?;
    let gamma = resolve_gamma(cfg, args.gamma)?;
    let ch = cfg.channel.scenario()?;
    let data = match args.pir_model {
        PirModel::Effective => {
            simulate_quadrature(&cfg.system, &apply_pir_effective(&ch)?, args.count, args.seed, args.quadrature)?
        }
        PirModel::Mixture => {
            if args.quadrature != Quadrature::X {
                return Err(Error::Argument("the mixture model samples the X quadrature only".into()));
            }
            sample_pir_mixture(&cfg.system, &ch, args.count, args.seed)?
        }
    };
    apply_mismatch(data, gamma, &cfg.system, args.seed)
}

/// Generates a dataset and writes it in the two-column text format.
pub fn run_simulate<W: Write>(cfg: &RunConfig, args: &SimulateArgs, out: W) -> Result<()> {
    simulate_dataset(cfg, args)?.write_to(out)
}

/// Reads a dataset and reports the estimation pipeline and the key rate the
/// parties would compute from it.
pub fn run_estimate<R: BufRead, W: Write>(cfg: &RunConfig, input: R, mut out: W) -> Result<()> {
    cfg.validate()?;
    let data = QuadratureDataset::read_from(input)?;
    let sys = &cfg.system;
    let est = estimate_parameters(&data, sys)?;
    writeln!(out, "m={}", est.m_used)?;
    writeln!(out, "quadrature={}", data.quadrature)?;
    writeln!(out, "seed={}", data.seed)?;
    let fields = [
        ("t_hat", est.t_hat),
        ("sigma2_hat", est.sigma2_hat),
        ("delta_t", est.delta_t),
        ("delta_sigma2", est.delta_sigma2),
        ("t_min", est.t_min_transmittance),
        ("eps_max", est.eps_max),
        ("t_point", est.t_point(sys)),
        ("eps_point", est.eps_point(sys)),
        ("t_naive", est.t_naive),
        ("xi_naive", est.xi_naive),
    ];
    for (name, v) in fields {
        writeln!(out, "{name}={}", fmt(v))?;
    }
    writeln!(out, "negative_noise={}", est.negative_noise)?;
    match secret_key_rate_from_estimate(sys, &est) {
        Ok(k) => write_breakdown(&mut out, "key.", &k)?,
        Err(e) => writeln!(out, "key.status={}", e.kind())?,
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackArgs {
    pub gammas: Vec<f64>,
    pub weights: Vec<f64>,
    /// Noise level the parties would accept; used to report the overlap
    /// that hides each attack weight.
    pub threshold: f64,
}

impl Default for AttackArgs {
    fn default() -> Self {
        Self {
            gammas: config::linear_grid(0.8, 1.0, 0.01).expect("static grid"),
            weights: vec![0.0, 0.05, 0.1, 0.2],
            threshold: 0.1,
        }
    }
}

/// Table of the excess noise the parties see under an intercept-resend
/// attack, per overlap and attack weight.
pub fn run_attack<W: Write>(cfg: &RunConfig, args: &AttackArgs, mut out: W) -> Result<()> {
    cfg.validate()?;
    let sys = &cfg.system;
    let ch = cfg.channel.scenario()?;
    let t = ch.transmittance;
    sweep::write_header(&mut out, "attack", cfg)?;
    writeln!(out, "# threshold={}", fmt(args.threshold))?;
    for &u in &args.weights {
        let hiding = concealing_overlap(ch.eps_tot, u, args.threshold, sys, t)?;
        let shown = hiding.map(|g| fmt(g.value())).unwrap_or_else(|| "none".into());
        writeln!(out, "# concealing_gamma u={} gamma={shown}", fmt(u))?;
    }
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record([
        "gamma",
        "pir_weight",
        "eps_tot",
        "transmittance",
        "v_el_over_eta_t",
        "eps_attacked",
        "eps_measured",
        "t_measured",
        "concealed",
    ])?;
    for &g in &args.gammas {
        let gamma = OverlapCoefficient::new(g)?;
        for &u in &args.weights {
            let measured = pir_concealed_noise(ch.eps_tot, u, gamma, sys, t)?;
            let bias = mismatch_bias(t, ch.eps_tot + 2.0 * u, gamma, sys)?;
            w.write_record([
                fmt(g),
                fmt(u),
                fmt(ch.eps_tot),
                fmt(t),
                fmt(sys.v_el / (sys.eta * t)),
                fmt(ch.eps_tot + 2.0 * u),
                fmt(measured),
                fmt(bias.t_prime),
                (measured <= args.threshold).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Result of one monitor-and-correct cycle on the configured pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct CountermeasureOutcome {
    pub report: WidthReport,
    pub before: PulseSpec,
    pub after: PulseSpec,
    pub gamma_before: f64,
    pub gamma_after: f64,
}

pub fn countermeasure_cycle(cfg: &RunConfig) -> Result<CountermeasureOutcome> {
    cfg.validate()?;
    let before = PulseSpec::new(cfg.channel.tau_s, cfg.channel.tau_lo)?;
    let cm = &cfg.countermeasure;
    let (report, after) = monitor_and_correct(before, &cm.monitor(), cm.seed)?;
    Ok(CountermeasureOutcome {
        report,
        before,
        after,
        gamma_before: before.overlap()?.value(),
        gamma_after: after.overlap()?.value(),
    })
}

/// Monitors the configured pulses, corrects the LO, and writes the key-rate
/// overestimate before and after correction over the distance grid (the
/// sweep grid when it is a distance sweep, 0–60 km otherwise) for each
/// configured noise level.
pub fn run_countermeasure_demo<W: Write>(cfg: &RunConfig, mut out: W) -> Result<()> {
    let o = countermeasure_cycle(cfg)?;
    sweep::write_header(&mut out, "countermeasure", cfg)?;
    let cm = &cfg.countermeasure;
    writeln!(
        out,
        "# monitor samples={} span={} noise_sigma={} peak={} tolerance={} seed={}",
        cm.samples,
        fmt(cm.span),
        fmt(cm.noise_sigma),
        fmt(cm.peak),
        fmt(cm.tolerance),
        cm.seed
    )?;
    let r = &o.report;
    writeln!(out, "# tau_hat_s={}", fmt(r.tau_hat_s))?;
    writeln!(out, "# tau_hat_lo={}", fmt(r.tau_hat_lo))?;
    writeln!(out, "# mismatch_ratio={}", fmt(r.mismatch_ratio))?;
    writeln!(out, "# matched={}", r.matched)?;
    writeln!(out, "# correction_factor={}", fmt(r.correction_factor))?;
    writeln!(out, "# tau_lo_corrected={}", fmt(o.after.tau_lo))?;
    writeln!(out, "# gamma_pre={}", fmt(o.gamma_before))?;
    writeln!(out, "# gamma_post={}", fmt(o.gamma_after))?;

    let grid = if cfg.sweep.sweep_axis == SweepAxis::Distance {
        cfg.sweep.grid.clone()
    } else {
        config::linear_grid(0.0, 60.0, 1.0)?
    };
    let g_pre = OverlapCoefficient::new(o.gamma_before)?;
    let g_post = OverlapCoefficient::new(o.gamma_after)?;
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record([
        "distance_km",
        "transmittance",
        "eps_tot",
        "gamma_pre",
        "gamma_post",
        "k_true_raw",
        "k_pre_raw",
        "k_post_raw",
        "overestimate_pre",
        "overestimate_post",
        "status",
    ])?;
    for &eps in &cfg.sweep.eps_list {
        for &d in &grid {
            let ch = apply_pir_effective(
                &crate::channel_sim::ChannelScenario::fiber(d, cfg.channel.alpha_db_per_km, eps)?
                    .with_pir_weight(cfg.channel.pir_weight)?,
            )?;
            let pre = key_rate_with_mismatch(&cfg.system, &ch, g_pre);
            let post = key_rate_with_mismatch(&cfg.system, &ch, g_post);
            let mut rec = vec![fmt(d), fmt(ch.transmittance), fmt(ch.eps_tot), fmt(o.gamma_before), fmt(o.gamma_after)];
            match (pre, post) {
                (Ok(pre), Ok(post)) => {
                    rec.extend([
                        fmt(pre.k_true.k_raw),
                        fmt(pre.k_biased.k_raw),
                        fmt(post.k_biased.k_raw),
                        fmt(pre.overestimate),
                        fmt(post.overestimate),
                        "ok".into(),
                    ]);
                }
                (Err(e), _) | (_, Err(e)) => {
                    rec.extend(std::iter::repeat_n(fmt(f64::NAN), 5));
                    rec.push(e.kind().into());
                }
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
