//! Parameter sweeps written as CSV.

use std::io::Write;

use rayon::prelude::*;

use super::config::{Mode, RunConfig, SweepAxis};
use crate::channel_sim::{apply_mismatch, apply_pir_effective, simulate_transmission, ChannelScenario, SystemParams};
use crate::error::Result;
use crate::estimation::estimate_parameters;
use crate::keyrate::{key_rate_with_mismatch, secret_key_rate, secret_key_rate_from_estimate, KeyRateBreakdown};
use crate::physics::OverlapCoefficient;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// One grid point of a sweep, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub gamma: f64,
    pub system: SystemParams,
    pub channel: ChannelScenario,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    /// Key rate as computed by the parties, or the error that aborted it.
    pub outcome: std::result::Result<(KeyRateBreakdown, f64), String>,
}

impl SweepRow {
    pub fn status(&self) -> &str {
        match &self.outcome {
            Ok(_) => "ok",
            Err(kind) => kind,
        }
    }

    pub fn breakdown(&self) -> Option<&KeyRateBreakdown> {
        self.outcome.as_ref().ok().map(|(k, _)| k)
    }

    pub fn overestimate(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|(_, o)| *o)
    }
}

/// Expands the sweep block into points in output order: grid value, then
/// noise level, then overlap, then seed.
pub fn sweep_points(cfg: &RunConfig) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let sw = &cfg.sweep;
    let base_channel = cfg.channel.scenario()?;
    let mut points = Vec::new();
    for &x in &sw.grid {
        let eps_values = if sw.sweep_axis == SweepAxis::EpsTot { vec![x] } else { sw.eps_list.clone() };
        let gammas = if sw.sweep_axis == SweepAxis::Gamma { vec![x] } else { sw.gamma_list.clone() };
        for &eps in &eps_values {
            let mut system = cfg.system.clone();
            let mut channel = base_channel.clone();
            channel.eps_tot = eps;
            match sw.sweep_axis {
                SweepAxis::Distance => {
                    channel = ChannelScenario::fiber(x, channel.alpha_db_per_km, eps)?
                        .with_pir_weight(channel.pir_weight)?
                        .with_pulses(channel.pulses)?;
                }
                SweepAxis::VA => system.v_a = x,
                SweepAxis::Gamma | SweepAxis::EpsTot => {}
            }
            system.validate()?;
            channel.validate()?;
            for &gamma in &gammas {
                OverlapCoefficient::new(gamma)?;
                let seeds: Vec<Option<u64>> = match sw.mode {
                    Mode::Asymptotic => vec![None],
                    Mode::MonteCarlo => sw.seeds.iter().copied().map(Some).collect(),
                };
                for seed in seeds {
                    points.push(SweepPoint {
                        axis_value: x,
                        gamma,
                        system: system.clone(),
                        channel: channel.clone(),
                        seed,
                    });
                }
            }
        }
    }
    Ok(points)
}

fn evaluate(point: &SweepPoint, mc_samples: usize) -> Result<(KeyRateBreakdown, f64)> {
    let sys = &point.system;
    let ch = apply_pir_effective(&point.channel)?;
    let gamma = OverlapCoefficient::new(point.gamma)?;
    match point.seed {
        None => {
            let cmp = key_rate_with_mismatch(sys, &ch, gamma)?;
            Ok((cmp.k_biased, cmp.overestimate))
        }
        Some(seed) => {
            let data = simulate_transmission(sys, &ch, mc_samples, seed)?;
            let data = apply_mismatch(data, gamma, sys, seed)?;
            let est = estimate_parameters(&data, sys)?;
            let k = secret_key_rate_from_estimate(sys, &est)?;
            let k_true = secret_key_rate(sys, ch.transmittance, ch.eps_tot)?;
            let over = k.k_raw - k_true.k_raw;
            Ok((k, over))
        }
    }
}

/// Evaluates every point on the rayon pool; rows come back in grid order.
pub fn compute_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let points = sweep_points(cfg)?;
    let mc_samples = cfg.sweep.mc_samples;
    Ok(points
        .into_par_iter()
        .map(|point| {
            let outcome = evaluate(&point, mc_samples).map_err(|e| {
                log::warn!("sweep point {} gamma={} failed: {e}", point.axis_value, point.gamma);
                e.kind().to_string()
            });
            SweepRow { point, outcome }
        })
        .collect())
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Writes `# ` comment lines echoing the configuration and tool version.
pub fn write_header<W: Write>(out: &mut W, command: &str, cfg: &RunConfig) -> Result<()> {
    writeln!(out, "# {TOOL_VERSION}")?;
    writeln!(out, "# command={command}")?;
    for line in cfg.echo_lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",")
}

/// Runs the configured sweep and writes it as CSV.
pub fn run_figure_sweep<W: Write>(cfg: &RunConfig, mut out: W) -> Result<()> {
    let rows = compute_sweep(cfg)?;
    let sw = &cfg.sweep;
    write_header(&mut out, "sweep", cfg)?;
    writeln!(
        out,
        "# sweep recipe={} axis={} grid={} gammas={} eps_list={} mode={} seeds={} mc_samples={}",
        sw.recipe.map(|r| r.to_string()).unwrap_or_else(|| "none".into()),
        sw.sweep_axis.name(),
        list(&sw.grid),
        list(&sw.gamma_list),
        list(&sw.eps_list),
        sw.mode.name(),
        sw.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        sw.mc_samples,
    )?;

    let mc = sw.mode == Mode::MonteCarlo;
    let mut w = csv::Writer::from_writer(&mut out);
    let mut header =
        vec!["axis", "axis_value", "gamma", "distance_km", "transmittance", "v_a", "eps_tot", "pir_weight"];
    if mc {
        header.push("seed");
    }
    header.extend(["t_used", "eps_used", "i_ab", "s_be", "delta_n", "k_raw", "k", "overestimate", "status"]);
    w.write_record(&header)?;

    let nan = f64::NAN;
    for row in &rows {
        let p = &row.point;
        let mut rec = vec![
            sw.sweep_axis.name().to_string(),
            fmt(p.axis_value),
            fmt(p.gamma),
            fmt(p.channel.distance_km),
            fmt(p.channel.transmittance),
            fmt(p.system.v_a),
            fmt(p.channel.eps_tot),
            fmt(p.channel.pir_weight),
        ];
        if mc {
            rec.push(p.seed.map(|s| s.to_string()).unwrap_or_default());
        }
        let b = row.breakdown();
        let pick = |f: fn(&KeyRateBreakdown) -> f64| fmt(b.map(f).unwrap_or(nan));
        rec.extend([
            pick(|b| b.t_used),
            pick(|b| b.eps_used),
            pick(|b| b.i_ab),
            pick(|b| b.s_be),
            pick(|b| b.delta_n),
            pick(|b| b.k_raw),
            pick(|b| b.k),
            fmt(row.overestimate().unwrap_or(nan)),
            row.status().to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{Recipe, SweepConfig};

    fn cfg(recipe: Recipe) -> RunConfig {
        RunConfig { sweep: SweepConfig::from_recipe(recipe), ..RunConfig::default() }
    }

    #[test]
    fn fig6a_shape() {
        let rows = compute_sweep(&cfg(Recipe::Fig6a)).unwrap();
        assert_eq!(rows.len(), 61 * 4);
        assert_eq!(rows[0].point.gamma, 1.0);
        assert_eq!(rows[3].point.gamma, 0.95);
        assert_eq!(rows[4].point.axis_value, 1.0);
        assert!(rows.iter().all(|r| r.status() == "ok"));
        // γ = 1 rows carry no overestimate.
        assert!(rows.iter().filter(|r| r.point.gamma == 1.0).all(|r| r.overestimate() == Some(0.0)));
    }

    #[test]
    fn gamma_axis_ignores_overlay() {
        let rows = compute_sweep(&cfg(Recipe::Fig5)).unwrap();
        assert_eq!(rows.len(), 41 * 3);
        let last = rows.last().unwrap();
        assert_eq!(last.point.gamma, 1.0);
        let b = last.breakdown().unwrap();
        assert_eq!(b.eps_used, 0.04);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        run_figure_sweep(&cfg(Recipe::Fig7), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines.next().unwrap();
        assert!(header.starts_with("axis,axis_value,gamma,distance_km"));
        assert!(header.ends_with("overestimate,status"));
        assert_eq!(lines.count(), 100 * 4);
        assert!(text.contains(TOOL_VERSION));
    }

    #[test]
    fn monte_carlo_rows_per_seed() {
        let mut c = cfg(Recipe::Fig6a);
        c.sweep.mode = Mode::MonteCarlo;
        c.sweep.grid = vec![5.0];
        c.sweep.gamma_list = vec![1.0, 0.9];
        c.sweep.seeds = vec![1, 2];
        c.sweep.mc_samples = 20_000;
        let rows = compute_sweep(&c).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].point.seed, Some(2));
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_figure_sweep(&c, &mut a).unwrap();
        run_figure_sweep(&c, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failed_points_keep_their_row() {
        let mut c = cfg(Recipe::Fig6a);
        c.system = c.system.with_blocks(1000, 500).unwrap();
        c.sweep.grid = vec![200.0];
        c.sweep.gamma_list = vec![1.0];
        let rows = compute_sweep(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].status(), "insufficient_statistics");
        let mut buf = Vec::new();
        run_figure_sweep(&c, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("NaN,insufficient_statistics"));
    }
}
