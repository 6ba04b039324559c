//! Run configuration: a flat `key = value` file with `[system]`, `[channel]`,
//! `[sweep]` and `[countermeasure]` sections, overridable from the command
//! line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::channel_sim::{fiber_transmittance, ChannelScenario, SystemParams};
use crate::countermeasure::{MonitorConfig, SampleGrid, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::physics::PulseSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Distance,
    Gamma,
    VA,
    EpsTot,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Distance => "distance",
            SweepAxis::Gamma => "gamma",
            SweepAxis::VA => "v_a",
            SweepAxis::EpsTot => "eps_tot",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "distance" | "distance_km" => Ok(SweepAxis::Distance),
            "gamma" => Ok(SweepAxis::Gamma),
            "v_a" | "va" => Ok(SweepAxis::VA),
            "eps_tot" | "eps" => Ok(SweepAxis::EpsTot),
            other => Err(Error::Config(format!("axis: unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Exact channel moments with analytic finite-size offsets.
    Asymptotic,
    /// Sampled data through the estimation pipeline.
    MonteCarlo,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Asymptotic => "asymptotic-moments",
            Mode::MonteCarlo => "monte-carlo",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "asymptotic" | "asymptotic-moments" => Ok(Mode::Asymptotic),
            "monte-carlo" | "montecarlo" | "mc" => Ok(Mode::MonteCarlo),
            other => Err(Error::Config(format!("mode: unknown mode {other:?}"))),
        }
    }
}

/// Named figure recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    /// Biased excess noise versus overlap for several true noise levels.
    Fig5,
    /// Key rate versus distance, ε = 0.04 / 0.03 / 0.02.
    Fig6a,
    Fig6b,
    Fig6c,
    /// Key rate versus modulation variance at 7 km.
    Fig7,
    /// Overestimate at γ = 0.9 for two noise levels.
    Fig11,
    /// Overestimate for several overlaps at ε = 0.04.
    Fig12,
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fig5" => Ok(Recipe::Fig5),
            "fig6a" | "fig6" => Ok(Recipe::Fig6a),
            "fig6b" => Ok(Recipe::Fig6b),
            "fig6c" => Ok(Recipe::Fig6c),
            "fig7" => Ok(Recipe::Fig7),
            "fig11" => Ok(Recipe::Fig11),
            "fig12" => Ok(Recipe::Fig12),
            other => Err(Error::Config(format!("recipe: unknown recipe {other:?}"))),
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Recipe::Fig5 => "fig5",
            Recipe::Fig6a => "fig6a",
            Recipe::Fig6b => "fig6b",
            Recipe::Fig6c => "fig6c",
            Recipe::Fig7 => "fig7",
            Recipe::Fig11 => "fig11",
            Recipe::Fig12 => "fig12",
        };
        f.write_str(s)
    }
}

/// Channel defaults shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDefaults {
    pub distance_km: f64,
    pub alpha_db_per_km: f64,
    pub eps_tot: f64,
    pub pir_weight: f64,
    pub tau_s: f64,
    pub tau_lo: f64,
}

impl Default for ChannelDefaults {
    fn default() -> Self {
        Self { distance_km: 7.0, alpha_db_per_km: 0.2, eps_tot: 0.04, pir_weight: 0.0, tau_s: 1.0, tau_lo: 1.0 }
    }
}

impl ChannelDefaults {
    pub fn scenario(&self) -> Result<ChannelScenario> {
        ChannelScenario::fiber(self.distance_km, self.alpha_db_per_km, self.eps_tot)?
            .with_pir_weight(self.pir_weight)?
            .with_pulses(PulseSpec::new(self.tau_s, self.tau_lo)?)
    }

    pub fn transmittance(&self) -> f64 {
        fiber_transmittance(self.distance_km, self.alpha_db_per_km)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub recipe: Option<Recipe>,
    pub sweep_axis: SweepAxis,
    pub grid: Vec<f64>,
    /// Overlaps overlaid on each grid point (ignored on the gamma axis).
    pub gamma_list: Vec<f64>,
    /// True excess-noise levels overlaid on each grid point (ignored on the
    /// eps_tot axis).
    pub eps_list: Vec<f64>,
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub mc_samples: usize,
    pub output_path: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            recipe: None,
            sweep_axis: SweepAxis::Distance,
            grid: linear_grid(0.0, 60.0, 1.0).expect("static grid"),
            gamma_list: vec![1.0, 0.99, 0.97, 0.95],
            eps_list: vec![0.04],
            mode: Mode::Asymptotic,
            seeds: vec![1],
            mc_samples: 1_000_000,
            output_path: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("grid: must not be empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid: must be strictly increasing".into()));
        }
        if self.sweep_axis != SweepAxis::Gamma {
            if self.gamma_list.is_empty() {
                return Err(Error::Config("gammas: must not be empty".into()));
            }
            if let Some(g) = self.gamma_list.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
                return Err(Error::Config(format!("gammas: overlap {g} outside (0, 1]")));
            }
        }
        if self.sweep_axis != SweepAxis::EpsTot && self.eps_list.is_empty() {
            return Err(Error::Config("eps_list: must not be empty".into()));
        }
        if self.mode == Mode::MonteCarlo {
            if self.seeds.is_empty() {
                return Err(Error::Config("seeds: monte-carlo mode needs at least one seed".into()));
            }
            if self.mc_samples < 2 {
                return Err(Error::Config("mc_samples: need at least 2 samples".into()));
            }
        }
        Ok(())
    }

    /// Preset grid, overlays and axis for a figure recipe.
    pub fn from_recipe(recipe: Recipe) -> Self {
        let base = SweepConfig { recipe: Some(recipe), ..SweepConfig::default() };
        let distance = linear_grid(0.0, 60.0, 1.0).expect("static grid");
        match recipe {
            Recipe::Fig5 => SweepConfig {
                sweep_axis: SweepAxis::Gamma,
                grid: linear_grid(0.8, 1.0, 0.005).expect("static grid"),
                eps_list: vec![0.02, 0.03, 0.04],
                gamma_list: vec![1.0],
                ..base
            },
            Recipe::Fig6a | Recipe::Fig6b | Recipe::Fig6c => SweepConfig {
                sweep_axis: SweepAxis::Distance,
                grid: distance,
                eps_list: vec![match recipe {
                    Recipe::Fig6a => 0.04,
                    Recipe::Fig6b => 0.03,
                    _ => 0.02,
                }],
                gamma_list: vec![1.0, 0.99, 0.97, 0.95],
                ..base
            },
            Recipe::Fig7 => SweepConfig {
                sweep_axis: SweepAxis::VA,
                grid: linear_grid(1.0, 100.0, 1.0).expect("static grid"),
                eps_list: vec![0.04],
                gamma_list: vec![1.0, 0.99, 0.97, 0.95],
                ..base
            },
            Recipe::Fig11 => SweepConfig {
                sweep_axis: SweepAxis::Distance,
                grid: distance,
                eps_list: vec![0.02, 0.04],
                gamma_list: vec![1.0, 0.9],
                ..base
            },
            Recipe::Fig12 => SweepConfig {
                sweep_axis: SweepAxis::Distance,
                grid: distance,
                eps_list: vec![0.04],
                gamma_list: vec![1.0, 0.95, 0.9, 0.85, 0.8],
                ..base
            },
        }
    }
}

/// Settings for the monitoring demo.
#[derive(Debug, Clone, PartialEq)]
pub struct CountermeasureConfig {
    pub samples: usize,
    pub span: f64,
    pub noise_sigma: f64,
    pub peak: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for CountermeasureConfig {
    fn default() -> Self {
        Self { samples: 512, span: 12.0, noise_sigma: 0.0, peak: 1.0, tolerance: DEFAULT_TOLERANCE, seed: 1 }
    }
}

impl CountermeasureConfig {
    pub fn monitor(&self) -> MonitorConfig {
        MonitorConfig {
            grid: SampleGrid { span: self.span, count: self.samples },
            noise_sigma: self.noise_sigma,
            peak: self.peak,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub system: SystemParams,
    pub channel: ChannelDefaults,
    pub sweep: SweepConfig,
    pub countermeasure: CountermeasureConfig,
}

fn parse_value<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| Error::Config(format!("{section}.{key}: cannot parse {value:?}: {e}")))
}

/// Scientific notation such as `1e9` is accepted for counts.
fn parse_count(section: &str, key: &str, value: &str) -> Result<u64> {
    if let Ok(n) = value.trim().parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = parse_value(section, key, value)?;
    if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(Error::Config(format!("{section}.{key}: {value:?} is not a non-negative integer")))
    }
}

fn parse_list<T: FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_value(section, key, s)).collect()
}

/// Evenly spaced values `start, start+step, …` not exceeding `stop`, rounded
/// to 12 decimals so that printed grids stay clean.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Config(format!("grid: invalid range {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 10_000_000 {
        return Err(Error::Config(format!("grid: {n} points is too many")));
    }
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
}

/// `start:stop:step` or a comma-separated list.
pub fn parse_grid(value: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() == 3 {
        let p = |s: &str| parse_value::<f64>("sweep", "grid", s);
        linear_grid(p(parts[0])?, p(parts[1])?, p(parts[2])?)
    } else if parts.len() == 1 {
        parse_list("sweep", "grid", value)
    } else {
        Err(Error::Config(format!("grid: expected start:stop:step or a list, got {value:?}")))
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str_contents(&text)
    }

    pub fn from_str_contents(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        let mut cfg = RunConfig::default();

        // A recipe resets the sweep block before the other sweep keys apply.
        if let Some(recipe) = ini.section(Some("sweep")).and_then(|s| s.get("recipe")) {
            cfg.sweep = SweepConfig::from_recipe(recipe.parse()?);
        }
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                cfg.set(section, key, value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `section.key = value` setting.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let s = section;
        match (section, key) {
            ("system", "v_a") => self.system.v_a = parse_value(s, key, value)?,
            ("system", "eta") => self.system.eta = parse_value(s, key, value)?,
            ("system", "v_el") => self.system.v_el = parse_value(s, key, value)?,
            ("system", "beta") => self.system.beta = parse_value(s, key, value)?,
            ("system", "n_total") => {
                let n = parse_count(s, key, value)?;
                let ratio = self.system.n_key as f64 / self.system.n_total as f64;
                self.system.n_total = n;
                self.system.n_key = (n as f64 * ratio).round() as u64;
                self.system.m_est = n.saturating_sub(self.system.n_key);
            }
            ("system", "n_key") => {
                self.system.n_key = parse_count(s, key, value)?;
                self.system.m_est = self.system.n_total.saturating_sub(self.system.n_key);
            }
            ("system", "eps_pe") => self.system.eps_pe = parse_value(s, key, value)?,
            ("system", "eps_bar") => self.system.eps_bar = parse_value(s, key, value)?,
            ("system", "eps_pa") => self.system.eps_pa = parse_value(s, key, value)?,
            ("system", "n0") => self.system.n0 = parse_value(s, key, value)?,
            ("channel", "distance_km") => self.channel.distance_km = parse_value(s, key, value)?,
            ("channel", "alpha_db_per_km") => self.channel.alpha_db_per_km = parse_value(s, key, value)?,
            ("channel", "eps_tot") => self.channel.eps_tot = parse_value(s, key, value)?,
            ("channel", "pir_weight") => self.channel.pir_weight = parse_value(s, key, value)?,
            ("channel", "tau_s") => self.channel.tau_s = parse_value(s, key, value)?,
            ("channel", "tau_lo") => self.channel.tau_lo = parse_value(s, key, value)?,
            ("sweep", "recipe") => self.sweep.recipe = Some(value.parse()?),
            ("sweep", "axis") => self.sweep.sweep_axis = value.parse()?,
            ("sweep", "grid") => self.sweep.grid = parse_grid(value)?,
            ("sweep", "gammas") => self.sweep.gamma_list = parse_list(s, key, value)?,
            ("sweep", "eps_list") => self.sweep.eps_list = parse_list(s, key, value)?,
            ("sweep", "mode") => self.sweep.mode = value.parse()?,
            ("sweep", "seeds") => self.sweep.seeds = parse_list(s, key, value)?,
            ("sweep", "mc_samples") => self.sweep.mc_samples = parse_count(s, key, value)? as usize,
            ("sweep", "output") => self.sweep.output_path = Some(PathBuf::from(value.trim())),
            ("countermeasure", "samples") => self.countermeasure.samples = parse_count(s, key, value)? as usize,
            ("countermeasure", "span") => self.countermeasure.span = parse_value(s, key, value)?,
            ("countermeasure", "noise_sigma") => self.countermeasure.noise_sigma = parse_value(s, key, value)?,
            ("countermeasure", "peak") => self.countermeasure.peak = parse_value(s, key, value)?,
            ("countermeasure", "tolerance") => self.countermeasure.tolerance = parse_value(s, key, value)?,
            ("countermeasure", "seed") => self.countermeasure.seed = parse_count(s, key, value)?,
            _ => {
                let name = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
                return Err(Error::Config(format!("{name}: unknown setting")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate().map_err(|e| Error::Config(format!("system: {e}")))?;
        self.channel.scenario().map_err(|e| Error::Config(format!("channel: {e}")))?;
        self.sweep.validate()?;
        if self.countermeasure.samples < crate::countermeasure::MIN_SAMPLES {
            return Err(Error::Config("countermeasure.samples: need at least 64".into()));
        }
        if !(self.countermeasure.tolerance > 0.0) {
            return Err(Error::Config("countermeasure.tolerance: must be positive".into()));
        }
        Ok(())
    }

    /// `key=value` lines echoing every parameter, for CSV headers.
    pub fn echo_lines(&self) -> Vec<String> {
        let s = &self.system;
        let c = &self.channel;
        vec![
            format!(
                "system v_a={} eta={} v_el={} beta={} n_total={} n_key={} m_est={} eps_pe={} eps_bar={} eps_pa={} n0={}",
                s.v_a, s.eta, s.v_el, s.beta, s.n_total, s.n_key, s.m_est, s.eps_pe, s.eps_bar, s.eps_pa, s.n0
            ),
            format!(
                "channel distance_km={} alpha_db_per_km={} eps_tot={} pir_weight={} tau_s={} tau_lo={}",
                c.distance_km, c.alpha_db_per_km, c.eps_tot, c.pir_weight, c.tau_s, c.tau_lo
            ),
        ]
    }
}
