use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cvqkd_mismatch::channel_sim::Quadrature;
use cvqkd_mismatch::cli::{self, config::parse_grid, AttackArgs, PirModel, RunConfig, SimulateArgs};
use cvqkd_mismatch::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "cvqkd-mismatch", version, about = "Pulse-width mismatch analysis for LLO CV-QKD")]
struct Cli {
    /// Configuration file with [system], [channel], [sweep], [countermeasure] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override for simulation, Monte Carlo sweeps and tap noise.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Per-parameter overrides applied after the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    v_a: Option<f64>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    v_el: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    distance_km: Option<f64>,
    #[arg(long, global = true)]
    alpha_db_per_km: Option<f64>,
    #[arg(long, global = true)]
    eps_tot: Option<f64>,
    #[arg(long, global = true)]
    pir_weight: Option<f64>,
    /// Signal pulse width (ns).
    #[arg(long, global = true)]
    tau_s: Option<f64>,
    /// LO pulse width (ns).
    #[arg(long, global = true)]
    tau_lo: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Key rate at a single operating point, true and mismatch-biased.
    Keyrate {
        /// Overlap to use instead of the one implied by the pulse widths.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Parameter sweep written as CSV.
    Sweep(SweepArgs),
    /// Generate a quadrature dataset.
    Simulate {
        #[arg(long, default_value_t = 1_000_000)]
        count: usize,
        #[arg(long, value_enum, default_value_t = QuadArg::X)]
        quadrature: QuadArg,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_enum, default_value_t = PirArg::Effective)]
        pir_model: PirArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the estimation pipeline on a dataset file.
    Estimate { input: PathBuf },
    /// Excess noise seen under an intercept-resend attack, per overlap.
    Attack {
        /// Overlaps as start:stop:step or a comma-separated list.
        #[arg(long)]
        gammas: Option<String>,
        /// Attack weights, comma-separated.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monitor and correct the pulse widths, then compare key rates.
    Countermeasure {
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// fig5, fig6a, fig6b, fig6c, fig7, fig11 or fig12.
    #[arg(long)]
    recipe: Option<String>,
    /// distance, gamma, v_a or eps_tot.
    #[arg(long)]
    axis: Option<String>,
    /// start:stop:step or a comma-separated list.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    gammas: Option<String>,
    #[arg(long)]
    eps_list: Option<String>,
    /// asymptotic or monte-carlo.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum QuadArg {
    X,
    P,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PirArg {
    Effective,
    Mixture,
}

fn set(cfg: &mut RunConfig, section: &str, key: &str, value: Option<impl ToString>) -> Result<()> {
    match value {
        Some(v) => cfg.set(section, key, &v.to_string()),
        None => Ok(()),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    set(&mut cfg, "system", "v_a", o.v_a)?;
    set(&mut cfg, "system", "eta", o.eta)?;
    set(&mut cfg, "system", "v_el", o.v_el)?;
    set(&mut cfg, "system", "beta", o.beta)?;
    set(&mut cfg, "channel", "distance_km", o.distance_km)?;
    set(&mut cfg, "channel", "alpha_db_per_km", o.alpha_db_per_km)?;
    set(&mut cfg, "channel", "eps_tot", o.eps_tot)?;
    set(&mut cfg, "channel", "pir_weight", o.pir_weight)?;
    set(&mut cfg, "channel", "tau_s", o.tau_s)?;
    set(&mut cfg, "channel", "tau_lo", o.tau_lo)?;
    if let Some(seed) = cli.seed {
        cfg.sweep.seeds = vec![seed];
        cfg.countermeasure.seed = seed;
    }
    Ok(cfg)
}

fn apply_sweep_args(cfg: &mut RunConfig, a: &SweepArgs) -> Result<()> {
    if let Some(r) = &a.recipe {
        let keep_seeds = cfg.sweep.seeds.clone();
        cfg.sweep = cli::SweepConfig::from_recipe(r.parse()?);
        cfg.sweep.seeds = keep_seeds;
    }
    set(cfg, "sweep", "axis", a.axis.as_ref())?;
    set(cfg, "sweep", "grid", a.grid.as_ref())?;
    set(cfg, "sweep", "gammas", a.gammas.as_ref())?;
    set(cfg, "sweep", "eps_list", a.eps_list.as_ref())?;
    set(cfg, "sweep", "mode", a.mode.as_ref())?;
    set(cfg, "sweep", "seeds", a.seeds.as_ref())?;
    set(cfg, "sweep", "mc_samples", a.mc_samples)?;
    if let Some(p) = &a.output {
        cfg.sweep.output_path = Some(p.clone());
    }
    Ok(())
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Keyrate { gamma } => cli::run_keyrate(&cfg, *gamma, sink(None)?),
        Command::Sweep(args) => {
            apply_sweep_args(&mut cfg, args)?;
            cfg.validate()?;
            let out = sink(cfg.sweep.output_path.as_ref())?;
            cli::run_figure_sweep(&cfg, out)
        }
        Command::Simulate { count, quadrature, gamma, pir_model, output } => {
            let args = SimulateArgs {
                count: *count,
                seed: cli.seed.unwrap_or(1),
                quadrature: match quadrature {
                    QuadArg::X => Quadrature::X,
                    QuadArg::P => Quadrature::P,
                },
                gamma: *gamma,
                pir_model: match pir_model {
                    PirArg::Effective => PirModel::Effective,
                    PirArg::Mixture => PirModel::Mixture,
                },
            };
            cli::run_simulate(&cfg, &args, sink(output.as_ref())?)
        }
        Command::Estimate { input } => {
            let file = File::open(input)
                .map_err(|e| Error::Config(format!("cannot open dataset {}: {e}", input.display())))?;
            cli::run_estimate(&cfg, BufReader::new(file), sink(None)?)
        }
        Command::Attack { gammas, weights, threshold, output } => {
            let mut args = AttackArgs::default();
            if let Some(g) = gammas {
                args.gammas = parse_grid(g)?;
            }
            if let Some(w) = weights {
                args.weights = parse_grid(w)?;
            }
            if let Some(t) = threshold {
                args.threshold = *t;
            }
            cli::run_attack(&cfg, &args, sink(output.as_ref())?)
        }
        Command::Countermeasure { noise_sigma, samples, tolerance, output } => {
            set(&mut cfg, "countermeasure", "noise_sigma", *noise_sigma)?;
            set(&mut cfg, "countermeasure", "samples", *samples)?;
            set(&mut cfg, "countermeasure", "tolerance", *tolerance)?;
            cli::run_countermeasure_demo(&cfg, sink(output.as_ref())?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
