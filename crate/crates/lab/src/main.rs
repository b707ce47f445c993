use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use curvmix::config::{Experiment, ExperimentConfig, ModelKind, Profile};
use curvmix::runs::{fit_table, run_experiment, WORKERS_ENV};
use curvmix::Table;

#[derive(Parser)]
#[command(name = "curvmix", version, about = "Seeded experiments on SOS and monotone-surface dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trajectories from the maximal state, sampled at ten checkpoints
    Simulate(RunArgs),
    /// Coalescence times of the grand coupling from the two extremes
    Coalesce(RunArgs),
    /// Perfect samples by coupling from the past
    Cftp(RunArgs),
    /// Spectral gaps of enumerated generators
    GapExact(RunArgs),
    /// Exact mixing times and the decay law of the worst-case distance
    TvExact(RunArgs),
    /// Cap schedules (u_n, R_n, t_n)
    Schedule(RunArgs),
    /// Domination of chains from the maximal state by the caps
    Monitor(RunArgs),
    /// Tail table of the equilibrium maximal deviation
    Fluctuations(RunArgs),
    /// Power-law fit of a CSV column against sizes
    Fit(FitArgs),
}

#[derive(Args)]
#[command(rename_all = "kebab-case")]
struct RunArgs {
    /// JSON config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long = "L")]
    l: Option<usize>,
    /// comma separated sizes for sweeps
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    h: Option<i64>,
    #[arg(long)]
    window: Option<i64>,
    #[arg(long)]
    walls: bool,
    #[arg(long, value_delimiter = ',', num_args = 3)]
    slope: Option<Vec<f64>>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV produced by another subcommand
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "L")]
    x: String,
    #[arg(long, default_value = "coalescence_time")]
    y: String,
    /// write the fit here as JSON as well as to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self, experiment: Experiment) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let mut c = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
                c.experiment = experiment;
                c
            }
            None => {
                let model = self.model.context("--model is required without --config")?;
                let l = self.l.context("--L is required without --config")?;
                let seed = self.seed.context("--seed is required without --config")?;
                ExperimentConfig::new(experiment, model, l, seed)
            }
        };
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if let Some(v) = self.l {
            cfg.l = v;
        }
        if let Some(v) = self.sizes {
            cfg.sizes = v;
        }
        if let Some(v) = self.h {
            cfg.h = v;
        }
        if self.window.is_some() {
            cfg.window = self.window;
        }
        cfg.walls |= self.walls;
        if let Some(v) = self.slope {
            cfg.slope = [v[0], v[1], v[2]];
        }
        if let Some(v) = self.c {
            cfg.c = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.replicas {
            cfg.replicas = v;
        }
        if self.horizon.is_some() {
            cfg.horizon = self.horizon;
        }
        if let Some(v) = self.profile {
            cfg.profile = v;
        }
        if let Some(v) = self.alpha1 {
            cfg.alpha1 = v;
        }
        if self.gamma.is_some() {
            cfg.gamma = self.gamma;
        }
        if let Some(v) = self.thresholds {
            cfg.thresholds = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_pool() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{WORKERS_ENV} must be a positive integer"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    init_pool()?;
    let (experiment, args) = match cli.command {
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::Coalesce(a) => (Experiment::Coalesce, a),
        Command::Cftp(a) => (Experiment::Cftp, a),
        Command::GapExact(a) => (Experiment::GapExact, a),
        Command::TvExact(a) => (Experiment::TvExact, a),
        Command::Schedule(a) => (Experiment::Schedule, a),
        Command::Monitor(a) => (Experiment::Monitor, a),
        Command::Fluctuations(a) => (Experiment::Fluctuations, a),
        Command::Fit(f) => {
            let text = std::fs::read_to_string(&f.input).with_context(|| format!("reading {}", f.input.display()))?;
            let fit = fit_table(&Table::from_csv(&text)?, &f.x, &f.y)?;
            let json = serde_json::to_string_pretty(&fit)?;
            println!("{json}");
            if let Some(out) = f.out {
                std::fs::write(out, json + "\n")?;
            }
            return Ok(());
        }
    };
    let cfg = args.into_config(experiment)?;
    let report = run_experiment(&cfg)?;
    let (csv, json) = report.write(&cfg.out)?;
    eprintln!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}
