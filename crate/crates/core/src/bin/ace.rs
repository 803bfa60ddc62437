//! Batch CLI for the ACE Boussinesq solver: cavity benchmark, ACE-vs-BDF1
//! timing, manufactured-solution convergence, and predictability experiments.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ace_core::driver::{cavity, convergence, predictability, timing, RawConfig, Scale};

#[derive(Parser)]
#[command(name = "ace", version, about = "Boussinesq cavity solver with artificial-compressibility ensemble timestepping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key=value config file with [cavity]/[timing]/[convergence]/[predictability]/[solver] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV and VTK files.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the RNG seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Problem scale: `full` runs the paper settings, `desk` caps mesh sizes
    /// and Rayleigh numbers for CI-sized runs.
    #[arg(long, default_value = "full")]
    scale: String,
    /// Worker threads (0 = automatic).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Differentially heated cavity benchmark (Ra continuation, J=2).
    Cavity(Common),
    /// ACE vs coupled linearly implicit BDF1 wall-time comparison (J=1).
    Timing(Common),
    /// Manufactured-solution convergence study (J=2, dt = 1/(10 m)).
    Convergence(Common),
    /// Bred-vector predictability experiment on the manufactured solution.
    Predictability(Common),
}

fn scale_of(c: &Common) -> Result<Scale> {
    match c.scale.as_str() {
        "full" => Ok(Scale::Full),
        "desk" => Ok(Scale::Desk),
        other => bail!("unknown --scale {other:?}; expected full or desk"),
    }
}

fn load_config(c: &Common) -> Result<RawConfig> {
    Ok(match &c.config {
        Some(path) => RawConfig::load(path).with_context(|| format!("reading {path:?}"))?,
        None => RawConfig::default(),
    })
}

fn init_threads(jobs: usize) {
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Cavity(c) => {
            init_threads(c.jobs);
            let raw = load_config(&c)?;
            raw.known_sections(&["cavity", "solver"])?;
            let cfg = cavity::CavityConfig::from_config(&raw, scale_of(&c)?, c.seed)?;
            let results = cavity::run(&cfg, &c.out_dir)?;
            println!("ra,max_u1,max_u2,nu_avg_hot,steps,steady");
            for r in &results {
                println!(
                    "{:.0e},{:.4},{:.4},{:.4},{},{}",
                    r.ra, r.max_u1_mid, r.max_u2_mid, r.nu_avg_hot, r.steps, r.steady
                );
            }
        }
        Command::Timing(c) => {
            init_threads(c.jobs);
            let raw = load_config(&c)?;
            raw.known_sections(&["timing", "solver"])?;
            let cfg = timing::TimingConfig::from_config(&raw, scale_of(&c)?, c.seed)?;
            let results = timing::run(&cfg, &c.out_dir)?;
            println!("ra,ace_total_s,bdf1_total_s,speedup");
            for r in &results {
                println!(
                    "{:.0e},{:.3},{:.3},{:.2}",
                    r.ra, r.ace_total, r.bdf1_total, r.speedup
                );
            }
        }
        Command::Convergence(c) => {
            init_threads(c.jobs);
            let raw = load_config(&c)?;
            raw.known_sections(&["convergence", "solver"])?;
            let cfg = convergence::ConvergenceConfig::from_config(&raw, scale_of(&c)?, c.seed)?;
            let rows = convergence::run(&cfg, &c.out_dir)?;
            println!("m,err_u,rate_u,err_t,rate_t,err_p,rate_p");
            for r in &rows {
                let fr = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
                println!(
                    "{},{:.7},{},{:.3e},{},{:.6},{}",
                    r.m,
                    r.err_u,
                    fr(r.rate_u),
                    r.err_t,
                    fr(r.rate_t),
                    r.err_p,
                    fr(r.rate_p)
                );
            }
        }
        Command::Predictability(c) => {
            init_threads(c.jobs);
            let raw = load_config(&c)?;
            raw.known_sections(&["predictability", "solver"])?;
            let cfg =
                predictability::PredictabilityConfig::from_config(&raw, scale_of(&c)?, c.seed)?;
            let rows = predictability::run(&cfg, &c.out_dir)?;
            println!("ra,gamma0_u,gamma0_T,gamma0_p,tp_u,tp_T,tp_p");
            for r in &rows {
                let ft = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{:.0e},{:.2},{:.2},{:.2},{},{},{}",
                    r.ra,
                    r.gamma0[0],
                    r.gamma0[1],
                    r.gamma0[2],
                    ft(r.t_p[0]),
                    ft(r.t_p[1]),
                    ft(r.t_p[2])
                );
            }
        }
    }
    Ok(())
}
