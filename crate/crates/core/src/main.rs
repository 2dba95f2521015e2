use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gatepilot::pilot::commands;
use gatepilot::pilot::RunConfig;

#[derive(Parser)]
#[command(name = "gatepilot", version, about = "Train and evaluate TD3 gate-passing policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write a run directory.
    Train(Common),
    /// Evaluate a checkpoint over several episodes.
    Eval(Common),
    /// Record one episode of a checkpoint as a trajectory CSV.
    Rollout(Common),
    /// Evaluate the PD reference controller.
    Baseline(Common),
    /// Run the velocity lag checks.
    PhysicsCheck,
}

#[derive(Args)]
struct Common {
    /// key = value run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total training environment steps.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Use the randomized environment.
    #[arg(long)]
    stochastic: bool,
    /// Output directory (train) or file (eval, rollout, baseline).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> gatepilot::error::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(steps) = self.steps {
            cfg.total_steps = steps;
        }
        if let Some(n) = self.episodes {
            cfg.eval_episodes = n;
        }
        if self.stochastic {
            cfg.env.stochastic = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn checkpoint(&self) -> Result<&PathBuf, String> {
        self.checkpoint
            .as_ref()
            .ok_or_else(|| "--checkpoint is required".to_string())
    }
}

fn run(cli: Cli) -> Result<(), String> {
    let err = |e: gatepilot::error::Error| e.to_string();
    match cli.command {
        Command::Train(c) => {
            let cfg = c.resolve().map_err(err)?;
            let out = c
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("runs/seed_{}", cfg.seed)));
            let report = commands::train(&cfg, &out).map_err(err)?;
            println!(
                "trained {} steps over {} episodes; final checkpoint {}",
                report.env_steps,
                report.episodes,
                report.final_checkpoint.display()
            );
        }
        Command::Eval(c) => {
            let cfg = c.resolve().map_err(err)?;
            let s = commands::eval(c.checkpoint()?, &cfg.env, cfg.eval_episodes, cfg.seed, c.out.as_deref())
                .map_err(err)?;
            println!("{}", commands::format_summary(&s));
        }
        Command::Rollout(c) => {
            let cfg = c.resolve().map_err(err)?;
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("trajectory.csv"));
            let r = commands::rollout(c.checkpoint()?, &cfg.env, cfg.seed, &out).map_err(err)?;
            println!(
                "{} after {} steps, return {:.3}; wrote {}",
                r.outcome,
                r.steps,
                r.ret,
                out.display()
            );
        }
        Command::Baseline(c) => {
            let cfg = c.resolve().map_err(err)?;
            let s = commands::baseline(cfg.pd, &cfg.env, cfg.eval_episodes, cfg.seed, c.out.as_deref()).map_err(err)?;
            println!("{}", commands::format_summary(&s));
        }
        Command::PhysicsCheck => {
            let checks = commands::physics_check().map_err(err)?;
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if !ok {
                return Err("physics check failed".into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GATEPILOT_LOG", "info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
