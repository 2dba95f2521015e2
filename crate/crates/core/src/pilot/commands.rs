//! Pipelines behind the command-line subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};

use crate::error::{Error, Result};
use crate::gateworld::{EnvConfig, EpisodeOutcome, GateEnv};
use crate::lagsim::{AxisLag, DEFAULT_TS};
use crate::pilot::baseline::{PdController, PdGains};
use crate::pilot::checkpoint::{Checkpoint, Role};
use crate::pilot::config::RunConfig;
use crate::pilot::eval::{evaluate, run_episode, ActorPolicy, EpisodeResult, EvalSummary};
use crate::pilot::metrics::{write_summary, write_trajectory, MetricsWriter};
use crate::td3core::Trainer;

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

pub fn checkpoint_name(env_steps: u64) -> String {
    format!("step_{env_steps:09}.ckpt")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub run_dir: PathBuf,
    pub env_steps: u64,
    pub episodes: u64,
    pub checkpoints: Vec<PathBuf>,
    pub final_checkpoint: PathBuf,
}

/// Train with `cfg`, writing the resolved config, metrics, periodic
/// checkpoints and a final checkpoint into `out_dir`.
///
/// If training diverges the error is returned and every checkpoint written so
/// far is left in place.
pub fn train(cfg: &RunConfig, out_dir: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let config_path = out_dir.join(CONFIG_FILE);
    fs::write(&config_path, cfg.render()).map_err(|e| Error::io(&config_path, e))?;
    let hash = cfg.hash();

    let mut env = GateEnv::new(cfg.env, crate::derive_seed(cfg.seed, 2))?;
    let mut trainer = Trainer::new(cfg.td3, cfg.seed)?;
    let mut metrics = MetricsWriter::create(&out_dir.join(METRICS_FILE))?;
    let mut checkpoints = Vec::new();
    let started = Instant::now();

    while trainer.env_steps() < cfg.total_steps {
        let chunk = cfg.checkpoint_every.min(cfg.total_steps - trainer.env_steps());
        let run = trainer.run(&mut env, chunk, &mut metrics);
        metrics.flush()?;
        if let Err(e) = run {
            warn!(
                "training aborted at env step {}: {e}; last good checkpoint: {:?}",
                trainer.env_steps(),
                checkpoints.last()
            );
            return Err(e);
        }
        if trainer.env_steps() < cfg.total_steps {
            let path = out_dir.join(checkpoint_name(trainer.env_steps()));
            Checkpoint::from_trainer(&trainer, hash).save(&path)?;
            checkpoints.push(path);
        }
        info!(
            "env step {}/{} episodes {} updates {} elapsed {:.1}s",
            trainer.env_steps(),
            cfg.total_steps,
            trainer.episodes(),
            trainer.updates(),
            started.elapsed().as_secs_f64()
        );
    }

    let final_checkpoint = out_dir.join(FINAL_CHECKPOINT);
    Checkpoint::from_trainer(&trainer, hash).save(&final_checkpoint)?;
    Ok(TrainReport {
        run_dir: out_dir.to_path_buf(),
        env_steps: trainer.env_steps(),
        episodes: trainer.episodes(),
        checkpoints,
        final_checkpoint,
    })
}

pub fn load_actor(path: &Path) -> Result<ActorPolicy> {
    let ck = Checkpoint::load(path)?;
    Ok(ActorPolicy::new(ck.network(Role::Actor)?.clone()))
}

/// Noise-free evaluation of a checkpointed actor. Writes a summary CSV when
/// `out` is given.
pub fn eval(checkpoint: &Path, env: &EnvConfig, episodes: usize, seed: u64, out: Option<&Path>) -> Result<EvalSummary> {
    let mut policy = load_actor(checkpoint)?;
    let summary = evaluate(env, &mut policy, episodes, seed)?;
    if let Some(path) = out {
        write_summary(path, &summary)?;
    }
    Ok(summary)
}

/// First evaluation episode for `seed`, written as a trajectory CSV.
pub fn rollout(checkpoint: &Path, env: &EnvConfig, seed: u64, out: &Path) -> Result<EpisodeResult> {
    let mut policy = load_actor(checkpoint)?;
    let mut env = GateEnv::new(*env, seed)?;
    let result = run_episode(&mut env, &mut policy, true)?;
    write_trajectory(out, &result.trajectory)?;
    Ok(result)
}

pub fn baseline(
    gains: PdGains,
    env: &EnvConfig,
    episodes: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<EvalSummary> {
    let mut pd = PdController::new(gains, env.world)?;
    let summary = evaluate(env, &mut pd, episodes, seed)?;
    if let Some(path) = out {
        write_summary(path, &summary)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Unit step applied at t = 0 to a lag at rest; element `k` is the velocity
/// at `t = k * ts`. The command is 1 at both ends of every interval.
fn step_response(lag: &AxisLag, steps: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    for _ in 0..steps {
        v.push(lag.step(*v.last().unwrap(), 1.0, 1.0));
    }
    v
}

/// Velocity lag checks run by the `physics-check` subcommand.
pub fn physics_check() -> Result<Vec<Check>> {
    let tau = 0.4;
    let ts = DEFAULT_TS;
    let lag = AxisLag::new(tau, ts)?;
    let resp = step_response(&lag, 2000);
    let mut checks = Vec::new();

    let v20 = resp[20];
    checks.push(check(
        "step response at t = tau",
        (v20 - 0.632).abs() <= 0.01,
        format!("v[20] = {v20:.6}, expected 0.632 +/- 0.01"),
    ));

    let vf = *resp.last().unwrap();
    checks.push(check(
        "final value",
        (vf - 1.0).abs() <= 1e-6,
        format!("v[2000] = {vf:.12}, expected 1 +/- 1e-6"),
    ));

    let horizon = (5.0 * tau / ts).round() as usize;
    let max_dev = (0..=horizon)
        .map(|k| (resp[k] - (1.0 - (-(k as f64) * ts / tau).exp())).abs())
        .fold(0.0, f64::max);
    checks.push(check(
        "deviation from continuous response over 5 tau",
        max_dev < 1e-3,
        format!("max |v - (1 - exp(-t/tau))| = {max_dev:.3e}, limit 1e-3"),
    ));

    let mut worst_gain = 0.0f64;
    let mut stable = true;
    for &t in &[0.05, 0.08, 0.1, 0.13, 0.35, 0.4, 0.45, 1.0] {
        let l = AxisLag::new(t, ts)?;
        worst_gain = worst_gain.max((l.dc_gain() - 1.0).abs());
        stable &= l.b().abs() < 1.0;
    }
    checks.push(check(
        "unity DC gain",
        worst_gain < 1e-12,
        format!("max |gain - 1| = {worst_gain:.3e}"),
    ));
    checks.push(check(
        "pole inside unit circle",
        stable,
        "|b| < 1 for all tested taus".into(),
    ));

    Ok(checks)
}

/// One scripted full-throttle pass from the canonical spawn, as a sanity
/// check on the environment geometry.
pub fn scripted_pass(env: &EnvConfig) -> Result<EpisodeResult> {
    let mut cfg = *env;
    cfg.stochastic = false;
    cfg.spawn = crate::gateworld::SpawnConfig::fixed([-4.0, 0.0, 0.0], 0.0);
    let mut env = GateEnv::new(cfg, 0)?;
    let mut forward = |_: &crate::gateworld::Observation| [1.0, 0.0, 0.0, 0.0];
    run_episode(&mut env, &mut forward, false)
}

pub fn format_summary(s: &EvalSummary) -> String {
    let counts: Vec<String> = EpisodeOutcome::ALL
        .iter()
        .filter(|o| s.count(**o) > 0)
        .map(|o| format!("{o}={}", s.count(*o)))
        .collect();
    format!(
        "episodes {} success_rate {:.3} mean_return {:.3} std_return {:.3} mean_steps {:.1} [{}]",
        s.episodes,
        s.success_rate,
        s.mean_return,
        s.std_return,
        s.mean_steps,
        counts.join(" ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn physics_checks_pass() {
        for c in physics_check().unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn scripted_pass_succeeds() {
        let r = scripted_pass(&EnvConfig::default()).unwrap();
        assert_eq!(r.outcome, EpisodeOutcome::Success);
    }
}
