//! Noise-free policy rollouts and their summaries.

use crate::error::Result;
use crate::gateworld::{EnvConfig, EpisodeOutcome, GateEnv, Observation, ACTION_DIM};
use crate::lagsim::VehicleState;
use crate::netcore::Mlp;
use crate::td3core::greedy_action;

/// Anything that maps an observation to a normalized action.
pub trait Policy {
    fn act(&mut self, obs: &Observation) -> Result<[f64; ACTION_DIM]>;
}

impl<F> Policy for F
where
    F: FnMut(&Observation) -> [f64; ACTION_DIM],
{
    fn act(&mut self, obs: &Observation) -> Result<[f64; ACTION_DIM]> {
        Ok(self(obs))
    }
}

/// Deterministic actor network.
#[derive(Debug, Clone)]
pub struct ActorPolicy {
    actor: Mlp,
}

impl ActorPolicy {
    pub fn new(actor: Mlp) -> Self {
        Self { actor }
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }
}

impl Policy for ActorPolicy {
    fn act(&mut self, obs: &Observation) -> Result<[f64; ACTION_DIM]> {
        greedy_action(&self.actor, obs)
    }
}

/// One simulated step as written to a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub step: u64,
    pub t: f64,
    pub state: VehicleState,
    /// Physical command applied during this step.
    pub cmd: [f64; ACTION_DIM],
    pub reward: f64,
    pub outcome: EpisodeOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub ret: f64,
    pub steps: u64,
    pub outcome: EpisodeOutcome,
    /// Filled only when the trajectory was requested.
    pub trajectory: Vec<TrajectoryRow>,
}

/// Reset `env` and run `policy` until the episode ends.
pub fn run_episode(env: &mut GateEnv, policy: &mut dyn Policy, record: bool) -> Result<EpisodeResult> {
    let obs = env.reset();
    finish_episode(env, policy, obs, record)
}

/// Continue an episode that was already reset (e.g. with [`GateEnv::reset_to`]).
pub fn finish_episode(
    env: &mut GateEnv,
    policy: &mut dyn Policy,
    mut obs: Observation,
    record: bool,
) -> Result<EpisodeResult> {
    let mut ret = 0.0;
    let mut trajectory = Vec::new();
    loop {
        let action = policy.act(&obs)?;
        let res = env.step(action)?;
        ret += res.reward;
        if record {
            let state = *env.state();
            trajectory.push(TrajectoryRow {
                step: env.steps(),
                t: env.steps() as f64 * env.config().ts,
                state,
                cmd: state.prev_cmd,
                reward: res.reward,
                outcome: res.outcome,
            });
        }
        obs = res.obs;
        if res.outcome.is_done() {
            return Ok(EpisodeResult {
                ret,
                steps: env.steps(),
                outcome: res.outcome,
                trajectory,
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_steps: f64,
    pub returns: Vec<f64>,
    pub outcomes: Vec<EpisodeOutcome>,
}

impl EvalSummary {
    pub fn from_results(results: &[EpisodeResult]) -> Self {
        let n = results.len().max(1) as f64;
        let returns: Vec<f64> = results.iter().map(|r| r.ret).collect();
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        Self {
            episodes: results.len(),
            success_rate: results.iter().filter(|r| r.outcome == EpisodeOutcome::Success).count() as f64 / n,
            mean_return: mean,
            std_return: var.sqrt(),
            mean_steps: results.iter().map(|r| r.steps as f64).sum::<f64>() / n,
            outcomes: results.iter().map(|r| r.outcome).collect(),
            returns,
        }
    }

    pub fn count(&self, outcome: EpisodeOutcome) -> usize {
        self.outcomes.iter().filter(|o| **o == outcome).count()
    }

    /// Most frequent outcome (ties resolved in [`EpisodeOutcome::ALL`] order).
    pub fn dominant_outcome(&self) -> Option<EpisodeOutcome> {
        EpisodeOutcome::ALL
            .into_iter()
            .filter(|o| self.count(*o) > 0)
            .max_by_key(|o| (self.count(*o), std::cmp::Reverse(*o as u8)))
    }
}

/// `episodes` consecutive noise-free episodes on one environment seeded with
/// `seed`. Episode `k` always sees the same spawn for a given seed.
pub fn evaluate(cfg: &EnvConfig, policy: &mut dyn Policy, episodes: usize, seed: u64) -> Result<EvalSummary> {
    let mut env = GateEnv::new(*cfg, seed)?;
    let results = (0..episodes)
        .map(|_| run_episode(&mut env, policy, false))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalSummary::from_results(&results))
}
