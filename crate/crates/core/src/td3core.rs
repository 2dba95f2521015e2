//! Twin Delayed DDPG.
//!
//! Per environment step the trainer acts with Ornstein-Uhlenbeck exploration,
//! stores the transition and, once the buffer holds `learning_starts`
//! transitions, runs one update:
//!
//! 1. sample a batch and smooth the target policy with clipped Gaussian noise,
//! 2. regress both critics onto `r + gamma (1 - d) min(Q1', Q2')`,
//! 3. every `policy_delay`-th update, ascend `Q1(s, mu(s))` with the actor and
//!    move all three target networks by Polyak averaging.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::gateworld::{EpisodeOutcome, GateEnv, Observation, ACTION_DIM, OBS_DIM};
use crate::netcore::{self, AdamState, Gradients, Mlp, OptimizerKind};
use crate::{derive_seed, seeded_rng, Rng};

const SA_DIM: usize = OBS_DIM + ACTION_DIM;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: [f64; OBS_DIM],
    /// Normalized action, componentwise in [-1, 1].
    pub a: [f64; ACTION_DIM],
    pub r: f64,
    pub s_next: [f64; OBS_DIM],
    /// True terminal (success or crash); timeouts store `false`.
    pub done: bool,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("replay capacity must be > 0".into()));
        }
        Ok(Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn store(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Transitions in storage order (not insertion order once wrapped).
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.storage.get(index)
    }

    /// `n` uniform draws with replacement, as storage indices.
    pub fn sample_indices(&self, n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        if n == 0 || self.len() < n {
            return Err(Error::InsufficientData {
                have: self.len(),
                need: n.max(1),
            });
        }
        Ok((0..n).map(|_| rng.gen_range(0..self.len())).collect())
    }

    pub fn sample_batch(&self, n: usize, rng: &mut Rng) -> Result<Batch> {
        let idx = self.sample_indices(n, rng)?;
        Ok(Batch::from_transitions(idx.iter().map(|&i| &self.storage[i])))
    }
}

/// Column-stacked batch of transitions, row-major per field.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    /// 1.0 for terminal transitions, else 0.0.
    pub dones: Vec<f64>,
}

impl Batch {
    pub fn from_transitions<'a>(ts: impl IntoIterator<Item = &'a Transition>) -> Self {
        let mut b = Batch {
            len: 0,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
        };
        for t in ts {
            b.len += 1;
            b.states.extend_from_slice(&t.s);
            b.actions.extend_from_slice(&t.a);
            b.rewards.push(t.r);
            b.next_states.extend_from_slice(&t.s_next);
            b.dones.push(if t.done { 1.0 } else { 0.0 });
        }
        b
    }
}

/// Row-wise `[state | action]` for the critic input.
pub fn concat_state_action(states: &[f64], actions: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * SA_DIM);
    for (s, a) in states
        .chunks_exact(OBS_DIM)
        .zip(actions.chunks_exact(ACTION_DIM))
        .take(n)
    {
        out.extend_from_slice(s);
        out.extend_from_slice(a);
    }
    out
}

/// Discrete Ornstein-Uhlenbeck process with unit time step:
/// `x <- x + theta (mu - x) + sigma N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuProcess {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
    pub x: [f64; ACTION_DIM],
}

impl OuProcess {
    pub fn new(theta: f64, sigma: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "OU theta must be in (0, 1), got {theta}"
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("OU sigma must be >= 0, got {sigma}")));
        }
        Ok(Self {
            theta,
            sigma,
            mu: 0.0,
            x: [0.0; ACTION_DIM],
        })
    }

    pub fn reset(&mut self) {
        self.x = [0.0; ACTION_DIM];
    }

    pub fn sample(&mut self, rng: &mut Rng) -> [f64; ACTION_DIM] {
        for x in &mut self.x {
            let noise = if self.sigma == 0.0 {
                0.0
            } else {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma * z
            };
            *x += self.theta * (self.mu - *x) + noise;
        }
        self.x
    }

    /// Stationary standard deviation of the recurrence.
    pub fn stationary_std(&self) -> f64 {
        let keep = 1.0 - self.theta;
        (self.sigma * self.sigma / (1.0 - keep * keep)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Td3Config {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Target retention per update; targets move by `1 - polyak`.
    pub polyak: f64,
    pub target_noise_sigma: f64,
    pub target_noise_clip: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub policy_delay: u64,
    pub buffer_capacity: usize,
    pub learning_starts: usize,
    /// Uniform random actions for this many initial steps.
    pub warmup_steps: u64,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub optimizer: OptimizerKind,
    /// Draw hidden biases from the Glorot normal instead of zero.
    pub glorot_biases: bool,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self {
            actor_lr: 1e-5,
            critic_lr: 2e-5,
            polyak: 0.999,
            target_noise_sigma: 0.2,
            target_noise_clip: 0.5,
            gamma: 0.99,
            batch_size: 100,
            policy_delay: 2,
            buffer_capacity: 1_000_000,
            learning_starts: 100,
            warmup_steps: 0,
            ou_theta: 0.2,
            ou_sigma: 0.15,
            optimizer: OptimizerKind::Adam,
            glorot_biases: false,
        }
    }
}

impl Td3Config {
    pub fn validate(&self) -> Result<()> {
        let positive = [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.polyak > 0.0 && self.polyak < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "polyak must be in (0, 1), got {}",
                self.polyak
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be in [0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.target_noise_sigma >= 0.0 && self.target_noise_clip >= 0.0) {
            return Err(Error::InvalidParameter(
                "target noise sigma and clip must be >= 0".into(),
            ));
        }
        if self.batch_size == 0 || self.policy_delay == 0 {
            return Err(Error::InvalidParameter(
                "batch_size and policy_delay must be >= 1".into(),
            ));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::InvalidParameter(
                "buffer_capacity must hold at least one batch".into(),
            ));
        }
        OuProcess::new(self.ou_theta, self.ou_sigma)?;
        Ok(())
    }

    /// Buffer fill at which updates begin (never below one batch).
    pub fn update_threshold(&self) -> usize {
        self.learning_starts.max(self.batch_size)
    }
}

/// Exploratory action `clip(mu(s) + ou, -1, 1)`.
pub fn select_action(actor: &Mlp, obs: &Observation, ou: &mut OuProcess, rng: &mut Rng) -> Result<[f64; ACTION_DIM]> {
    let mu = actor.predict(obs.as_slice(), 1)?;
    let noise = ou.sample(rng);
    let mut a = [0.0; ACTION_DIM];
    for i in 0..ACTION_DIM {
        a[i] = (mu[i] + noise[i]).clamp(-1.0, 1.0);
    }
    Ok(a)
}

/// Deterministic policy action.
pub fn greedy_action(actor: &Mlp, obs: &Observation) -> Result<[f64; ACTION_DIM]> {
    let mu = actor.predict(obs.as_slice(), 1)?;
    let mut a = [0.0; ACTION_DIM];
    for i in 0..ACTION_DIM {
        a[i] = mu[i].clamp(-1.0, 1.0);
    }
    Ok(a)
}

/// Smoothed target actions `clip(mu'(s') + clip(eps, -c, c), -1, 1)` with
/// `eps ~ N(0, sigma)` drawn per component. Returns `n x 4` row-major.
pub fn target_actions(
    next_states: &[f64],
    n: usize,
    target_actor: &Mlp,
    sigma: f64,
    clip: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let mut acts = target_actor.predict(next_states, n)?;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for a in &mut acts {
            let eps: f64 = normal.sample(rng);
            *a = (*a + eps.clamp(-clip, clip)).clamp(-1.0, 1.0);
        }
    } else {
        for a in &mut acts {
            *a = a.clamp(-1.0, 1.0);
        }
    }
    Ok(acts)
}

/// Clipped double-Q Bellman targets.
pub fn compute_targets(
    rewards: &[f64],
    dones: &[f64],
    q1_next: &[f64],
    q2_next: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = rewards.len();
    if dones.len() != n || q1_next.len() != n || q2_next.len() != n {
        return Err(Error::Shape("target inputs differ in length".into()));
    }
    Ok((0..n)
        .map(|i| rewards[i] + gamma * (1.0 - dones[i]) * q1_next[i].min(q2_next[i]))
        .collect())
}

/// Gradient of `mean((Q(s, a) - y)^2)` with respect to the critic
/// parameters, together with the loss.
pub fn critic_gradient(batch: &Batch, targets: &[f64], critic: &Mlp) -> Result<(Gradients, f64)> {
    let n = batch.len;
    if n == 0 || targets.len() != n {
        return Err(Error::Shape(format!("{} targets for batch of {n}", targets.len())));
    }
    let input = concat_state_action(&batch.states, &batch.actions, n);
    let cache = critic.forward(&input, n)?;
    let q = cache.output();
    let mut loss = 0.0;
    let mut grad_q = vec![0.0; n];
    for i in 0..n {
        let err = q[i] - targets[i];
        loss += err * err;
        grad_q[i] = 2.0 * err / n as f64;
    }
    loss /= n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("critic loss {loss}")));
    }
    let (grads, _) = critic.backward(&cache, &grad_q)?;
    Ok((grads, loss))
}

/// One descent step of a critic on `mean((Q(s, a) - y)^2)`. Returns the loss
/// before the step.
pub fn critic_update(
    batch: &Batch,
    targets: &[f64],
    critic: &mut Mlp,
    state: &mut AdamState,
    lr: f64,
    kind: OptimizerKind,
) -> Result<f64> {
    let (grads, loss) = critic_gradient(batch, targets, critic)?;
    netcore::optimizer_step(kind, critic, &grads, state, lr)?;
    Ok(loss)
}

/// Gradient of `-mean(Q(s, mu(s)))` with respect to the actor parameters,
/// differentiating through the critic's action input, together with the
/// objective `mean(Q(s, mu(s)))`.
pub fn actor_gradient(batch: &Batch, actor: &Mlp, critic: &Mlp) -> Result<(Gradients, f64)> {
    let n = batch.len;
    if n == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let actor_cache = actor.forward(&batch.states, n)?;
    let input = concat_state_action(&batch.states, actor_cache.output(), n);
    let critic_cache = critic.forward(&input, n)?;
    let objective = critic_cache.output().iter().sum::<f64>() / n as f64;
    if !objective.is_finite() {
        return Err(Error::NonFinite(format!("actor objective {objective}")));
    }
    let dq = vec![1.0 / n as f64; n];
    let d_input = critic.input_gradient(&critic_cache, &dq)?;
    let grad_action: Vec<f64> = d_input
        .chunks_exact(SA_DIM)
        .flat_map(|row| row[OBS_DIM..].iter().map(|g| -g))
        .collect();
    let (grads, _) = actor.backward(&actor_cache, &grad_action)?;
    Ok((grads, objective))
}

/// One ascent step of the actor on `mean(Q1(s, mu(s)))`. The critic is
/// read-only. Returns the objective before the step.
pub fn actor_update(
    batch: &Batch,
    actor: &mut Mlp,
    critic: &Mlp,
    state: &mut AdamState,
    lr: f64,
    kind: OptimizerKind,
) -> Result<f64> {
    let (grads, objective) = actor_gradient(batch, actor, critic)?;
    netcore::optimizer_step(kind, actor, &grads, state, lr)?;
    Ok(objective)
}

/// `target <- rho * target + (1 - rho) * main`, elementwise.
pub fn polyak_update(target: &mut Mlp, main: &Mlp, rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must be in [0, 1], got {rho}")));
    }
    target.zip_params_mut(main, |t, m| *t = rho * *t + (1.0 - rho) * m)
}

/// Actor, twin critics and their target copies.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target_actor: Mlp,
    pub target_critic1: Mlp,
    pub target_critic2: Mlp,
}

impl Networks {
    /// Fresh networks with targets equal to the mains.
    pub fn init(rng: &mut Rng, glorot_biases: bool) -> Self {
        let actor = netcore::init_actor_with(rng, glorot_biases);
        let critic1 = netcore::init_critic_with(rng, glorot_biases);
        let critic2 = netcore::init_critic_with(rng, glorot_biases);
        Self {
            target_actor: actor.clone(),
            target_critic1: critic1.clone(),
            target_critic2: critic2.clone(),
            actor,
            critic1,
            critic2,
        }
    }

    pub fn all_finite(&self) -> bool {
        [
            &self.actor,
            &self.critic1,
            &self.critic2,
            &self.target_actor,
            &self.target_critic1,
            &self.target_critic2,
        ]
        .iter()
        .all(|n| n.all_finite())
    }
}

/// Optimizer moments for the three trained networks.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerStates {
    pub actor: AdamState,
    pub critic1: AdamState,
    pub critic2: AdamState,
}

impl OptimizerStates {
    pub fn new(nets: &Networks) -> Self {
        Self {
            actor: AdamState::new(&nets.actor),
            critic1: AdamState::new(&nets.critic1),
            critic2: AdamState::new(&nets.critic2),
        }
    }
}

/// Summary of one finished episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Environment steps taken by the trainer when the episode ended.
    pub env_steps: u64,
    pub ret: f64,
    pub outcome: EpisodeOutcome,
    pub steps: u64,
}

/// Data available right after the Bellman targets are formed, before any
/// parameter changes.
pub struct TargetEvent<'a> {
    pub update: u64,
    pub nets: &'a Networks,
    pub batch: &'a Batch,
    pub target_actions: &'a [f64],
    pub targets: &'a [f64],
    pub gamma: f64,
}

/// Data available after an update completed.
pub struct UpdateEvent<'a> {
    pub update: u64,
    pub env_step: u64,
    pub nets: &'a Networks,
    pub critic_loss: [f64; 2],
    /// Objective before the actor step, when the actor was updated.
    pub actor_objective: Option<f64>,
    pub polyak: f64,
}

pub struct StepEvent<'a> {
    pub env_step: u64,
    pub transition: &'a Transition,
    pub outcome: EpisodeOutcome,
}

/// Hooks into the training loop. All methods default to no-ops.
pub trait TrainObserver {
    fn on_step(&mut self, _event: &StepEvent<'_>) {}
    fn on_targets(&mut self, _event: &TargetEvent<'_>) {}
    fn on_update(&mut self, _event: &UpdateEvent<'_>) {}
    fn on_episode(&mut self, _record: &EpisodeRecord) {}
}

/// Observer that ignores everything.
pub struct NoObserver;

impl TrainObserver for NoObserver {}

#[derive(Debug, Clone, Copy)]
struct EpisodeProgress {
    obs: Observation,
    ret: f64,
    steps: u64,
}

/// Complete TD3 training state. Training is resumable: [`Trainer::run`] may
/// be called repeatedly and continues the current episode.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: Td3Config,
    pub nets: Networks,
    pub opt: OptimizerStates,
    buffer: ReplayBuffer,
    ou: OuProcess,
    rng: Rng,
    env_steps: u64,
    updates: u64,
    actor_updates: u64,
    episodes: u64,
    current: Option<EpisodeProgress>,
}

impl Trainer {
    pub fn new(cfg: Td3Config, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let nets = Networks::init(&mut seeded_rng(derive_seed(seed, 0)), cfg.glorot_biases);
        let opt = OptimizerStates::new(&nets);
        Ok(Self {
            buffer: ReplayBuffer::new(cfg.buffer_capacity)?,
            ou: OuProcess::new(cfg.ou_theta, cfg.ou_sigma)?,
            rng: seeded_rng(derive_seed(seed, 1)),
            cfg,
            nets,
            opt,
            env_steps: 0,
            updates: 0,
            actor_updates: 0,
            episodes: 0,
            current: None,
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.cfg
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn ou(&self) -> &OuProcess {
        &self.ou
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Critic updates performed (the update counter `j`).
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn actor_updates(&self) -> u64 {
        self.actor_updates
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Run `steps` environment steps.
    pub fn run(&mut self, env: &mut GateEnv, steps: u64, observer: &mut dyn TrainObserver) -> Result<()> {
        for _ in 0..steps {
            self.step(env, observer)?;
        }
        Ok(())
    }

    fn step(&mut self, env: &mut GateEnv, observer: &mut dyn TrainObserver) -> Result<()> {
        let mut progress = match self.current.take() {
            Some(p) => p,
            None => {
                self.ou.reset();
                EpisodeProgress {
                    obs: env.reset(),
                    ret: 0.0,
                    steps: 0,
                }
            }
        };

        let action = if self.env_steps < self.cfg.warmup_steps {
            let mut a = [0.0; ACTION_DIM];
            for v in &mut a {
                *v = self.rng.gen_range(-1.0..=1.0);
            }
            a
        } else {
            select_action(&self.nets.actor, &progress.obs, &mut self.ou, &mut self.rng)?
        };
        let res = env.step(action)?;
        let transition = Transition {
            s: progress.obs.0,
            a: action,
            r: res.reward,
            s_next: res.obs.0,
            done: res.terminated,
        };
        self.buffer.store(transition);
        self.env_steps += 1;
        progress.ret += res.reward;
        progress.steps += 1;
        progress.obs = res.obs;
        observer.on_step(&StepEvent {
            env_step: self.env_steps,
            transition: &transition,
            outcome: res.outcome,
        });

        if res.terminated || res.truncated {
            let record = EpisodeRecord {
                episode: self.episodes,
                env_steps: self.env_steps,
                ret: progress.ret,
                outcome: res.outcome,
                steps: progress.steps,
            };
            self.episodes += 1;
            self.ou.reset();
            observer.on_episode(&record);
        } else {
            self.current = Some(progress);
        }

        if self.buffer.len() >= self.cfg.update_threshold() {
            self.update(observer)?;
        }
        Ok(())
    }

    /// One TD3 update from a freshly sampled batch.
    pub fn update(&mut self, observer: &mut dyn TrainObserver) -> Result<()> {
        let cfg = self.cfg;
        let batch = self.buffer.sample_batch(cfg.batch_size, &mut self.rng)?;
        let n = batch.len;
        let next_actions = target_actions(
            &batch.next_states,
            n,
            &self.nets.target_actor,
            cfg.target_noise_sigma,
            cfg.target_noise_clip,
            &mut self.rng,
        )?;
        let next_input = concat_state_action(&batch.next_states, &next_actions, n);
        let q1 = self.nets.target_critic1.predict(&next_input, n)?;
        let q2 = self.nets.target_critic2.predict(&next_input, n)?;
        let targets = compute_targets(&batch.rewards, &batch.dones, &q1, &q2, cfg.gamma)?;
        self.updates += 1;
        observer.on_targets(&TargetEvent {
            update: self.updates,
            nets: &self.nets,
            batch: &batch,
            target_actions: &next_actions,
            targets: &targets,
            gamma: cfg.gamma,
        });

        let l1 = critic_update(
            &batch,
            &targets,
            &mut self.nets.critic1,
            &mut self.opt.critic1,
            cfg.critic_lr,
            cfg.optimizer,
        )?;
        let l2 = critic_update(
            &batch,
            &targets,
            &mut self.nets.critic2,
            &mut self.opt.critic2,
            cfg.critic_lr,
            cfg.optimizer,
        )?;

        let mut actor_objective = None;
        if self.updates % cfg.policy_delay == 0 {
            let j = actor_update(
                &batch,
                &mut self.nets.actor,
                &self.nets.critic1,
                &mut self.opt.actor,
                cfg.actor_lr,
                cfg.optimizer,
            )?;
            actor_objective = Some(j);
            self.actor_updates += 1;
            let nets = &mut self.nets;
            polyak_update(&mut nets.target_critic1, &nets.critic1, cfg.polyak)?;
            polyak_update(&mut nets.target_critic2, &nets.critic2, cfg.polyak)?;
            polyak_update(&mut nets.target_actor, &nets.actor, cfg.polyak)?;
        }
        if !self.nets.all_finite() {
            return Err(Error::NonFinite(format!(
                "network parameters after update {}",
                self.updates
            )));
        }
        observer.on_update(&UpdateEvent {
            update: self.updates,
            env_step: self.env_steps,
            nets: &self.nets,
            critic_loss: [l1, l2],
            actor_objective,
            polyak: cfg.polyak,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{Activation, Layer};

    fn transition(tag: f64) -> Transition {
        Transition {
            s: [tag; OBS_DIM],
            a: [0.0; ACTION_DIM],
            r: tag,
            s_next: [tag; OBS_DIM],
            done: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(2).unwrap();
        for k in 1..=3 {
            buf.store(transition(k as f64));
            assert!(buf.len() <= 2);
        }
        let mut rs: Vec<f64> = buf.iter().map(|t| t.r).collect();
        rs.sort_by(f64::total_cmp);
        assert_eq!(rs, vec![2.0, 3.0]);
        assert!(ReplayBuffer::new(0).is_err());
    }

    #[test]
    fn sampling_preconditions() {
        let mut rng = seeded_rng(1);
        let mut buf = ReplayBuffer::new(10).unwrap();
        assert!(matches!(
            buf.sample_batch(1, &mut rng),
            Err(Error::InsufficientData { have: 0, .. })
        ));
        buf.store(transition(4.0));
        let b = buf.sample_batch(1, &mut rng).unwrap();
        assert_eq!(b.rewards, vec![4.0]);
        assert!(buf.sample_batch(2, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_uniform_and_seeded() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        for k in 0..10 {
            buf.store(transition(k as f64));
        }
        let mut rng = seeded_rng(2);
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            for i in buf.sample_indices(10, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / 100_000.0;
            assert!((freq - 0.1).abs() < 0.01, "freq {freq}");
        }
        let a = buf.sample_batch(8, &mut seeded_rng(9)).unwrap();
        let b = buf.sample_batch(8, &mut seeded_rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ou_recurrence() {
        let mut rng = seeded_rng(0);
        let mut ou = OuProcess::new(0.2, 0.0).unwrap();
        ou.x = [1.0; 4];
        assert_eq!(ou.sample(&mut rng), [0.8; 4]);
        ou.reset();
        assert_eq!(ou.sample(&mut rng), [0.0; 4]);
        assert!(OuProcess::new(1.0, 0.1).is_err());
        assert!(OuProcess::new(0.2, -0.1).is_err());
    }

    #[test]
    fn ou_stationary_std() {
        let mut rng = seeded_rng(17);
        let mut ou = OuProcess::new(0.2, 0.15).unwrap();
        assert!((ou.stationary_std() - 0.25).abs() < 1e-12);
        for _ in 0..1000 {
            ou.sample(&mut rng);
        }
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = ou.sample(&mut rng)[0];
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let std = (s2 / n as f64 - mean * mean).sqrt();
        assert!((std / 0.25 - 1.0).abs() < 0.05, "std {std}");
    }

    fn zero_actor() -> Mlp {
        Mlp::zeros(&[8, 4, 4], &[Activation::Relu, Activation::Tanh]).unwrap()
    }

    #[test]
    fn action_selection_clips() {
        let mut rng = seeded_rng(3);
        let actor = zero_actor();
        let obs = Observation([0.5; 8]);
        let mut ou = OuProcess::new(0.2, 0.0).unwrap();
        assert_eq!(select_action(&actor, &obs, &mut ou, &mut rng).unwrap(), [0.0; 4]);
        ou.x = [2.0; 4];
        // 2 - 0.2 * 2 = 1.6 before clipping
        assert_eq!(select_action(&actor, &obs, &mut ou, &mut rng).unwrap(), [1.0; 4]);

        let mut ou = OuProcess::new(0.2, 5.0).unwrap();
        for _ in 0..1000 {
            let a = select_action(&actor, &obs, &mut ou, &mut rng).unwrap();
            assert!(a.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn target_action_smoothing() {
        let mut rng = seeded_rng(4);
        let actor = netcore::init_actor(&mut rng);
        let s: Vec<f64> = (0..8 * 5).map(|i| (i as f64).cos()).collect();
        let exact = actor.predict(&s, 5).unwrap();
        assert_eq!(target_actions(&s, 5, &actor, 0.0, 0.5, &mut rng).unwrap(), exact);
        let noisy = target_actions(&s, 5, &actor, 10.0, 0.5, &mut rng).unwrap();
        for (a, e) in noisy.iter().zip(&exact) {
            assert!(a.abs() <= 1.0);
            assert!((a - e).abs() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn clipped_normal_perturbation_std() {
        // zero policy: the perturbation is the action itself
        let mut rng = seeded_rng(5);
        let actor = zero_actor();
        let n = 250_000;
        let acts = target_actions(&vec![0.0; 8 * n], n, &actor, 0.2, 0.5, &mut rng).unwrap();
        let m = acts.len() as f64;
        let mean = acts.iter().sum::<f64>() / m;
        let std = (acts.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / m).sqrt();
        assert!((std - 0.1987).abs() < 0.002, "std {std}");
    }

    #[test]
    fn bellman_targets() {
        let y = compute_targets(&[1.0], &[0.0], &[2.0], &[3.0], 0.99).unwrap();
        assert!((y[0] - 2.98).abs() < 1e-12);
        assert_eq!(
            compute_targets(&[1.5], &[1.0], &[2.0], &[3.0], 0.99).unwrap(),
            vec![1.5]
        );
        let y = compute_targets(&[0.5], &[0.0], &[4.0], &[4.0], 0.9).unwrap();
        assert_eq!(y[0], 0.5 + 0.9 * 4.0);
        assert!(compute_targets(&[1.0, 2.0], &[0.0], &[1.0], &[1.0], 0.9).is_err());
    }

    #[test]
    fn polyak_blends() {
        let one = Mlp::new(vec![
            Layer::from_parts(1, 1, vec![1.0], vec![1.0], Activation::Linear).unwrap()
        ])
        .unwrap();
        let zero = Mlp::zeros(&[1, 1], &[Activation::Linear]).unwrap();

        let mut t = one.clone();
        polyak_update(&mut t, &zero, 1.0).unwrap();
        assert_eq!(t, one);
        polyak_update(&mut t, &zero, 0.0).unwrap();
        assert_eq!(t, zero);
        let mut t = one.clone();
        polyak_update(&mut t, &zero, 0.999).unwrap();
        assert_eq!(t.flat_params(), vec![0.999, 0.999]);

        let wrong = Mlp::zeros(&[2, 1], &[Activation::Linear]).unwrap();
        assert!(matches!(polyak_update(&mut t, &wrong, 0.5), Err(Error::Shape(_))));
    }

    fn frozen_batch(rng: &mut Rng, n: usize) -> Batch {
        let ts: Vec<Transition> = (0..n)
            .map(|_| {
                let mut t = transition(0.0);
                for v in t.s.iter_mut().chain(t.s_next.iter_mut()) {
                    *v = rng.gen_range(-2.0..2.0);
                }
                for v in &mut t.a {
                    *v = rng.gen_range(-1.0..1.0);
                }
                t.r = rng.gen_range(-1.0..1.0);
                t
            })
            .collect();
        Batch::from_transitions(&ts)
    }

    #[test]
    fn critic_fixed_point_is_stationary() {
        let mut rng = seeded_rng(6);
        let mut critic = netcore::init_critic(&mut rng);
        let batch = frozen_batch(&mut rng, 16);
        let input = concat_state_action(&batch.states, &batch.actions, 16);
        let q = critic.predict(&input, 16).unwrap();
        let before = critic.flat_params();
        let mut st = AdamState::new(&critic);
        let loss = critic_update(&batch, &q, &mut critic, &mut st, 1e-3, OptimizerKind::Adam).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(critic.flat_params(), before);
    }

    #[test]
    fn critic_loss_decreases() {
        let mut rng = seeded_rng(7);
        let mut critic = netcore::init_critic(&mut rng);
        let batch = frozen_batch(&mut rng, 32);
        let targets: Vec<f64> = batch.rewards.iter().map(|r| 3.0 * r).collect();
        let mut st = AdamState::new(&critic);
        let first = critic_update(&batch, &targets, &mut critic, &mut st, 1e-4, OptimizerKind::Adam).unwrap();
        let mut last = first;
        for _ in 0..99 {
            last = critic_update(&batch, &targets, &mut critic, &mut st, 1e-4, OptimizerKind::Adam).unwrap();
        }
        assert!(last < first, "{last} !< {first}");
    }

    #[test]
    fn actor_ignores_action_blind_critic() {
        let mut rng = seeded_rng(8);
        let mut actor = netcore::init_actor(&mut rng);
        let mut critic = netcore::init_critic(&mut rng);
        // zero the action columns of the first critic layer
        for row in 0..400 {
            for col in 8..12 {
                critic.set_param(row * 12 + col, 0.0);
            }
        }
        let batch = frozen_batch(&mut rng, 8);
        let before = actor.flat_params();
        let mut st = AdamState::new(&actor);
        actor_update(&batch, &mut actor, &critic, &mut st, 1e-3, OptimizerKind::Adam).unwrap();
        assert_eq!(actor.flat_params(), before);
    }

    #[test]
    fn actor_ascends_frozen_critic() {
        let mut rng = seeded_rng(9);
        let mut actor = netcore::init_actor(&mut rng);
        let critic = netcore::init_critic(&mut rng);
        let critic_before = critic.flat_params();
        let batch = frozen_batch(&mut rng, 32);
        let mut st = AdamState::new(&actor);
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..50 {
            let j = actor_update(&batch, &mut actor, &critic, &mut st, 1e-4, OptimizerKind::Adam).unwrap();
            assert!(j >= prev - 1e-12, "{j} < {prev}");
            prev = j;
        }
        assert_eq!(critic.flat_params(), critic_before);
    }

    #[test]
    fn trainer_targets_start_equal() {
        let tr = Trainer::new(Td3Config::default(), 11).unwrap();
        assert_eq!(tr.nets.actor.flat_params(), tr.nets.target_actor.flat_params());
        assert_eq!(tr.nets.critic1.flat_params(), tr.nets.target_critic1.flat_params());
        assert_eq!(tr.nets.critic2.flat_params(), tr.nets.target_critic2.flat_params());
    }

    #[test]
    fn config_validation() {
        assert!(Td3Config::default().validate().is_ok());
        let bad = Td3Config {
            polyak: 1.0,
            ..Td3Config::default()
        };
        assert!(bad.validate().is_err());
        let bad = Td3Config {
            policy_delay: 0,
            ..Td3Config::default()
        };
        assert!(bad.validate().is_err());
        let bad = Td3Config {
            gamma: 1.5,
            ..Td3Config::default()
        };
        assert!(bad.validate().is_err());
    }
}
