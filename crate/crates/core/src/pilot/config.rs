//! Flat, namespaced `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! seed = 7
//! env.stochastic = true
//! td3.actor_lr = 1e-5
//! world.x_bounds = -10, 2
//! ```
//!
//! Tuples and vectors are comma separated. Unknown or repeated keys are
//! rejected; missing keys keep their defaults. [`RunConfig::render`] prints
//! every key in a fixed order, which is what gets written into run
//! directories and hashed into checkpoints.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gateworld::EnvConfig;
use crate::netcore::OptimizerKind;
use crate::pilot::baseline::PdGains;
use crate::td3core::Td3Config;

/// Default training length in environment steps.
pub const DEFAULT_TOTAL_STEPS: u64 = 2_500_000;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub td3: Td3Config,
    pub total_steps: u64,
    pub checkpoint_every: u64,
    pub eval_episodes: usize,
    pub pd: PdGains,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            env: EnvConfig::default(),
            td3: Td3Config::default(),
            total_steps: DEFAULT_TOTAL_STEPS,
            checkpoint_every: 100_000,
            eval_episodes: 10,
            pd: PdGains::default(),
        }
    }
}

const AXIS_NAMES: [&str; 4] = ["x", "y", "z", "yaw"];

fn parse_scalar<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.trim().parse::<T>().map_err(|_| format!("cannot parse {v:?}"))
}

fn parse_list<const N: usize>(v: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {v:?}"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_scalar(p)?;
    }
    Ok(out)
}

fn parse_pair(v: &str) -> std::result::Result<(f64, f64), String> {
    let [a, b] = parse_list::<2>(v)?;
    Ok((a, b))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.trim() {
        "true" | "1" | "on" => Ok(true),
        "false" | "0" | "off" => Ok(false),
        other => Err(format!("expected true/false, got {other:?}")),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn fmt_pair((a, b): (f64, f64)) -> String {
    format!("{a:?}, {b:?}")
}

impl RunConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let env = &mut self.env;
        let td3 = &mut self.td3;
        match key {
            "seed" => self.seed = parse_scalar(value)?,
            "env.stochastic" => env.stochastic = parse_bool(value)?,
            "env.ts" => env.ts = parse_scalar(value)?,
            "env.wrap_yaw" => env.wrap_yaw = parse_bool(value)?,
            "env.normalize_obs" => env.normalize_obs = parse_bool(value)?,
            "world.x_bounds" => env.world.x_bounds = parse_pair(value)?,
            "world.y_bounds" => env.world.y_bounds = parse_pair(value)?,
            "world.z_bounds" => env.world.z_bounds = parse_pair(value)?,
            "world.vel_limits" => env.world.vel_limits = parse_list(value)?,
            "world.timeout_steps" => env.world.timeout_steps = parse_scalar(value)?,
            "gate.outer_dims" => env.gate.outer_dims = parse_list(value)?,
            "gate.wall_thickness" => env.gate.wall_thickness = parse_scalar(value)?,
            "drone.half_extents" => env.drone.half_extents = parse_list(value)?,
            "spawn.x" => env.spawn.x = parse_pair(value)?,
            "spawn.y" => env.spawn.y = parse_pair(value)?,
            "spawn.z" => env.spawn.z = parse_pair(value)?,
            "spawn.yaw" => env.spawn.yaw = parse_pair(value)?,
            "noise.vel_sigma" => env.noise.vel_sigma = parse_list(value)?,
            "noise.pos_sigma" => env.noise.pos_sigma = parse_list(value)?,
            "noise.drift_interval_steps" => env.noise.drift_interval_steps = parse_scalar(value)?,
            "lag.tau_xy_bounds" => env.taus.tau_xy_bounds = parse_pair(value)?,
            "lag.tau_zyaw_bounds" => env.taus.tau_zyaw_bounds = parse_pair(value)?,
            "net.glorot_biases" => td3.glorot_biases = parse_bool(value)?,
            "td3.actor_lr" => td3.actor_lr = parse_scalar(value)?,
            "td3.critic_lr" => td3.critic_lr = parse_scalar(value)?,
            "td3.polyak" => td3.polyak = parse_scalar(value)?,
            "td3.target_noise_sigma" => td3.target_noise_sigma = parse_scalar(value)?,
            "td3.target_noise_clip" => td3.target_noise_clip = parse_scalar(value)?,
            "td3.gamma" => td3.gamma = parse_scalar(value)?,
            "td3.batch_size" => td3.batch_size = parse_scalar(value)?,
            "td3.policy_delay" => td3.policy_delay = parse_scalar(value)?,
            "td3.buffer_capacity" => td3.buffer_capacity = parse_scalar(value)?,
            "td3.learning_starts" => td3.learning_starts = parse_scalar(value)?,
            "td3.warmup_steps" => td3.warmup_steps = parse_scalar(value)?,
            "td3.ou_theta" => td3.ou_theta = parse_scalar(value)?,
            "td3.ou_sigma" => td3.ou_sigma = parse_scalar(value)?,
            "td3.optimizer" => {
                td3.optimizer = match value.trim() {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    other => return Err(format!("unknown optimizer {other:?}")),
                }
            }
            "train.total_steps" => self.total_steps = parse_scalar(value)?,
            "train.checkpoint_every" => self.checkpoint_every = parse_scalar(value)?,
            "eval.episodes" => self.eval_episodes = parse_scalar(value)?,
            "baseline.kp" => self.pd.kp = parse_list(value)?,
            "baseline.kd" => self.pd.kd = parse_list(value)?,
            _ => {
                let axis_key = |prefix: &str| {
                    key.strip_prefix(prefix)
                        .and_then(|axis| AXIS_NAMES.iter().position(|a| *a == axis))
                };
                if let Some(i) = axis_key("noise.vel_clip.") {
                    env.noise.vel_clip[i] = parse_pair(value)?;
                } else if let Some(i) = axis_key("noise.pos_clip.") {
                    env.noise.pos_clip[i] = parse_pair(value)?;
                } else {
                    return Err(format!("unknown key {key:?}"));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.td3.validate()?;
        self.pd.validate()?;
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidParameter("train.checkpoint_every must be > 0".into()));
        }
        Ok(())
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn render(&self) -> String {
        let env = &self.env;
        let td3 = &self.td3;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("seed", self.seed.to_string());
        put("env.stochastic", env.stochastic.to_string());
        put("env.ts", format!("{:?}", env.ts));
        put("env.wrap_yaw", env.wrap_yaw.to_string());
        put("env.normalize_obs", env.normalize_obs.to_string());
        put("world.x_bounds", fmt_pair(env.world.x_bounds));
        put("world.y_bounds", fmt_pair(env.world.y_bounds));
        put("world.z_bounds", fmt_pair(env.world.z_bounds));
        put("world.vel_limits", fmt_list(&env.world.vel_limits));
        put("world.timeout_steps", env.world.timeout_steps.to_string());
        put("gate.outer_dims", fmt_list(&env.gate.outer_dims));
        put("gate.wall_thickness", format!("{:?}", env.gate.wall_thickness));
        put("drone.half_extents", fmt_list(&env.drone.half_extents));
        put("spawn.x", fmt_pair(env.spawn.x));
        put("spawn.y", fmt_pair(env.spawn.y));
        put("spawn.z", fmt_pair(env.spawn.z));
        put("spawn.yaw", fmt_pair(env.spawn.yaw));
        put("noise.vel_sigma", fmt_list(&env.noise.vel_sigma));
        for (i, axis) in AXIS_NAMES.iter().enumerate() {
            put(&format!("noise.vel_clip.{axis}"), fmt_pair(env.noise.vel_clip[i]));
        }
        put("noise.pos_sigma", fmt_list(&env.noise.pos_sigma));
        for (i, axis) in AXIS_NAMES.iter().enumerate() {
            put(&format!("noise.pos_clip.{axis}"), fmt_pair(env.noise.pos_clip[i]));
        }
        put("noise.drift_interval_steps", env.noise.drift_interval_steps.to_string());
        put("lag.tau_xy_bounds", fmt_pair(env.taus.tau_xy_bounds));
        put("lag.tau_zyaw_bounds", fmt_pair(env.taus.tau_zyaw_bounds));
        put("net.glorot_biases", td3.glorot_biases.to_string());
        put("td3.actor_lr", format!("{:?}", td3.actor_lr));
        put("td3.critic_lr", format!("{:?}", td3.critic_lr));
        put("td3.polyak", format!("{:?}", td3.polyak));
        put("td3.target_noise_sigma", format!("{:?}", td3.target_noise_sigma));
        put("td3.target_noise_clip", format!("{:?}", td3.target_noise_clip));
        put("td3.gamma", format!("{:?}", td3.gamma));
        put("td3.batch_size", td3.batch_size.to_string());
        put("td3.policy_delay", td3.policy_delay.to_string());
        put("td3.buffer_capacity", td3.buffer_capacity.to_string());
        put("td3.learning_starts", td3.learning_starts.to_string());
        put("td3.warmup_steps", td3.warmup_steps.to_string());
        put("td3.ou_theta", format!("{:?}", td3.ou_theta));
        put("td3.ou_sigma", format!("{:?}", td3.ou_sigma));
        put(
            "td3.optimizer",
            match td3.optimizer {
                OptimizerKind::Adam => "adam",
                OptimizerKind::Sgd => "sgd",
            }
            .to_string(),
        );
        put("train.total_steps", self.total_steps.to_string());
        put("train.checkpoint_every", self.checkpoint_every.to_string());
        put("eval.episodes", self.eval_episodes.to_string());
        put("baseline.kp", fmt_list(&self.pd.kp));
        put("baseline.kd", fmt_list(&self.pd.kd));
        s
    }

    /// SHA-256 of the rendered configuration.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.render().as_bytes()).into()
    }
}
