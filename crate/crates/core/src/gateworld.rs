//! Episodic gate-racing environment.
//!
//! The gate sits at the world origin with its normal along +X. The drone is
//! spawned behind it (negative X) and must fly through the inner opening.
//! Touching the gate's X-slab is a one-shot terminal event: success when the
//! drone box lies entirely inside the opening, a gate crash otherwise.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::lagsim::{self, make_lags, AxisLag, NoiseConfig, StochasticConfig, VehicleState, AXES, DEFAULT_TS};
use crate::{seeded_rng, Rng};

pub const OBS_DIM: usize = 8;
pub const ACTION_DIM: usize = AXES;

/// Slack accepted on normalized actions before they are rejected.
pub const ACTION_TOLERANCE: f64 = 1e-9;

const YAW_WEIGHT: f64 = 3e-4;
const PROXIMITY_WEIGHT: f64 = 4e-2;
const PROXIMITY_SCALE: f64 = 15.0;
const PAST_GATE_PENALTY: f64 = 5e-2;
const IDLE_PENALTY: f64 = 1e-2;

const PASS_BONUS: f64 = 100.0;
const CENTERING_BONUS: f64 = 200.0;
const HEADING_BONUS: f64 = 100.0;
const GATE_CRASH_PENALTY: f64 = 20.0;
const GROUND_CRASH_PENALTY: f64 = 20.0;
const BOUNDARY_PENALTY: f64 = 5.0;

/// Axis-aligned world box, command limits and the episode timeout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldSpec {
    pub x_bounds: (f64, f64),
    pub y_bounds: (f64, f64),
    pub z_bounds: (f64, f64),
    /// Symmetric full-scale command per channel (vx, vy, vz, yaw rate).
    pub vel_limits: [f64; AXES],
    pub timeout_steps: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            x_bounds: (-10.0, 2.0),
            y_bounds: (-3.0, 3.0),
            z_bounds: (-1.5, 2.5),
            vel_limits: [2.0, 2.0, 1.0, FRAC_PI_2],
            timeout_steps: 2000,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("x", self.x_bounds), ("y", self.y_bounds), ("z", self.z_bounds)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "{name} bounds require lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        if self.vel_limits.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "velocity limits must be positive, got {:?}",
                self.vel_limits
            )));
        }
        if self.timeout_steps == 0 {
            return Err(Error::InvalidParameter("timeout_steps must be > 0".into()));
        }
        Ok(())
    }

    /// Whether a point lies inside the closed world box.
    pub fn contains(&self, pos: [f64; 3]) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(pos[0], self.x_bounds) && inside(pos[1], self.y_bounds) && inside(pos[2], self.z_bounds)
    }
}

/// Gate frame: outer box extents (X depth, Y width, Z height) and wall thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateSpec {
    pub outer_dims: [f64; 3],
    pub wall_thickness: f64,
}

impl Default for GateSpec {
    fn default() -> Self {
        Self {
            outer_dims: [0.15, 1.8, 1.22],
            wall_thickness: 0.12,
        }
    }
}

impl GateSpec {
    pub fn half_depth(&self) -> f64 {
        self.outer_dims[0] / 2.0
    }

    /// Half-extents (Y, Z) of the inner opening.
    pub fn opening_half(&self) -> (f64, f64) {
        (
            self.outer_dims[1] / 2.0 - self.wall_thickness,
            self.outer_dims[2] / 2.0 - self.wall_thickness,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (hy, hz) = self.opening_half();
        if self.outer_dims.iter().any(|d| !(*d > 0.0)) || !(self.wall_thickness > 0.0) || hy <= 0.0 || hz <= 0.0 {
            return Err(Error::InvalidParameter(format!("degenerate gate geometry {self:?}")));
        }
        Ok(())
    }
}

/// Interference box of the drone, centred on its position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroneBox {
    pub half_extents: [f64; 3],
}

impl Default for DroneBox {
    fn default() -> Self {
        Self {
            half_extents: [0.3, 0.3, 0.1],
        }
    }
}

impl DroneBox {
    pub fn validate(&self) -> Result<()> {
        if self.half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "drone half extents must be positive, got {:?}",
                self.half_extents
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpisodeOutcome {
    Running,
    Success,
    GateCrash,
    GroundCrash,
    OutOfBounds,
    Timeout,
}

impl EpisodeOutcome {
    pub const ALL: [EpisodeOutcome; 6] = [
        EpisodeOutcome::Running,
        EpisodeOutcome::Success,
        EpisodeOutcome::GateCrash,
        EpisodeOutcome::GroundCrash,
        EpisodeOutcome::OutOfBounds,
        EpisodeOutcome::Timeout,
    ];

    /// True terminal: the Bellman target must not bootstrap.
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            EpisodeOutcome::Success
                | EpisodeOutcome::GateCrash
                | EpisodeOutcome::GroundCrash
                | EpisodeOutcome::OutOfBounds
        )
    }

    pub fn is_truncated(self) -> bool {
        self == EpisodeOutcome::Timeout
    }

    pub fn is_done(self) -> bool {
        self != EpisodeOutcome::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeOutcome::Running => "running",
            EpisodeOutcome::Success => "success",
            EpisodeOutcome::GateCrash => "gate_crash",
            EpisodeOutcome::GroundCrash => "ground_crash",
            EpisodeOutcome::OutOfBounds => "out_of_bounds",
            EpisodeOutcome::Timeout => "timeout",
        }
    }
}

impl fmt::Display for EpisodeOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EpisodeOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EpisodeOutcome::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown outcome {s:?}")))
    }
}

/// Policy input: x, y, z, yaw, vx, vy, vz, yaw rate in the gate frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub outcome: EpisodeOutcome,
}

/// Pose of a gate in the world: centre position and heading of its normal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GatePose {
    pub pos: [f64; 3],
    pub yaw: f64,
}

impl GatePose {
    /// Gate at the origin facing +X.
    pub fn canonical() -> Self {
        Self::default()
    }
}

/// Map a normalized action in [-1, 1] onto physical commands.
pub fn scale_action(normalized: [f64; ACTION_DIM], world: &WorldSpec) -> Result<[f64; ACTION_DIM]> {
    let mut cmd = [0.0; ACTION_DIM];
    for (i, &u) in normalized.iter().enumerate() {
        if !(u.abs() <= 1.0 + ACTION_TOLERANCE) {
            return Err(Error::InvalidAction { index: i, value: u });
        }
        cmd[i] = u.clamp(-1.0, 1.0) * world.vel_limits[i];
    }
    Ok(cmd)
}

/// Inverse of [`scale_action`], clipping out-of-range commands to full scale.
pub fn normalize_command(cmd: [f64; ACTION_DIM], world: &WorldSpec) -> [f64; ACTION_DIM] {
    let mut out = [0.0; ACTION_DIM];
    for i in 0..ACTION_DIM {
        out[i] = (cmd[i] / world.vel_limits[i]).clamp(-1.0, 1.0);
    }
    out
}

/// Outcome of the current state. Precedence: gate, ground, bounds, timeout.
pub fn classify(
    state: &VehicleState,
    world: &WorldSpec,
    gate: &GateSpec,
    drone: &DroneBox,
    step: u64,
) -> EpisodeOutcome {
    let [x, y, z] = state.pos;
    let [hx, hy, hz] = drone.half_extents;
    if x.abs() <= gate.half_depth() + hx {
        let (oy, oz) = gate.opening_half();
        if y.abs() + hy <= oy && z.abs() + hz <= oz {
            return EpisodeOutcome::Success;
        }
        return EpisodeOutcome::GateCrash;
    }
    if z < world.z_bounds.0 {
        return EpisodeOutcome::GroundCrash;
    }
    if !world.contains(state.pos) {
        return EpisodeOutcome::OutOfBounds;
    }
    if step >= world.timeout_steps {
        return EpisodeOutcome::Timeout;
    }
    EpisodeOutcome::Running
}

/// Per-step shaping term.
pub fn dense_reward(state: &VehicleState) -> f64 {
    let [x, y, z] = state.pos;
    let mut r = YAW_WEIGHT * (FRAC_PI_4 - state.yaw.abs());
    if x < 0.0 && state.vel[0] > 0.0 {
        r += PROXIMITY_WEIGHT * (1.0 - (x * x + y * y + z * z) / PROXIMITY_SCALE);
    } else if x > 0.0 {
        r -= PAST_GATE_PENALTY;
    } else {
        r -= IDLE_PENALTY;
    }
    r
}

/// Terminal bonus or penalty. `outcome` must be the classification of `state`.
/// The ground and boundary clauses are independent and stack.
pub fn final_reward(outcome: EpisodeOutcome, state: &VehicleState, world: &WorldSpec) -> f64 {
    let [_, y, z] = state.pos;
    let mut r = 0.0;
    match outcome {
        EpisodeOutcome::Success => {
            r += PASS_BONUS;
            r += CENTERING_BONUS * 100f64.powf(-(y * y + z * z));
            let yaw = state.yaw.abs();
            if yaw < FRAC_PI_6 {
                r += HEADING_BONUS * (1.0 - 3.0 * yaw / PI);
            }
        }
        EpisodeOutcome::GateCrash => r -= GATE_CRASH_PENALTY,
        _ => {}
    }
    if z < world.z_bounds.0 {
        r -= GROUND_CRASH_PENALTY;
    }
    if !world.contains(state.pos) {
        r -= BOUNDARY_PENALTY;
    }
    r
}

/// Express the state relative to a gate: position and yaw relative to the
/// gate origin and normal, velocities rotated into the gate frame.
pub fn observe(state: &VehicleState, gate: &GatePose) -> Observation {
    let (s, c) = gate.yaw.sin_cos();
    // R(-yaw) applied to world-frame planar vectors
    let rot = |vx: f64, vy: f64| (c * vx + s * vy, -s * vx + c * vy);
    let (x, y) = rot(state.pos[0] - gate.pos[0], state.pos[1] - gate.pos[1]);
    let (vx, vy) = rot(state.vel[0], state.vel[1]);
    Observation([
        x,
        y,
        state.pos[2] - gate.pos[2],
        state.yaw - gate.yaw,
        vx,
        vy,
        state.vel[2],
        state.yaw_rate,
    ])
}

/// Uniform spawn box. Degenerate ranges (lo == hi) pin that coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpawnConfig {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
    pub yaw: (f64, f64),
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            x: (-9.0, -4.0),
            y: (-2.0, 2.0),
            z: (-1.0, 1.5),
            yaw: (-FRAC_PI_4, FRAC_PI_4),
        }
    }
}

impl SpawnConfig {
    /// Always spawn at the same pose.
    pub fn fixed(pos: [f64; 3], yaw: f64) -> Self {
        Self {
            x: (pos[0], pos[0]),
            y: (pos[1], pos[1]),
            z: (pos[2], pos[2]),
            yaw: (yaw, yaw),
        }
    }

    fn ranges(&self) -> [(f64, f64); 4] {
        [self.x, self.y, self.z, self.yaw]
    }

    pub fn validate(&self, world: &WorldSpec) -> Result<()> {
        for (lo, hi) in self.ranges() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "spawn range requires lo <= hi, got ({lo}, {hi})"
                )));
            }
        }
        let strictly = |(lo, hi): (f64, f64), (blo, bhi): (f64, f64)| lo > blo && hi < bhi;
        if !(strictly(self.x, world.x_bounds) && strictly(self.y, world.y_bounds) && strictly(self.z, world.z_bounds)) {
            return Err(Error::InvalidParameter(
                "spawn box must lie strictly inside the world".into(),
            ));
        }
        if self.x.1 >= 0.0 {
            return Err(Error::InvalidParameter("spawn must be behind the gate (x < 0)".into()));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut Rng) -> VehicleState {
        let mut draw = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.gen_range(lo..hi) };
        let x = draw(self.x);
        let y = draw(self.y);
        let z = draw(self.z);
        let yaw = draw(self.yaw);
        VehicleState::at_rest([x, y, z], yaw)
    }
}

/// Everything that defines an environment instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig {
    pub world: WorldSpec,
    pub gate: GateSpec,
    pub drone: DroneBox,
    pub spawn: SpawnConfig,
    /// Simulation period, s.
    pub ts: f64,
    /// Enables velocity noise, pose drift and time-constant randomisation.
    pub stochastic: bool,
    pub noise: NoiseConfig,
    pub taus: StochasticConfig,
    /// Wrap yaw into (-pi, pi] after every step.
    pub wrap_yaw: bool,
    /// Divide observations by the world/command full scale.
    pub normalize_obs: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            gate: GateSpec::default(),
            drone: DroneBox::default(),
            spawn: SpawnConfig::default(),
            ts: DEFAULT_TS,
            stochastic: false,
            noise: NoiseConfig::default(),
            taus: StochasticConfig::default(),
            wrap_yaw: false,
            normalize_obs: false,
        }
    }
}

impl EnvConfig {
    pub fn stochastic() -> Self {
        Self {
            stochastic: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.gate.validate()?;
        self.drone.validate()?;
        self.spawn.validate(&self.world)?;
        self.noise.validate()?;
        self.taus.validate()?;
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(Error::InvalidParameter(format!("ts must be positive, got {}", self.ts)));
        }
        Ok(())
    }

    fn obs_scale(&self) -> [f64; OBS_DIM] {
        let w = &self.world;
        let span = |(lo, hi): (f64, f64)| f64::max(lo.abs(), hi.abs());
        [
            span(w.x_bounds),
            span(w.y_bounds),
            span(w.z_bounds),
            PI,
            w.vel_limits[0],
            w.vel_limits[1],
            w.vel_limits[2],
            w.vel_limits[3],
        ]
    }
}

/// Gym-style environment: `reset` then `step` until the outcome is not Running.
#[derive(Debug, Clone)]
pub struct GateEnv {
    cfg: EnvConfig,
    rng: Rng,
    state: VehicleState,
    lags: [AxisLag; AXES],
    taus: [f64; AXES],
    steps: u64,
    outcome: EpisodeOutcome,
    started: bool,
}

impl GateEnv {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let taus = lagsim::NOMINAL_TAUS;
        Ok(Self {
            lags: make_lags(taus, cfg.ts)?,
            cfg,
            rng: seeded_rng(seed),
            state: VehicleState::default(),
            taus,
            steps: 0,
            outcome: EpisodeOutcome::Running,
            started: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    /// Time constants in effect for the current episode.
    pub fn taus(&self) -> [f64; AXES] {
        self.taus
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn outcome(&self) -> EpisodeOutcome {
        self.outcome
    }

    /// Start a new episode from a random spawn.
    pub fn reset(&mut self) -> Observation {
        let start = self.cfg.spawn.sample(&mut self.rng);
        self.begin(start)
    }

    /// Start a new episode from an explicit state (velocities and previous
    /// command are zeroed).
    pub fn reset_to(&mut self, pos: [f64; 3], yaw: f64) -> Observation {
        self.begin(VehicleState::at_rest(pos, yaw))
    }

    fn begin(&mut self, start: VehicleState) -> Observation {
        let taus_cfg = StochasticConfig {
            enabled: self.cfg.stochastic,
            ..self.cfg.taus
        };
        self.taus = lagsim::sample_time_constants(&taus_cfg, &mut self.rng);
        self.lags = make_lags(self.taus, self.cfg.ts).expect("validated time constants");
        self.state = start;
        self.steps = 0;
        self.outcome = EpisodeOutcome::Running;
        self.started = true;
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        let mut obs = observe(&self.state, &GatePose::canonical());
        if self.cfg.normalize_obs {
            for (o, s) in obs.0.iter_mut().zip(self.cfg.obs_scale()) {
                *o /= s;
            }
        }
        obs
    }

    /// Apply a normalized action for one period.
    pub fn step(&mut self, action: [f64; ACTION_DIM]) -> Result<StepResult> {
        if !self.started {
            return Err(Error::Contract("step() called before reset()".into()));
        }
        if self.outcome.is_done() {
            return Err(Error::Contract(format!(
                "step() called after the episode ended ({})",
                self.outcome
            )));
        }
        let cmd = scale_action(action, &self.cfg.world)?;
        let silent;
        let noise = if self.cfg.stochastic {
            &self.cfg.noise
        } else {
            silent = NoiseConfig::silent();
            &silent
        };
        self.steps += 1;
        let mut next = lagsim::sim_step(&self.state, cmd, &self.lags, noise, self.steps, &mut self.rng)?;
        if self.cfg.wrap_yaw {
            next.yaw = wrap_angle(next.yaw);
        }
        self.state = next;

        let outcome = classify(&next, &self.cfg.world, &self.cfg.gate, &self.cfg.drone, self.steps);
        self.outcome = outcome;
        let reward = dense_reward(&next) + final_reward(outcome, &next, &self.cfg.world);
        Ok(StepResult {
            obs: self.observation(),
            reward,
            terminated: outcome.is_terminal(),
            truncated: outcome.is_truncated(),
            outcome,
        })
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}
