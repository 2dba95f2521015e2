//! Discrete-time point-mass quadcopter dynamics.
//!
//! Each velocity channel (x, y, z, yaw rate) follows the commanded value
//! through a first-order lag `tau * dv/dt + v = v_cmd`, discretised with the
//! bilinear (Tustin) transform:
//!
//! ```text
//! v[k+1] = a * cmd[k+1] + a * cmd[k] + b * v[k]
//! a = Ts / (2 tau + Ts),  b = (2 tau - Ts) / (2 tau + Ts)
//! ```
//!
//! Pose is then advanced with a zero-order integrator `p[k+1] = p[k] + v[k+1] Ts`.
//! In stochastic mode clipped-normal noise is added to the velocities every
//! step and to the pose on a fixed cadence (twice a second at 50 Hz).

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Number of controlled channels: vx, vy, vz, yaw rate.
pub const AXES: usize = 4;

/// Default simulation period (50 Hz).
pub const DEFAULT_TS: f64 = 0.02;

/// Deterministic time constants for (x, y, z, yaw).
pub const NOMINAL_TAUS: [f64; AXES] = [0.4, 0.4, 0.1, 0.1];

/// Tustin-discretised first-order lag for one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisLag {
    tau: f64,
    ts: f64,
    a: f64,
    b: f64,
}

impl AxisLag {
    pub fn new(tau: f64, ts: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time constant must be positive, got {tau}"
            )));
        }
        if !(ts.is_finite() && ts > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample period must be positive, got {ts}"
            )));
        }
        let den = 2.0 * tau + ts;
        Ok(Self {
            tau,
            ts,
            a: ts / den,
            b: (2.0 * tau - ts) / den,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// Coefficient applied to both command samples.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Coefficient applied to the previous velocity.
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dc_gain(&self) -> f64 {
        2.0 * self.a / (1.0 - self.b)
    }

    /// One step of the two-sample recursion.
    #[inline]
    pub fn step(&self, v_prev: f64, cmd_prev: f64, cmd_new: f64) -> f64 {
        self.a * cmd_new + self.a * cmd_prev + self.b * v_prev
    }
}

/// Build the lag for all four channels from their time constants.
pub fn make_lags(taus: [f64; AXES], ts: f64) -> Result<[AxisLag; AXES]> {
    Ok([
        AxisLag::new(taus[0], ts)?,
        AxisLag::new(taus[1], ts)?,
        AxisLag::new(taus[2], ts)?,
        AxisLag::new(taus[3], ts)?,
    ])
}

/// Pose, rates and the previously applied command of the point-mass drone.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    /// Position in the world (ENU) frame, m.
    pub pos: [f64; 3],
    /// Heading, rad. Unwrapped unless the environment asks otherwise.
    pub yaw: f64,
    /// Velocity in the world frame, m/s.
    pub vel: [f64; 3],
    /// Yaw rate, rad/s.
    pub yaw_rate: f64,
    /// Last command (vx, vy, vz, yaw rate) fed to the lag recursion.
    pub prev_cmd: [f64; AXES],
}

impl VehicleState {
    /// Drone at rest at `pos` with heading `yaw`.
    pub fn at_rest(pos: [f64; 3], yaw: f64) -> Self {
        Self {
            pos,
            yaw,
            ..Self::default()
        }
    }

    /// (vx, vy, vz, yaw rate).
    pub fn rates(&self) -> [f64; AXES] {
        [self.vel[0], self.vel[1], self.vel[2], self.yaw_rate]
    }

    pub fn set_rates(&mut self, rates: [f64; AXES]) {
        self.vel = [rates[0], rates[1], rates[2]];
        self.yaw_rate = rates[3];
    }

    /// (x, y, z, yaw).
    pub fn pose(&self) -> [f64; AXES] {
        [self.pos[0], self.pos[1], self.pos[2], self.yaw]
    }

    pub fn set_pose(&mut self, pose: [f64; AXES]) {
        self.pos = [pose[0], pose[1], pose[2]];
        self.yaw = pose[3];
    }

    pub fn is_finite(&self) -> bool {
        self.pose()
            .iter()
            .chain(self.rates().iter())
            .chain(self.prev_cmd.iter())
            .all(|v| v.is_finite())
    }
}

/// Clipped-normal disturbance settings for velocity noise and pose drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub vel_sigma: [f64; AXES],
    pub vel_clip: [(f64, f64); AXES],
    pub pos_sigma: [f64; AXES],
    pub pos_clip: [(f64, f64); AXES],
    /// Steps between pose drifts; 25 at 50 Hz is twice a second.
    pub drift_interval_steps: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            vel_sigma: [0.05; AXES],
            vel_clip: [(-0.10, 0.10); AXES],
            pos_sigma: [0.05, 0.05, 0.05, 0.02],
            pos_clip: [(-0.15, 0.15), (-0.15, 0.15), (-0.15, 0.15), (-0.06, 0.06)],
            drift_interval_steps: 25,
        }
    }
}

impl NoiseConfig {
    /// All sigmas zero: every noise operation is the identity.
    pub fn silent() -> Self {
        Self {
            vel_sigma: [0.0; AXES],
            pos_sigma: [0.0; AXES],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = self.vel_sigma.iter().chain(self.pos_sigma.iter());
        for s in sigmas {
            if !(s.is_finite() && *s >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "noise sigma must be finite and >= 0, got {s}"
                )));
            }
        }
        for (lo, hi) in self.vel_clip.iter().chain(self.pos_clip.iter()) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "noise clip requires min < max, got ({lo}, {hi})"
                )));
            }
        }
        if self.drift_interval_steps == 0 {
            return Err(Error::InvalidParameter("drift_interval_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Bounds for per-episode time-constant randomisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticConfig {
    pub tau_xy_bounds: (f64, f64),
    pub tau_zyaw_bounds: (f64, f64),
    pub enabled: bool,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self {
            tau_xy_bounds: (0.35, 0.45),
            tau_zyaw_bounds: (0.08, 0.13),
            enabled: false,
        }
    }
}

impl StochasticConfig {
    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.tau_xy_bounds, self.tau_zyaw_bounds] {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "time-constant bounds require 0 < lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Draw from `N(0, sigma)` and clip into `[lo, hi]`. A zero sigma returns 0
/// without consuming randomness.
pub fn clipped_normal<R: rand::Rng + ?Sized>(rng: &mut R, sigma: f64, lo: f64, hi: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0f64.clamp(lo, hi);
    }
    let z: f64 = StandardNormal.sample(rng);
    (sigma * z).clamp(lo, hi)
}

pub fn integrate_pose(state: &VehicleState, ts: f64) -> VehicleState {
    let mut next = *state;
    for i in 0..3 {
        next.pos[i] += state.vel[i] * ts;
    }
    next.yaw += state.yaw_rate * ts;
    next
}

pub fn apply_velocity_noise<R: rand::Rng + ?Sized>(rates: [f64; AXES], cfg: &NoiseConfig, rng: &mut R) -> [f64; AXES] {
    let mut out = rates;
    for (i, v) in out.iter_mut().enumerate() {
        let (lo, hi) = cfg.vel_clip[i];
        *v += clipped_normal(rng, cfg.vel_sigma[i], lo, hi);
    }
    out
}

pub fn apply_position_drift<R: rand::Rng + ?Sized>(
    state: &VehicleState,
    cfg: &NoiseConfig,
    step_index: u64,
    rng: &mut R,
) -> VehicleState {
    if step_index % cfg.drift_interval_steps != 0 {
        return *state;
    }
    let mut pose = state.pose();
    for (i, p) in pose.iter_mut().enumerate() {
        let (lo, hi) = cfg.pos_clip[i];
        *p += clipped_normal(rng, cfg.pos_sigma[i], lo, hi);
    }
    let mut next = *state;
    next.set_pose(pose);
    next
}

/// Time constants (x, y, z, yaw) for one episode.
pub fn sample_time_constants<R: rand::Rng + ?Sized>(cfg: &StochasticConfig, rng: &mut R) -> [f64; AXES] {
    if !cfg.enabled {
        return NOMINAL_TAUS;
    }
    let (xy_lo, xy_hi) = cfg.tau_xy_bounds;
    let (z_lo, z_hi) = cfg.tau_zyaw_bounds;
    [
        rng.gen_range(xy_lo..=xy_hi),
        rng.gen_range(xy_lo..=xy_hi),
        rng.gen_range(z_lo..=z_hi),
        rng.gen_range(z_lo..=z_hi),
    ]
}

/// Advance the vehicle one period: lag response to `cmd`, velocity noise,
/// pose integration, then pose drift when `step_index` falls on the drift
/// cadence. The applied command is stored for the next recursion.
pub fn sim_step<R: rand::Rng + ?Sized>(
    state: &VehicleState,
    cmd: [f64; AXES],
    lags: &[AxisLag; AXES],
    noise: &NoiseConfig,
    step_index: u64,
    rng: &mut R,
) -> Result<VehicleState> {
    if !state.is_finite() {
        return Err(Error::InvalidState(format!("non-finite vehicle state {state:?}")));
    }
    if let Some(i) = cmd.iter().position(|c| !c.is_finite()) {
        return Err(Error::InvalidState(format!(
            "non-finite command component {i}: {}",
            cmd[i]
        )));
    }
    let prev = state.rates();
    let mut rates = [0.0; AXES];
    for i in 0..AXES {
        rates[i] = lags[i].step(prev[i], state.prev_cmd[i], cmd[i]);
    }
    let rates = apply_velocity_noise(rates, noise, rng);

    let mut next = *state;
    next.set_rates(rates);
    next.prev_cmd = cmd;
    let ts = lags[0].ts();
    let next = integrate_pose(&next, ts);
    Ok(apply_position_drift(&next, noise, step_index, rng))
}
