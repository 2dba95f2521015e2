//! Proportional-derivative reference controller.
//!
//! Commands `-kp * pose - kd * rate` per channel in gate-frame physical units,
//! then maps them onto the normalized action range with clipping.

use crate::error::{Error, Result};
use crate::gateworld::{normalize_command, Observation, WorldSpec, ACTION_DIM};
use crate::pilot::eval::Policy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    /// Proportional gains on (x, y, z, yaw).
    pub kp: [f64; ACTION_DIM],
    /// Derivative gains on (vx, vy, vz, yaw rate).
    pub kd: [f64; ACTION_DIM],
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp: [0.8; ACTION_DIM],
            kd: [0.2; ACTION_DIM],
        }
    }
}

impl PdGains {
    pub fn zero() -> Self {
        Self {
            kp: [0.0; ACTION_DIM],
            kd: [0.0; ACTION_DIM],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kp.iter().chain(&self.kd).any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter(format!("PD gains must be finite: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PdController {
    gains: PdGains,
    world: WorldSpec,
}

impl PdController {
    pub fn new(gains: PdGains, world: WorldSpec) -> Result<Self> {
        gains.validate()?;
        Ok(Self { gains, world })
    }

    /// Physical command before clipping.
    pub fn command(&self, obs: &Observation) -> [f64; ACTION_DIM] {
        let o = &obs.0;
        let mut cmd = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            cmd[i] = -self.gains.kp[i] * o[i] - self.gains.kd[i] * o[i + ACTION_DIM];
        }
        cmd
    }
}

impl Policy for PdController {
    fn act(&mut self, obs: &Observation) -> Result<[f64; ACTION_DIM]> {
        Ok(normalize_command(self.command(obs), &self.world))
    }
}
