//! Full forward throttle from a spawn on the gate axis, printing the reward
//! stream and the terminal bonus.

use gatepilot::gateworld::{EnvConfig, GateEnv, SpawnConfig};

fn main() -> gatepilot::error::Result<()> {
    let mut cfg = EnvConfig::default();
    cfg.spawn = SpawnConfig::fixed([-4.0, 0.0, 0.0], 0.0);
    let mut env = GateEnv::new(cfg, 0)?;
    env.reset();

    let mut ret = 0.0;
    loop {
        let r = env.step([1.0, 0.0, 0.0, 0.0])?;
        ret += r.reward;
        let s = env.state();
        if env.steps() % 25 == 0 || r.outcome.is_done() {
            println!(
                "step {:>4} x {:>7.3} vx {:>6.3} reward {:>10.5}",
                env.steps(),
                s.pos[0],
                s.vel[0],
                r.reward
            );
        }
        if r.outcome.is_done() {
            println!("{} after {} steps, return {ret:.4}", r.outcome, env.steps());
            return Ok(());
        }
    }
}
