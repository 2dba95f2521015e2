//! The randomized environment: per-episode time constants, velocity noise and
//! pose drift, seen through the PD controller.

use gatepilot::gateworld::{EnvConfig, GateEnv};
use gatepilot::pilot::commands::{baseline, format_summary};
use gatepilot::pilot::{run_episode, PdController, PdGains};

fn main() -> gatepilot::error::Result<()> {
    let cfg = EnvConfig::stochastic();
    let mut env = GateEnv::new(cfg, 8)?;
    let mut pd = PdController::new(PdGains::default(), cfg.world)?;
    for _ in 0..5 {
        let r = run_episode(&mut env, &mut pd, false)?;
        let t = env.taus();
        println!(
            "taus ({:.3}, {:.3}, {:.3}, {:.3}) -> {} in {} steps, return {:.2}",
            t[0], t[1], t[2], t[3], r.outcome, r.steps, r.ret
        );
    }
    println!(
        "deterministic: {}",
        format_summary(&baseline(PdGains::default(), &EnvConfig::default(), 50, 2, None)?)
    );
    println!(
        "randomized:    {}",
        format_summary(&baseline(PdGains::default(), &cfg, 50, 2, None)?)
    );
    Ok(())
}
