//! Record one episode of an untrained actor and of the PD controller as
//! trajectory CSVs, then check that the reward column sums to the return.

use gatepilot::gateworld::{EnvConfig, GateEnv};
use gatepilot::netcore::init_actor;
use gatepilot::pilot::metrics::write_trajectory;
use gatepilot::pilot::{run_episode, ActorPolicy, PdController, PdGains, Policy};
use gatepilot::seeded_rng;

fn record(name: &str, policy: &mut dyn Policy, cfg: EnvConfig) -> gatepilot::error::Result<()> {
    let mut env = GateEnv::new(cfg, 21)?;
    let result = run_episode(&mut env, policy, true)?;
    let path = std::env::temp_dir().join(format!("gatepilot_{name}.csv"));
    write_trajectory(&path, &result.trajectory)?;
    let summed: f64 = result.trajectory.iter().map(|r| r.reward).sum();
    println!(
        "{name}: {} in {} steps, return {:.4}, reward column {:.4} -> {}",
        result.outcome,
        result.steps,
        result.ret,
        summed,
        path.display()
    );
    Ok(())
}

fn main() -> gatepilot::error::Result<()> {
    let cfg = EnvConfig::default();
    record("untrained", &mut ActorPolicy::new(init_actor(&mut seeded_rng(4))), cfg)?;
    record("pd", &mut PdController::new(PdGains::default(), cfg.world)?, cfg)?;
    Ok(())
}
