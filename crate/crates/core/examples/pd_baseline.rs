//! PD reference controller on the deterministic environment, from random
//! spawns and from spawns centered on the gate axis.

use gatepilot::gateworld::{EnvConfig, SpawnConfig};
use gatepilot::pilot::commands::{baseline, format_summary};
use gatepilot::pilot::PdGains;

fn main() -> gatepilot::error::Result<()> {
    let gains = PdGains::default();
    let env = EnvConfig::default();
    println!(
        "random spawns:   {}",
        format_summary(&baseline(gains, &env, 50, 1, None)?)
    );

    let mut centered = env;
    centered.spawn = SpawnConfig::fixed([-4.0, 0.0, 0.0], 0.0);
    println!(
        "centered spawns: {}",
        format_summary(&baseline(gains, &centered, 10, 1, None)?)
    );

    println!(
        "zero gains:      {}",
        format_summary(&baseline(PdGains::zero(), &env, 5, 1, None)?)
    );
    Ok(())
}
