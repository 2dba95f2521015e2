//! Parse a run configuration, print its canonical form and hash, and show
//! how unknown keys are reported.

use gatepilot::pilot::RunConfig;

const TEXT: &str = "\
# stochastic training run
seed = 11
env.stochastic = true
world.timeout_steps = 1500
td3.critic_lr = 3e-5
baseline.kp = 0.9, 0.9, 0.8, 0.8
";

fn main() -> gatepilot::error::Result<()> {
    let cfg = RunConfig::parse(TEXT)?;
    print!("{}", cfg.render());
    let hash: String = cfg.hash().iter().map(|b| format!("{b:02x}")).collect();
    println!("# sha256 {hash}");
    assert_eq!(RunConfig::parse(&cfg.render())?, cfg);

    match RunConfig::parse("seed = 1\ntd3.learning_rate = 1e-3\n") {
        Err(e) => println!("# rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
