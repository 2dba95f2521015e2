//! Short TD3 training run in the deterministic environment, written to a run
//! directory, followed by a noise-free evaluation of the final actor.
//!
//! `cargo run --release --example train_td3 -- [steps] [out_dir]`

use std::path::PathBuf;

use gatepilot::pilot::commands::{eval, format_summary, train};
use gatepilot::pilot::RunConfig;

fn main() -> gatepilot::error::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GATEPILOT_LOG", "info")).init();
    let mut args = std::env::args().skip(1);
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("gatepilot_train"));

    let mut cfg = RunConfig::default();
    cfg.seed = 3;
    cfg.total_steps = steps;
    cfg.checkpoint_every = (steps / 4).max(1);

    let report = train(&cfg, &out)?;
    println!(
        "{} env steps, {} episodes, {} checkpoints in {}",
        report.env_steps,
        report.episodes,
        report.checkpoints.len() + 1,
        out.display()
    );
    let summary = eval(&report.final_checkpoint, &cfg.env, 10, cfg.seed, None)?;
    println!("{}", format_summary(&summary));
    Ok(())
}
