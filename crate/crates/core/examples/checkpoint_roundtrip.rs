//! Save a trainer checkpoint, load it back, and show how corruption is
//! reported.

use gatepilot::pilot::{Checkpoint, Role, RunConfig};
use gatepilot::td3core::Trainer;

fn main() -> gatepilot::error::Result<()> {
    let cfg = RunConfig::default();
    let trainer = Trainer::new(cfg.td3, cfg.seed)?;
    let ck = Checkpoint::from_trainer(&trainer, cfg.hash());

    let path = std::env::temp_dir().join("gatepilot_roundtrip.ckpt");
    ck.save(&path)?;
    let back = Checkpoint::load(&path)?;
    println!(
        "{} bytes, actor has {} parameters, identical after reload: {}",
        ck.to_bytes().len(),
        back.network(Role::Actor)?.param_count(),
        back.to_bytes() == ck.to_bytes()
    );

    let bytes = ck.to_bytes();
    let mut flipped = bytes.clone();
    flipped[1000] ^= 1;
    let mut versioned = bytes.clone();
    versioned[4] = 2;
    for (name, data) in [
        ("bit flip", &flipped[..]),
        ("truncated", &bytes[..bytes.len() / 3]),
        ("new version", &versioned[..]),
        ("not a checkpoint", b"hello world".as_slice()),
    ] {
        println!("{name}: {}", Checkpoint::from_bytes(data).unwrap_err());
    }
    Ok(())
}
