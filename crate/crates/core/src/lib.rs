//! Point-mass quadcopter gate-racing simulator and a from-scratch TD3 trainer
//! for a neural velocity controller.
//!
//! The crate is organised bottom-up:
//!
//! - [`lagsim`]: discrete first-order velocity lag (Tustin), pose integration,
//!   clipped-normal disturbances and per-episode time-constant randomisation.
//! - [`gateworld`]: the episodic gate environment (bounds, gate/drone boxes,
//!   reward, observation frame, reset/step).
//! - [`netcore`]: dense MLPs with exact reverse-mode gradients and Adam.
//! - [`td3core`]: replay buffer, Ornstein-Uhlenbeck exploration and the TD3
//!   update loop.
//! - [`pilot`]: run configuration, checkpoints, metrics/trajectory CSV, the PD
//!   baseline and the command entry points used by the `gatepilot` binary.

pub mod error;
pub mod gateworld;
pub mod lagsim;
pub mod netcore;
pub mod pilot;
pub mod td3core;

pub use error::{Error, Result};

/// Random stream used everywhere in the crate. Seeded streams are
/// reproducible across platforms.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate's random stream from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Derive an independent child seed (for example one per environment or per
/// evaluation worker) from a parent seed and a stream index.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser over the combined words
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
