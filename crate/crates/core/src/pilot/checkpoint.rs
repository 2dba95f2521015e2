//! Binary checkpoint format.
//!
//! ```text
//! magic "GPCK" | version u8 | env step u64 | config hash [u8; 32] | network count u8
//! per network:
//!   role u8 | layer count u32 | per layer: outputs u32, inputs u32, activation u8
//!   parameters f64 (weights row-major then biases, layer by layer)
//!   moments flag u8 [| adam t u64 | beta1, beta2, eps f64 | m f64 * P | v f64 * P]
//! crc32 u32 over every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::netcore::{Activation, AdamState, Layer, Mlp};
use crate::td3core::{Networks, OptimizerStates, Trainer};

pub const MAGIC: [u8; 4] = *b"GPCK";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Actor = 0,
    Critic1 = 1,
    Critic2 = 2,
    TargetActor = 3,
    TargetCritic1 = 4,
    TargetCritic2 = 5,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Actor,
        Role::Critic1,
        Role::Critic2,
        Role::TargetActor,
        Role::TargetCritic1,
        Role::TargetCritic2,
    ];

    fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEntry {
    pub role: Role,
    pub net: Mlp,
    pub moments: Option<AdamState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub env_steps: u64,
    pub config_hash: [u8; 32],
    pub networks: Vec<NetworkEntry>,
}

impl Checkpoint {
    /// Snapshot of all six networks and the three optimizer states.
    pub fn from_trainer(trainer: &Trainer, config_hash: [u8; 32]) -> Self {
        let n = &trainer.nets;
        let o = &trainer.opt;
        let entry = |role, net: &Mlp, moments: Option<&AdamState>| NetworkEntry {
            role,
            net: net.clone(),
            moments: moments.cloned(),
        };
        Self {
            env_steps: trainer.env_steps(),
            config_hash,
            networks: vec![
                entry(Role::Actor, &n.actor, Some(&o.actor)),
                entry(Role::Critic1, &n.critic1, Some(&o.critic1)),
                entry(Role::Critic2, &n.critic2, Some(&o.critic2)),
                entry(Role::TargetActor, &n.target_actor, None),
                entry(Role::TargetCritic1, &n.target_critic1, None),
                entry(Role::TargetCritic2, &n.target_critic2, None),
            ],
        }
    }

    pub fn actor_only(actor: &Mlp, env_steps: u64, config_hash: [u8; 32]) -> Self {
        Self {
            env_steps,
            config_hash,
            networks: vec![NetworkEntry {
                role: Role::Actor,
                net: actor.clone(),
                moments: None,
            }],
        }
    }

    pub fn entry(&self, role: Role) -> Option<&NetworkEntry> {
        self.networks.iter().find(|e| e.role == role)
    }

    pub fn network(&self, role: Role) -> Result<&Mlp> {
        self.entry(role)
            .map(|e| &e.net)
            .ok_or_else(|| Error::MalformedCheckpoint(format!("no {role:?} network stored")))
    }

    /// Rebuild the full network set; fails unless all six roles are present.
    pub fn networks(&self) -> Result<Networks> {
        Ok(Networks {
            actor: self.network(Role::Actor)?.clone(),
            critic1: self.network(Role::Critic1)?.clone(),
            critic2: self.network(Role::Critic2)?.clone(),
            target_actor: self.network(Role::TargetActor)?.clone(),
            target_critic1: self.network(Role::TargetCritic1)?.clone(),
            target_critic2: self.network(Role::TargetCritic2)?.clone(),
        })
    }

    pub fn optimizer_states(&self) -> Result<OptimizerStates> {
        let get = |role| {
            self.entry(role)
                .and_then(|e| e.moments.clone())
                .ok_or_else(|| Error::MalformedCheckpoint(format!("no optimizer moments for {role:?}")))
        };
        Ok(OptimizerStates {
            actor: get(Role::Actor)?,
            critic1: get(Role::Critic1)?,
            critic2: get(Role::Critic2)?,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.env_steps.to_le_bytes());
        out.extend_from_slice(&self.config_hash);
        out.push(self.networks.len() as u8);
        for e in &self.networks {
            out.push(e.role as u8);
            out.extend_from_slice(&(e.net.layers().len() as u32).to_le_bytes());
            for l in e.net.layers() {
                out.extend_from_slice(&(l.outputs() as u32).to_le_bytes());
                out.extend_from_slice(&(l.inputs() as u32).to_le_bytes());
                out.push(l.activation().tag());
            }
            put_f64s(&mut out, &e.net.flat_params());
            match &e.moments {
                None => out.push(0),
                Some(m) => {
                    out.push(1);
                    out.extend_from_slice(&m.t.to_le_bytes());
                    put_f64s(&mut out, &[m.beta1, m.beta2, m.eps]);
                    put_f64s(&mut out, &m.m);
                    put_f64s(&mut out, &m.v);
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::BadMagic);
        }
        match bytes.get(MAGIC.len()) {
            Some(&VERSION) => {}
            Some(&found) => {
                return Err(Error::UnsupportedVersion {
                    found,
                    expected: VERSION,
                })
            }
            None => return Err(Error::MalformedCheckpoint("missing version byte".into())),
        }
        if bytes.len() < MAGIC.len() + 1 + 4 {
            return Err(Error::MalformedCheckpoint("file too short".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }

        let mut r = Reader {
            buf: body,
            pos: MAGIC.len() + 1,
        };
        let env_steps = r.u64()?;
        let config_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let count = r.u8()?;
        let mut networks = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let tag = r.u8()?;
            let role =
                Role::from_tag(tag).ok_or_else(|| Error::MalformedCheckpoint(format!("unknown role tag {tag}")))?;
            if networks.iter().any(|e: &NetworkEntry| e.role == role) {
                return Err(Error::MalformedCheckpoint(format!("duplicate {role:?} network")));
            }
            let n_layers = r.u32()? as usize;
            let mut shapes = Vec::with_capacity(n_layers.min(64));
            for _ in 0..n_layers {
                let outputs = r.u32()? as usize;
                let inputs = r.u32()? as usize;
                let tag = r.u8()?;
                let act = Activation::from_tag(tag)
                    .ok_or_else(|| Error::MalformedCheckpoint(format!("unknown activation tag {tag}")))?;
                shapes.push((inputs, outputs, act));
            }
            let mut layers = Vec::with_capacity(n_layers);
            for &(inputs, outputs, act) in &shapes {
                let weights = r.f64s(inputs.checked_mul(outputs).ok_or_else(overflow)?)?;
                let biases = r.f64s(outputs)?;
                layers.push(Layer::from_parts(inputs, outputs, weights, biases, act).map_err(malformed)?);
            }
            let net = Mlp::new(layers).map_err(malformed)?;
            let moments = match r.u8()? {
                0 => None,
                1 => {
                    let t = r.u64()?;
                    let h = r.f64s(3)?;
                    let p = net.param_count();
                    Some(AdamState {
                        t,
                        beta1: h[0],
                        beta2: h[1],
                        eps: h[2],
                        m: r.f64s(p)?,
                        v: r.f64s(p)?,
                    })
                }
                f => return Err(Error::MalformedCheckpoint(format!("bad moments flag {f}"))),
            };
            networks.push(NetworkEntry { role, net, moments });
        }
        if r.pos != body.len() {
            return Err(Error::MalformedCheckpoint(format!(
                "{} trailing bytes after last network",
                body.len() - r.pos
            )));
        }
        Ok(Self {
            env_steps,
            config_hash,
            networks,
        })
    }

    /// Write atomically: the target is replaced only once the full file is on disk.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    out.reserve(xs.len() * 8);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn malformed(e: Error) -> Error {
    Error::MalformedCheckpoint(e.to_string())
}

fn overflow() -> Error {
    Error::MalformedCheckpoint("layer size overflow".into())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::MalformedCheckpoint(format!("unexpected end of data at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(overflow)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::td3core::Td3Config;

    fn sample() -> Checkpoint {
        let trainer = Trainer::new(Td3Config::default(), 5).unwrap();
        Checkpoint::from_trainer(&trainer, [7; 32])
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        let a = ck.network(Role::Actor).unwrap().flat_params();
        let b = back.network(Role::Actor).unwrap().flat_params();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(back.networks().unwrap(), ck.networks().unwrap());
        assert_eq!(back.optimizer_states().unwrap(), ck.optimizer_states().unwrap());
    }

    #[test]
    fn distinct_errors_for_each_corruption() {
        let bytes = sample().to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::BadMagic)));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bad),
            Err(Error::UnsupportedVersion { found: 9, expected: 1 })
        ));

        let mut bad = bytes.clone();
        bad[200] ^= 0x10;
        assert!(matches!(
            Checkpoint::from_bytes(&bad),
            Err(Error::ChecksumMismatch { .. })
        ));

        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() / 2]),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn structurally_bad_payload_with_valid_crc_is_malformed() {
        let mut body = MAGIC.to_vec();
        body.push(VERSION);
        body.extend_from_slice(&0u64.to_le_bytes());
        body.extend_from_slice(&[0; 32]);
        body.push(1);
        body.push(42);
        let crc = crc32fast::hash(&body);
        body.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&body),
            Err(Error::MalformedCheckpoint(_))
        ));
    }
}
