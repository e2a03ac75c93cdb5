//! Seed derivation for reproducible, independent random streams.
//!
//! Every random quantity in the crate comes from a [`ChaCha8Rng`] whose seed is
//! a hash of a master seed and a list of tags (time step, stream name, trial
//! index, ...). Streams are therefore independent of how many other streams were
//! consumed before them: the measurement matrix of step `k` does not depend on
//! the horizon, and adding a policy to an experiment does not perturb the
//! others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// A hashable stream tag.
#[derive(Debug, Clone, Copy)]
pub enum Tag<'a> {
    Int(u64),
    Str(&'a str),
}

impl From<u64> for Tag<'_> {
    fn from(v: u64) -> Self {
        Tag::Int(v)
    }
}

impl From<usize> for Tag<'_> {
    fn from(v: usize) -> Self {
        Tag::Int(v as u64)
    }
}

impl<'a> From<&'a str> for Tag<'a> {
    fn from(v: &'a str) -> Self {
        Tag::Str(v)
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(state: u64, word: u64) -> u64 {
    splitmix64(state ^ splitmix64(word))
}

/// Hash a master seed and tags into a 64-bit child seed.
pub fn derive_seed(seed: u64, tags: &[Tag<'_>]) -> u64 {
    let mut h = splitmix64(seed);
    for tag in tags {
        h = match *tag {
            Tag::Int(v) => absorb(absorb(h, 0x01), v),
            Tag::Str(s) => {
                let mut acc = absorb(h, 0x02 ^ (s.len() as u64) << 8);
                for chunk in s.as_bytes().chunks(8) {
                    let mut buf = [0u8; 8];
                    buf[..chunk.len()].copy_from_slice(chunk);
                    acc = absorb(acc, u64::from_le_bytes(buf));
                }
                acc
            }
        };
    }
    h
}

/// A generator for the stream identified by `(seed, tags...)`.
pub fn substream(seed: u64, tags: &[Tag<'_>]) -> StreamRng {
    let child = derive_seed(seed, tags);
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(child.wrapping_add(i as u64)).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
