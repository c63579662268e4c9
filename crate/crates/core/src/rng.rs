//! Keyed, position-addressable pseudorandom streams.
//!
//! Every consumer derives its own ChaCha20 key from the 256-bit master seed
//! and a purpose tag. Value `i` of a stream depends only on `(seed, tag, i)`,
//! so rounds can be generated in any order or in parallel chunks.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MasterSeed(pub [u8; 32]);

impl MasterSeed {
    pub fn from_u64(v: u64) -> Self {
        let mut b = [0u8; 32];
        b[24..].copy_from_slice(&v.to_be_bytes());
        MasterSeed(b)
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for MasterSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MasterSeed({})", self.to_hex())
    }
}

impl fmt::Display for MasterSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for MasterSeed {
    type Err = Error;

    /// Parses up to 64 hex digits; shorter strings are left-padded with zeros.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches("0x");
        if s.is_empty() || s.len() > 64 || !s.bytes().all(|c| c.is_ascii_hexdigit()) {
            return Err(Error::param("seed", format!("expected up to 64 hex digits, got {s:?}")));
        }
        let padded = format!("{s:0>64}");
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&padded[2 * i..2 * i + 2], 16).expect("validated hex");
        }
        Ok(MasterSeed(out))
    }
}

/// A pseudorandom stream bound to one purpose.
pub struct KeyedStream {
    rng: ChaCha20Rng,
}

impl KeyedStream {
    pub fn new(seed: &MasterSeed, tag: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"subhash/stream/v1");
        h.update(seed.0);
        h.update((tag.len() as u64).to_le_bytes());
        h.update(tag.as_bytes());
        KeyedStream {
            rng: ChaCha20Rng::from_seed(h.finalize().into()),
        }
    }

    /// Stream positioned so that the next `u64` drawn is value number `index`.
    pub fn at(seed: &MasterSeed, tag: &str, index: u64) -> Self {
        let mut s = KeyedStream::new(seed, tag);
        s.rng.set_word_pos(2 * index as u128);
        s
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, n)` by a 128-bit multiply-high; one draw per call, bias
    /// at most `n / 2^64`.
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn bits(&mut self, len: usize) -> BitString {
        let words = (0..len.div_ceil(64)).map(|_| self.next_u64()).collect();
        BitString::from_words(words, len)
    }
}
