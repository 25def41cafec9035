//! Keyed pseudorandom streams.
//!
//! Every random choice that must be reproducible from a key (challenge
//! circuits, verifier coin flips, device randomness) is drawn from a
//! ChaCha20 keystream. The ChaCha key is `SHA-256(tag ‖ len(label) ‖ label ‖ key)`,
//! so distinct labels give independent streams under the same key, and
//! block `i` of a stream is keystream block `i`.

use std::fmt;

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DOMAIN_TAG: &[u8] = b"certrand/prf/v1";

/// Size of one PRF output block in bytes.
pub const BLOCK_LEN: usize = 64;

/// A 32-byte secret or seed, serialized as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Key32(pub [u8; 32]);

impl Key32 {
    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::InvalidParameter(format!("bad hex key: {e}")))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|v: Vec<u8>| Error::LengthMismatch { expected: 32, actual: v.len() })?;
        Ok(Self(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Convenience for tests and examples: a key whose bytes are all `b`.
    pub fn filled(b: u8) -> Self {
        Self([b; 32])
    }
}

impl fmt::Debug for Key32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key32({})", self.to_hex())
    }
}

impl fmt::Display for Key32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Key32 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Key32 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Key32::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

fn stream_key(key: &Key32, label: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN_TAG);
    h.update((label.len() as u64).to_be_bytes());
    h.update(label);
    h.update(key.0);
    h.finalize().into()
}

/// A labelled counter-mode stream: `(key, label, counter)` determines one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrfStream {
    key: Key32,
    label: Vec<u8>,
    counter: u64,
    exhausted: bool,
}

impl PrfStream {
    pub fn new(key: Key32, label: impl AsRef<[u8]>) -> Self {
        Self::at(key, label, 0)
    }

    pub fn at(key: Key32, label: impl AsRef<[u8]>, counter: u64) -> Self {
        Self { key, label: label.as_ref().to_vec(), counter, exhausted: false }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Block at the current counter. Pure in `(key, label, counter)`.
    pub fn block(&self) -> Result<[u8; BLOCK_LEN]> {
        if self.exhausted {
            return Err(Error::CounterOverflow(String::from_utf8_lossy(&self.label).into_owned()));
        }
        Ok(prf_block(&self.key, &self.label, self.counter))
    }

    /// Returns the current block and advances the counter. Counters are never
    /// reused: once `u64::MAX` has been emitted the stream is exhausted.
    pub fn next_block(&mut self) -> Result<[u8; BLOCK_LEN]> {
        let out = self.block()?;
        match self.counter.checked_add(1) {
            Some(c) => self.counter = c,
            None => self.exhausted = true,
        }
        Ok(out)
    }
}

/// One 64-byte PRF block.
pub fn prf_block(key: &Key32, label: &[u8], counter: u64) -> [u8; BLOCK_LEN] {
    let mut rng = ChaCha20Rng::from_seed(stream_key(key, label));
    rng.set_word_pos(u128::from(counter) * 16);
    let mut out = [0u8; BLOCK_LEN];
    rng.fill_bytes(&mut out);
    out
}

/// First 32 bytes of a PRF block, used wherever a sub-key or seed is derived.
pub fn derive_key(key: &Key32, label: &[u8], counter: u64) -> Key32 {
    let block = prf_block(key, label, counter);
    let mut out = [0u8; 32];
    out.copy_from_slice(&block[..32]);
    Key32(out)
}

/// Sequential reader over a labelled stream; byte-for-byte the concatenation
/// of `prf_block(key, label, 0)`, `prf_block(key, label, 1)`, ...
#[derive(Clone, Debug)]
pub struct PrfRng(ChaCha20Rng);

impl PrfRng {
    pub fn new(key: &Key32, label: impl AsRef<[u8]>) -> Self {
        Self(ChaCha20Rng::from_seed(stream_key(key, label.as_ref())))
    }

    /// Independent sub-stream number `index` under `label`, for parallel
    /// Monte-Carlo loops.
    pub fn substream(key: &Key32, label: impl AsRef<[u8]>, index: u64) -> Self {
        let mut rng = Self::new(key, label);
        rng.0.set_stream(index);
        rng
    }

    /// Stream keyed by a small integer seed; for experiments and tests.
    pub fn from_u64(seed: u64, label: impl AsRef<[u8]>) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self::new(&Key32(key), label)
    }
}

impl RngCore for PrfRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

impl CryptoRng for PrfRng {}
