//! Digest-chain encoding of parameters and table-based decoding.
//!
//! Encoding a value at depth `k` hashes its channel at every level
//! `1..=k` along the binary refinement tree, producing a chain of `k`
//! SHA-256 digests. Each digest commits to the channel bounds and the
//! negotiated salt, so without the scheme the chain reveals nothing about
//! the value, while a holder of the scheme inverts the final digest through
//! a precomputed per-level table in O(1).
//!
//! The wire format for a round message is a big-endian `u32` record count
//! followed by one record per parameter in parameter order: a level byte
//! `k`, then `k` 32-byte digests from level 1 to level `k`.

use std::collections::HashMap;

use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::quantization::{
    channel_bounds, channel_of, midpoint_of, ChannelRef, QuantizationScheme,
};

/// Byte length of one channel digest.
pub const DIGEST_LEN: usize = 32;

/// One SHA-256 channel digest.
pub type Digest = [u8; DIGEST_LEN];

/// Computes the salted digest of one channel.
///
/// The preimage is the canonical 33-byte string
/// `level ‖ lower bound (f64, big-endian) ‖ salt ‖ upper bound (f64,
/// big-endian)`, making the digest deterministic for a fixed scheme and
/// distinct across levels, channels, and salts.
pub fn channel_digest(ch: &ChannelRef, scheme: &QuantizationScheme) -> Result<Digest> {
    let (lo, hi) = channel_bounds(ch, scheme)?;
    let mut hasher = Sha256::new();
    hasher.update([ch.level]);
    hasher.update(lo.to_be_bytes());
    hasher.update(scheme.salt());
    hasher.update(hi.to_be_bytes());
    Ok(hasher.finalize().into())
}

/// Digest chain identifying one parameter's channel path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashComb {
    level: u8,
    chain: Vec<Digest>,
}

impl HashComb {
    /// Assembles a comb, enforcing that the chain length equals the level.
    pub fn from_chain(chain: Vec<Digest>) -> Result<Self> {
        if chain.is_empty() || chain.len() > u8::MAX as usize {
            return Err(Error::MalformedWire(format!(
                "digest chain length {} outside [1, 255]",
                chain.len()
            )));
        }
        Ok(Self {
            level: chain.len() as u8,
            chain,
        })
    }

    /// Depth of the encoding (equals the chain length).
    pub fn level(&self) -> u8 {
        self.level
    }

    /// Digests from level 1 to `level`.
    pub fn chain(&self) -> &[Digest] {
        &self.chain
    }

    /// The finest-grained digest, which decoding looks up.
    pub fn final_digest(&self) -> &Digest {
        self.chain.last().expect("chain is never empty")
    }

    /// Serialized size in bytes: level byte plus the digests.
    pub fn wire_len(&self) -> usize {
        1 + self.chain.len() * DIGEST_LEN
    }
}

/// Encodes a value as the digest chain of its channels at levels `1..=level`.
///
/// The value must already lie inside the scheme range; callers quantizing
/// live model parameters clamp first (see
/// [`QuantizationScheme::clamp`]).
pub fn encode(w: f64, level: u8, scheme: &QuantizationScheme) -> Result<HashComb> {
    if level < 1 {
        return Err(Error::InvalidParameter(
            "encoding depth must be at least 1".into(),
        ));
    }
    let mut chain = Vec::with_capacity(level as usize);
    for l in 1..=level {
        let ch = channel_of(w, scheme, l)?;
        chain.push(channel_digest(&ch, scheme)?);
    }
    HashComb::from_chain(chain)
}

/// Inverse digest lookup for one level: digest → (channel index, midpoint).
#[derive(Debug, Clone)]
pub struct DigestTable {
    level: u8,
    entries: HashMap<Digest, (u32, f64)>,
}

impl DigestTable {
    /// Level this table inverts.
    pub fn level(&self) -> u8 {
        self.level
    }

    /// Number of entries (`2^level`).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Whether the table is empty (never true for a built table).
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Looks up a digest, returning the channel index and midpoint.
    pub fn get(&self, digest: &Digest) -> Option<(u32, f64)> {
        self.entries.get(digest).copied()
    }
}

/// Builds the inverse table for one level by hashing every channel.
///
/// A collision between two channel digests is fatal: at 256-bit width it
/// signals corruption rather than chance.
pub fn build_table(level: u8, scheme: &QuantizationScheme) -> Result<DigestTable> {
    if level < 1 || level > scheme.max_level() {
        return Err(Error::LevelTooDeep {
            level,
            max: scheme.max_level(),
        });
    }
    let count = scheme.channel_count(level);
    let mut entries = HashMap::with_capacity(count as usize);
    for index in 0..count {
        let ch = ChannelRef {
            level,
            index: index as u32,
        };
        let digest = channel_digest(&ch, scheme)?;
        let midpoint = midpoint_of(&ch, scheme)?;
        if entries.insert(digest, (ch.index, midpoint)).is_some() {
            return Err(Error::DigestCollision { level });
        }
    }
    Ok(DigestTable { level, entries })
}

/// Per-level set of inverse tables held by the aggregator.
#[derive(Debug, Clone, Default)]
pub struct DigestTableSet {
    tables: HashMap<u8, DigestTable>,
}

impl DigestTableSet {
    /// Builds tables for the given levels.
    pub fn for_levels(scheme: &QuantizationScheme, levels: &[u8]) -> Result<Self> {
        let mut tables = HashMap::new();
        for &level in levels {
            tables.entry(level).or_insert(build_table(level, scheme)?);
        }
        Ok(Self { tables })
    }

    /// Builds tables for every level `1..=max_level`, covering any sampled
    /// depth.
    pub fn full(scheme: &QuantizationScheme) -> Result<Self> {
        let levels: Vec<u8> = (1..=scheme.max_level()).collect();
        Self::for_levels(scheme, &levels)
    }

    /// Table for one level, if built.
    pub fn table(&self, level: u8) -> Option<&DigestTable> {
        self.tables.get(&level)
    }
}

/// Decodes a comb to the midpoint of its finest channel.
///
/// An unknown digest means the sender encoded under a different scheme
/// (salt, range, or depth) — a negotiation failure surfaced as an error.
pub fn decode(hc: &HashComb, tables: &DigestTableSet) -> Result<f64> {
    let table = tables.table(hc.level()).ok_or(Error::UnknownDigest {
        level: hc.level(),
    })?;
    let (_, midpoint) = table.get(hc.final_digest()).ok_or(Error::UnknownDigest {
        level: hc.level(),
    })?;
    Ok(midpoint)
}

/// Serializes combs in parameter order into one round message.
pub fn write_records(combs: &[HashComb]) -> Vec<u8> {
    let payload: usize = combs.iter().map(HashComb::wire_len).sum();
    let mut out = Vec::with_capacity(4 + payload);
    out.extend_from_slice(&(combs.len() as u32).to_be_bytes());
    for comb in combs {
        out.push(comb.level());
        for digest in comb.chain() {
            out.extend_from_slice(digest);
        }
    }
    out
}

/// Parses a round message back into combs, validating record structure.
pub fn read_records(bytes: &[u8]) -> Result<Vec<HashComb>> {
    if bytes.len() < 4 {
        return Err(Error::MalformedWire("missing record count".into()));
    }
    let count = u32::from_be_bytes(bytes[..4].try_into().expect("sliced to 4 bytes"));
    let mut combs = Vec::with_capacity(count as usize);
    let mut offset = 4usize;
    for record in 0..count {
        let Some(&level) = bytes.get(offset) else {
            return Err(Error::MalformedWire(format!(
                "record {record}: missing level byte"
            )));
        };
        if level == 0 {
            return Err(Error::MalformedWire(format!("record {record}: level 0")));
        }
        offset += 1;
        let chain_len = level as usize * DIGEST_LEN;
        let Some(chain_bytes) = bytes.get(offset..offset + chain_len) else {
            return Err(Error::MalformedWire(format!(
                "record {record}: truncated digest chain"
            )));
        };
        let chain = chain_bytes
            .chunks_exact(DIGEST_LEN)
            .map(|chunk| chunk.try_into().expect("chunked to digest length"))
            .collect();
        combs.push(HashComb::from_chain(chain)?);
        offset += chain_len;
    }
    if offset != bytes.len() {
        return Err(Error::MalformedWire(format!(
            "{} trailing bytes after {count} records",
            bytes.len() - offset
        )));
    }
    Ok(combs)
}
