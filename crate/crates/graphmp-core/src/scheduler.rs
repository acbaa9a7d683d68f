//! Selective scheduling: skip shards whose edge sources are all inactive.
//!
//! One Bloom filter per shard records the distinct source vertex IDs of the
//! shard's edges. A shard is worth processing only when some active vertex
//! tests positive. The filter may fire spuriously (false positive, the shard
//! loads for nothing) but never misses a real active source, so results with
//! scheduling on equal results with scheduling off bit-exactly.
//!
//! Probing is gated globally: while the active-vertex ratio is above the
//! activation threshold nearly every shard has an active source, and probe
//! time would be wasted, so every shard is processed unconditionally.

use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::storage::{checksum64, read_file, write_file, SliceReader, FILTER_MAGIC, FORMAT_VERSION};

pub const DEFAULT_BITS_PER_KEY: f64 = 10.0;
pub const DEFAULT_HASH_COUNT: u32 = 7;
pub const DEFAULT_ACTIVATION_THRESHOLD: f64 = 0.001;

/// Fixed default hash seed; overridable for experimentation.
pub const DEFAULT_SEED: u64 = 0xa076_1d64_78bd_642f;

const MIN_BITS: u64 = 8;

/// Bloom filter over one shard's source vertex IDs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardFilter {
    pub shard_id: u32,
    bits: Vec<u8>,
    num_bits: u64,
    hash_count: u32,
    inserted: u64,
    seed: u64,
}

fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl ShardFilter {
    fn sized_for(shard_id: u32, keys: u64, bits_per_key: f64, hash_count: u32, seed: u64) -> Self {
        let num_bits = expected_bits(keys, bits_per_key);
        ShardFilter {
            shard_id,
            bits: vec![0; num_bits.div_ceil(8) as usize],
            num_bits,
            hash_count,
            inserted: keys,
            seed,
        }
    }

    /// Two independent hashes combined as `h1 + i * h2` (double hashing).
    fn probes(&self, key: VertexId) -> impl Iterator<Item = u64> + '_ {
        let h1 = mix64(key ^ self.seed);
        let h2 = mix64(key ^ self.seed.rotate_left(32) ^ 0x9e37_79b9_7f4a_7c15) | 1;
        (0..self.hash_count as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % self.num_bits)
    }

    fn insert(&mut self, key: VertexId) {
        let positions: Vec<u64> = self.probes(key).collect();
        for pos in positions {
            self.bits[(pos / 8) as usize] |= 1 << (pos % 8);
        }
    }

    /// Membership test: no false negatives for inserted keys.
    pub fn test(&self, key: VertexId) -> bool {
        if self.inserted == 0 {
            return false;
        }
        self.probes(key)
            .all(|pos| self.bits[(pos / 8) as usize] & (1 << (pos % 8)) != 0)
    }

    pub fn num_bits(&self) -> u64 {
        self.num_bits
    }

    pub fn hash_count(&self) -> u32 {
        self.hash_count
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Whether this filter was built with the given sizing parameters.
    pub fn matches_params(&self, bits_per_key: f64, hash_count: u32) -> bool {
        self.hash_count == hash_count && self.num_bits == expected_bits(self.inserted, bits_per_key)
    }
}

fn expected_bits(keys: u64, bits_per_key: f64) -> u64 {
    ((keys as f64 * bits_per_key).ceil() as u64).max(MIN_BITS)
}

/// Builds a filter from the distinct source IDs of `col`. Deterministic for
/// fixed parameters and seed.
pub fn build_filter(
    shard_id: u32,
    col: &[VertexId],
    bits_per_key: f64,
    hash_count: u32,
    seed: u64,
) -> ShardFilter {
    let mut sources = col.to_vec();
    sources.sort_unstable();
    sources.dedup();
    let mut filter = ShardFilter::sized_for(shard_id, sources.len() as u64, bits_per_key, hash_count, seed);
    for key in sources {
        filter.insert(key);
    }
    filter
}

/// Probes active vertices in order and short-circuits on the first positive;
/// the decision is identical to probing every active vertex.
pub fn any_active_in_filter(filter: &ShardFilter, active: &[VertexId]) -> bool {
    if filter.inserted == 0 {
        return false;
    }
    active.iter().any(|&v| filter.test(v))
}

/// The per-shard scheduling test: process when the global activation ratio
/// is above `threshold` (scheduling disabled region), otherwise only when
/// some active vertex may be one of the shard's sources.
pub fn should_process(
    filter: &ShardFilter,
    active: &[VertexId],
    active_ratio: f64,
    threshold: f64,
) -> bool {
    active_ratio > threshold || any_active_in_filter(filter, active)
}

/// `filter-<k>.bin`:
/// `[magic][version u16][m u64][k u32][inserted u64][bit payload][checksum u64]`
pub fn write_filter(filter: &ShardFilter, path: &Path) -> Result<u64> {
    let mut buf = Vec::with_capacity(30 + filter.bits.len());
    buf.extend_from_slice(&FILTER_MAGIC);
    buf.write_u16::<LittleEndian>(FORMAT_VERSION).unwrap();
    buf.write_u64::<LittleEndian>(filter.num_bits).unwrap();
    buf.write_u32::<LittleEndian>(filter.hash_count).unwrap();
    buf.write_u64::<LittleEndian>(filter.inserted).unwrap();
    buf.extend_from_slice(&filter.bits);
    let sum = checksum64(&buf);
    buf.write_u64::<LittleEndian>(sum).unwrap();
    write_file(path, &buf)?;
    Ok(buf.len() as u64)
}

pub fn read_filter(path: &Path, shard_id: u32, seed: u64) -> Result<ShardFilter> {
    let buf = read_file(path)?;
    if buf.len() < 8 {
        return Err(Error::UnexpectedEof {
            path: path.to_path_buf(),
        });
    }
    let body = &buf[..buf.len() - 8];
    let stored = u64::from_le_bytes(buf[buf.len() - 8..].try_into().unwrap());
    let computed = checksum64(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let mut r = SliceReader::new(body, path);
    r.magic(FILTER_MAGIC)?;
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let num_bits = r.u64()?;
    let hash_count = r.u32()?;
    let inserted = r.u64()?;
    let payload_len = num_bits.div_ceil(8) as usize;
    if body.len() != 26 + payload_len {
        return Err(Error::FormatViolation {
            path: path.to_path_buf(),
            detail: format!(
                "bit payload is {} bytes, expected {payload_len}",
                body.len().saturating_sub(26)
            ),
        });
    }
    if num_bits < MIN_BITS || hash_count == 0 {
        return Err(Error::FormatViolation {
            path: path.to_path_buf(),
            detail: "degenerate filter parameters".into(),
        });
    }
    Ok(ShardFilter {
        shard_id,
        bits: body[26..].to_vec(),
        num_bits,
        hash_count,
        inserted,
        seed,
    })
}
