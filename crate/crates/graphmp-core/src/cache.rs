//! Compressed edge cache: keep as many (possibly compressed) shard images in
//! memory as the budget allows.
//!
//! Five modes trade decompression work against disk reads:
//!
//! * mode 0 — no in-application caching (system page cache only)
//! * mode 1 — cache raw shard bytes
//! * mode 2 — fast compressor (snappy)
//! * mode 3 — balanced compressor (zlib level 1)
//! * mode 4 — high-ratio compressor (zlib level 3)
//!
//! Mode selection uses assumed compression ratios γ: the lowest mode whose
//! `S/γ` fits the budget wins; when none fits, mode 4 caches as much as
//! possible and the rest is read from disk.
//!
//! Admission is first-come-first-kept: a loaded shard enters the cache iff
//! it still fits, and nothing is evicted once resident (an optional LRU
//! policy exists for experimentation, off by default).

use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Cache strategy plus its assumed compression ratio γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CacheMode {
    /// Mode 0: rely on the OS page cache only.
    PageCacheOnly,
    /// Mode 1: uncompressed entries (γ = 1).
    Uncompressed,
    /// Mode 2: fast compressor, snappy class (γ = 2).
    Fast,
    /// Mode 3: balanced compressor, deflate level 1 class (γ = 4).
    Balanced,
    /// Mode 4: high-ratio compressor, deflate level 3 class (γ = 5).
    HighRatio,
}

impl CacheMode {
    pub const ALL: [CacheMode; 5] = [
        CacheMode::PageCacheOnly,
        CacheMode::Uncompressed,
        CacheMode::Fast,
        CacheMode::Balanced,
        CacheMode::HighRatio,
    ];

    pub fn index(self) -> u8 {
        match self {
            CacheMode::PageCacheOnly => 0,
            CacheMode::Uncompressed => 1,
            CacheMode::Fast => 2,
            CacheMode::Balanced => 3,
            CacheMode::HighRatio => 4,
        }
    }

    pub fn from_index(i: u8) -> Option<CacheMode> {
        CacheMode::ALL.get(i as usize).copied()
    }

    /// Assumed compression ratio γ used by mode selection. Mode 0 caches
    /// nothing and has no ratio.
    pub fn assumed_ratio(self) -> Option<u64> {
        match self {
            CacheMode::PageCacheOnly => None,
            CacheMode::Uncompressed => Some(1),
            CacheMode::Fast => Some(2),
            CacheMode::Balanced => Some(4),
            CacheMode::HighRatio => Some(5),
        }
    }
}

impl std::fmt::Display for CacheMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cache-{}", self.index())
    }
}

/// Picks the lowest mode whose assumed ratio fits `total_shard_bytes` into
/// `budget` (`S/γ <= C`); falls back to mode 4 when none fits.
pub fn select_mode(total_shard_bytes: u64, budget: u64) -> CacheMode {
    debug_assert!(total_shard_bytes > 0);
    for mode in [
        CacheMode::Uncompressed,
        CacheMode::Fast,
        CacheMode::Balanced,
        CacheMode::HighRatio,
    ] {
        let gamma = mode.assumed_ratio().unwrap();
        if total_shard_bytes as u128 <= budget as u128 * gamma as u128 {
            return mode;
        }
    }
    CacheMode::HighRatio
}

/// Compresses `raw` according to the mode's compressor binding.
pub fn compress(mode: CacheMode, raw: &[u8]) -> std::io::Result<Vec<u8>> {
    match mode {
        CacheMode::PageCacheOnly => Err(std::io::Error::other("mode 0 caches nothing")),
        CacheMode::Uncompressed => Ok(raw.to_vec()),
        CacheMode::Fast => snap::raw::Encoder::new()
            .compress_vec(raw)
            .map_err(std::io::Error::other),
        CacheMode::Balanced => deflate(raw, 1),
        CacheMode::HighRatio => deflate(raw, 3),
    }
}

/// Inverse of [`compress`]; `uncompressed_size` is a hint and sanity bound.
pub fn decompress(mode: CacheMode, payload: &[u8], uncompressed_size: u64) -> std::io::Result<Vec<u8>> {
    let out = match mode {
        CacheMode::PageCacheOnly => return Err(std::io::Error::other("mode 0 caches nothing")),
        CacheMode::Uncompressed => payload.to_vec(),
        CacheMode::Fast => snap::raw::Decoder::new()
            .decompress_vec(payload)
            .map_err(std::io::Error::other)?,
        CacheMode::Balanced | CacheMode::HighRatio => {
            let mut out = Vec::with_capacity(uncompressed_size as usize);
            flate2::read::ZlibDecoder::new(payload).read_to_end(&mut out)?;
            out
        }
    };
    if out.len() as u64 != uncompressed_size {
        return Err(std::io::Error::other(format!(
            "decompressed to {} bytes, expected {uncompressed_size}",
            out.len()
        )));
    }
    Ok(out)
}

fn deflate(raw: &[u8], level: u32) -> std::io::Result<Vec<u8>> {
    let mut enc = flate2::write::ZlibEncoder::new(Vec::new(), flate2::Compression::new(level));
    enc.write_all(raw)?;
    enc.finish()
}

/// A cached shard image: possibly compressed bytes plus its mode tag.
#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub shard_id: u32,
    pub payload: Box<[u8]>,
    pub mode: CacheMode,
    pub uncompressed_size: u64,
}

/// Point-in-time cache counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub integrity_warnings: u64,
    pub resident_bytes: u64,
    pub budget_bytes: u64,
}

impl CacheStats {
    /// Miss fraction of all accesses. Despite the name this is the fraction
    /// of reads the cache could NOT serve; 0 means fully cached.
    pub fn theta(&self) -> f64 {
        measure_theta(self)
    }
}

/// θ as the miss fraction: disk reads happen exactly on misses, so
/// `misses / (hits + misses)` is the fraction of shard loads that hit disk.
pub fn measure_theta(stats: &CacheStats) -> f64 {
    let total = stats.hits + stats.misses;
    if total == 0 {
        return 1.0;
    }
    stats.misses as f64 / total as f64
}

struct LruSlot {
    entry: CacheEntry,
    last_use: u64,
}

struct LruState {
    slots: Vec<Option<LruSlot>>,
    resident: u64,
    tick: u64,
}

enum CacheImpl {
    Disabled,
    /// First-come-first-kept; entries are immutable once admitted, so hits
    /// are wait-free reads.
    Fcfs {
        slots: Vec<OnceLock<CacheEntry>>,
        resident: AtomicU64,
    },
    Lru(Mutex<LruState>),
}

/// The per-run shard cache. `get` may be called from all workers
/// concurrently; `admit` is effectively serialized per shard ID because each
/// shard has exactly one processor per iteration.
pub struct ShardCache {
    mode: CacheMode,
    budget: u64,
    inner: CacheImpl,
    hits: AtomicU64,
    misses: AtomicU64,
    evictions: AtomicU64,
    integrity_warnings: AtomicU64,
}

impl ShardCache {
    pub fn new(mode: CacheMode, budget_bytes: u64, num_shards: u32, lru: bool) -> Self {
        let inner = match mode {
            CacheMode::PageCacheOnly => CacheImpl::Disabled,
            _ if lru => CacheImpl::Lru(Mutex::new(LruState {
                slots: (0..num_shards).map(|_| None).collect(),
                resident: 0,
                tick: 0,
            })),
            _ => CacheImpl::Fcfs {
                slots: (0..num_shards).map(|_| OnceLock::new()).collect(),
                resident: AtomicU64::new(0),
            },
        };
        ShardCache {
            mode,
            budget: budget_bytes,
            inner,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            evictions: AtomicU64::new(0),
            integrity_warnings: AtomicU64::new(0),
        }
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn budget_bytes(&self) -> u64 {
        self.budget
    }

    /// Returns the decompressed shard image on a hit. A corrupt entry is
    /// reported as a miss plus an integrity warning so the caller falls back
    /// to disk.
    pub fn get(&self, shard_id: u32) -> Option<Vec<u8>> {
        let entry_bytes = match &self.inner {
            CacheImpl::Disabled => None,
            CacheImpl::Fcfs { slots, .. } => slots[shard_id as usize].get().map(|e| {
                decompress(e.mode, &e.payload, e.uncompressed_size)
            }),
            CacheImpl::Lru(state) => {
                let mut state = state.lock().unwrap();
                state.tick += 1;
                let tick = state.tick;
                state.slots[shard_id as usize].as_mut().map(|slot| {
                    slot.last_use = tick;
                    decompress(slot.entry.mode, &slot.entry.payload, slot.entry.uncompressed_size)
                })
            }
        };
        match entry_bytes {
            Some(Ok(bytes)) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(bytes)
            }
            Some(Err(e)) => {
                log::warn!("cache entry for shard {shard_id} failed to decompress: {e}");
                self.integrity_warnings.fetch_add(1, Ordering::Relaxed);
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    /// Stores the raw shard image (compressing per mode) iff it fits the
    /// remaining budget. Returns whether the entry was admitted.
    pub fn admit(&self, shard_id: u32, raw: &[u8]) -> Result<bool> {
        let entry = match &self.inner {
            CacheImpl::Disabled => return Ok(false),
            _ => {
                let payload = compress(self.mode, raw).map_err(|e| {
                    Error::InvariantViolation(format!("compression failed: {e}"))
                })?;
                CacheEntry {
                    shard_id,
                    payload: payload.into_boxed_slice(),
                    mode: self.mode,
                    uncompressed_size: raw.len() as u64,
                }
            }
        };
        let size = entry.payload.len() as u64;
        match &self.inner {
            CacheImpl::Disabled => unreachable!(),
            CacheImpl::Fcfs { slots, resident } => {
                if slots[shard_id as usize].get().is_some() {
                    return Ok(true);
                }
                let mut current = resident.load(Ordering::Relaxed);
                loop {
                    if current + size > self.budget {
                        return Ok(false);
                    }
                    match resident.compare_exchange_weak(
                        current,
                        current + size,
                        Ordering::Relaxed,
                        Ordering::Relaxed,
                    ) {
                        Ok(_) => break,
                        Err(c) => current = c,
                    }
                }
                if slots[shard_id as usize].set(entry).is_err() {
                    // lost a race for the same shard; release the reservation
                    resident.fetch_sub(size, Ordering::Relaxed);
                }
                Ok(true)
            }
            CacheImpl::Lru(state) => {
                if size > self.budget {
                    return Ok(false);
                }
                let mut state = state.lock().unwrap();
                if state.slots[shard_id as usize].is_some() {
                    return Ok(true);
                }
                while state.resident + size > self.budget {
                    let victim = state
                        .slots
                        .iter()
                        .enumerate()
                        .filter_map(|(i, s)| s.as_ref().map(|s| (i, s.last_use)))
                        .min_by_key(|&(_, t)| t)
                        .map(|(i, _)| i);
                    match victim {
                        Some(i) => {
                            let slot = state.slots[i].take().unwrap();
                            state.resident -= slot.entry.payload.len() as u64;
                            self.evictions.fetch_add(1, Ordering::Relaxed);
                        }
                        None => return Ok(false),
                    }
                }
                state.tick += 1;
                let tick = state.tick;
                state.resident += size;
                state.slots[shard_id as usize] = Some(LruSlot {
                    entry,
                    last_use: tick,
                });
                Ok(true)
            }
        }
    }

    pub fn resident_bytes(&self) -> u64 {
        match &self.inner {
            CacheImpl::Disabled => 0,
            CacheImpl::Fcfs { resident, .. } => resident.load(Ordering::Relaxed),
            CacheImpl::Lru(state) => state.lock().unwrap().resident,
        }
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            evictions: self.evictions.load(Ordering::Relaxed),
            integrity_warnings: self.integrity_warnings.load(Ordering::Relaxed),
            resident_bytes: self.resident_bytes(),
            budget_bytes: self.budget,
        }
    }

    #[cfg(test)]
    fn inject_entry(&self, entry: CacheEntry) {
        if let CacheImpl::Fcfs { slots, .. } = &self.inner {
            let _ = slots[entry.shard_id as usize].set(entry);
        }
    }
}
