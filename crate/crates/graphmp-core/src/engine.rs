//! The vertex-centric sliding-window executor.
//!
//! Two full vertex arrays stay in memory for the whole run: `SrcVertexArray`
//! holds the previous iteration's values (read-only during an iteration) and
//! `DstVertexArray` receives updates. Edge shards stream from disk (or the
//! edge cache) and each shard is processed by exactly one worker. Because a
//! shard owns all in-edges of its vertex interval, every `dst` slot has a
//! single writer per iteration — no locks or atomics guard vertex data; the
//! shard queue is the only synchronized structure.
//!
//! At the iteration barrier the arrays swap, the active set becomes the set
//! of vertices whose value changed, and the loop continues while any vertex
//! is active (up to `max_iterations`). Vertices are written to disk only at
//! the end of the program.
//!
//! Determinism: updates accumulate over in-neighbors in ascending source
//! order (fixed by storage order) and write ranges are disjoint, so final
//! values are bit-identical for any worker count and any shard processing
//! order.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cache::{select_mode, CacheMode, CacheStats, ShardCache};
use crate::error::{Error, Result};
use crate::graph::{validate_meta, DegreeTable, Interval, VertexId};
use crate::scheduler::{
    self, build_filter, should_process, ShardFilter, DEFAULT_ACTIVATION_THRESHOLD,
    DEFAULT_BITS_PER_KEY, DEFAULT_HASH_COUNT, DEFAULT_SEED,
};
use crate::storage::{parse_shard_bytes, Dataset, ShardCsr};

/// A fixed-width per-vertex value slot (8 bytes on disk).
pub trait Slot: Copy + PartialEq + Send + Sync + Display + 'static {
    fn to_slot_bits(self) -> u64;
    fn from_slot_bits(bits: u64) -> Self;
}

impl Slot for f64 {
    fn to_slot_bits(self) -> u64 {
        self.to_bits()
    }

    fn from_slot_bits(bits: u64) -> Self {
        f64::from_bits(bits)
    }
}

impl Slot for u64 {
    fn to_slot_bits(self) -> u64 {
        self
    }

    fn from_slot_bits(bits: u64) -> Self {
        bits
    }
}

/// Read-only graph facts available to a vertex program.
pub struct ProgramContext<'a> {
    pub num_vertices: u64,
    pub degrees: &'a DegreeTable,
    pub weighted: bool,
}

/// The in-adjacency of one vertex as stored in its shard: ascending source
/// IDs plus parallel weights when the graph is weighted.
#[derive(Debug, Clone, Copy)]
pub struct InEdges<'a> {
    pub sources: &'a [VertexId],
    pub weights: Option<&'a [f64]>,
}

impl InEdges<'_> {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Weight of the i-th in-edge; 1 for unweighted graphs.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }
}

/// A vertex-centric program: `init` seeds both vertex arrays and the active
/// set; `update` pulls in-neighbor values from the previous iteration's
/// array and returns the vertex's new value plus whether it changed.
///
/// `update` must read only `src_values` and the shard data it is handed —
/// never the destination array (pull model).
pub trait VertexProgram: Sync {
    type Value: Slot;

    fn init(
        &self,
        src_values: &mut [Self::Value],
        dst_values: &mut [Self::Value],
        active: &mut [bool],
        ctx: &ProgramContext<'_>,
    );

    fn update(
        &self,
        vertex: VertexId,
        in_edges: InEdges<'_>,
        src_values: &[Self::Value],
        ctx: &ProgramContext<'_>,
    ) -> Result<(Self::Value, bool)>;

    /// Preflight check that the dataset suits the program.
    fn check(&self, _ctx: &ProgramContext<'_>) -> Result<()> {
        Ok(())
    }

    /// Renders a value for text dumps.
    fn format_value(&self, value: &Self::Value) -> String {
        value.to_string()
    }
}

/// Resident vertex state of a run.
pub struct VertexState<V> {
    pub src_values: Vec<V>,
    pub dst_values: Vec<V>,
    /// Vertices whose value changed in the last completed iteration.
    pub active: Vec<bool>,
    pub active_count: u64,
    /// Per-vertex change flags of the iteration in flight.
    changed: Vec<bool>,
}

impl<V: Slot> VertexState<V> {
    pub fn new(num_vertices: u64) -> Self {
        let n = num_vertices as usize;
        let zero = V::from_slot_bits(0);
        VertexState {
            src_values: vec![zero; n],
            dst_values: vec![zero; n],
            active: vec![false; n],
            active_count: 0,
            changed: vec![false; n],
        }
    }

    pub fn num_vertices(&self) -> u64 {
        self.src_values.len() as u64
    }

    fn recount_active(&mut self) {
        self.active_count = self.active.iter().filter(|&&a| a).count() as u64;
    }
}

/// Barrier step: the active set becomes this iteration's change flags, the
/// vertex arrays swap so `dst` feeds the next iteration, and the activation
/// ratio is returned.
pub fn swap_and_tally<V: Slot>(state: &mut VertexState<V>) -> f64 {
    std::mem::swap(&mut state.active, &mut state.changed);
    std::mem::swap(&mut state.src_values, &mut state.dst_values);
    state.recount_active();
    state.active_count as f64 / state.num_vertices() as f64
}

/// One line of the metrics file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterationStats {
    pub iteration: u32,
    /// Activation ratio produced by this iteration.
    pub active_ratio: f64,
    pub shards_loaded: u64,
    pub shards_skipped: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub bytes_read_disk: u64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheSelection {
    /// Pick the mode from total shard bytes and the budget.
    Auto,
    Fixed(CacheMode),
}

#[derive(Debug, Clone)]
pub struct EngineOptions {
    /// Worker threads; 0 means one per logical core.
    pub workers: usize,
    pub max_iterations: u32,
    pub selective: bool,
    pub activation_threshold: f64,
    pub cache: CacheSelection,
    /// Cache budget in bytes; `None` derives one from machine memory.
    pub cache_budget: Option<u64>,
    pub bits_per_key: f64,
    pub hash_count: u32,
    pub seed: u64,
    /// Line-delimited per-iteration stats are appended here when set.
    pub metrics_path: Option<PathBuf>,
    /// Experimental LRU admission instead of first-come-first-kept.
    pub lru_cache: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            workers: 0,
            max_iterations: 200,
            selective: true,
            activation_threshold: DEFAULT_ACTIVATION_THRESHOLD,
            cache: CacheSelection::Auto,
            cache_budget: None,
            bits_per_key: DEFAULT_BITS_PER_KEY,
            hash_count: DEFAULT_HASH_COUNT,
            seed: DEFAULT_SEED,
            metrics_path: None,
            lru_cache: false,
        }
    }
}

impl EngineOptions {
    fn effective_workers(&self) -> usize {
        if self.workers > 0 {
            return self.workers;
        }
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }
}

pub struct RunOutcome<V> {
    pub values: Vec<V>,
    pub iterations: Vec<IterationStats>,
    pub cache_mode: CacheMode,
    pub cache_stats: CacheStats,
}

/// Total physical memory in bytes, if discoverable.
fn total_machine_memory() -> Option<u64> {
    let meminfo = fs::read_to_string("/proc/meminfo").ok()?;
    for line in meminfo.lines() {
        if let Some(rest) = line.strip_prefix("MemTotal:") {
            let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}

/// Default cache budget: machine memory minus the estimated resident set of
/// vertex arrays, filters and per-worker shard buffers, with a 0.9 safety
/// factor.
fn default_cache_budget(
    num_vertices: u64,
    num_edges: u64,
    max_shard_bytes: u64,
    workers: usize,
    bits_per_key: f64,
) -> u64 {
    let total = total_machine_memory().unwrap_or(8 << 30);
    let vertex_arrays = 2 * 8 * num_vertices + 2 * num_vertices;
    let filters = (num_edges as f64 * bits_per_key / 8.0) as u64;
    let buffers = workers as u64 * max_shard_bytes;
    let reserved = vertex_arrays + filters + buffers;
    ((total.saturating_sub(reserved)) as f64 * 0.9) as u64
}

/// Applies `program.update` to every vertex of the shard's interval,
/// writing results (or carrying over unchanged source values) into the
/// interval's slice of the destination array. Returns the number of updated
/// vertices. No slot outside the slice is touched.
pub fn process_shard<P: VertexProgram>(
    shard: &ShardCsr,
    program: &P,
    ctx: &ProgramContext<'_>,
    src_values: &[P::Value],
    dst_slice: &mut [P::Value],
    changed_slice: &mut [bool],
) -> Result<u64> {
    let rows = shard.header.num_rows();
    if dst_slice.len() as u64 != rows || changed_slice.len() as u64 != rows {
        return Err(Error::InvariantViolation(format!(
            "shard {} interval does not match its write slice",
            shard.header.shard_id
        )));
    }
    if shard.header.end_vertex >= ctx.num_vertices {
        return Err(Error::InvariantViolation(format!(
            "shard {} interval exceeds vertex count",
            shard.header.shard_id
        )));
    }
    let start = shard.header.start_vertex;
    let mut updates = 0u64;
    for local in 0..rows as usize {
        let vertex = start + local as u64;
        let range = shard.row_range(local as u64);
        let in_edges = InEdges {
            sources: &shard.col[range.clone()],
            weights: shard.val.as_deref().map(|v| &v[range]),
        };
        let (value, did_change) = program.update(vertex, in_edges, src_values, ctx)?;
        dst_slice[local] = if did_change {
            value
        } else {
            src_values[vertex as usize]
        };
        changed_slice[local] = did_change;
        updates += did_change as u64;
    }
    Ok(updates)
}

/// Splits a full-length vertex array into per-shard interval slices.
fn partition_by_intervals<'a, T>(
    mut rest: &'a mut [T],
    intervals: &[Interval],
) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(intervals.len());
    for iv in intervals {
        let (head, tail) = rest.split_at_mut(iv.len() as usize);
        out.push(head);
        rest = tail;
    }
    debug_assert!(rest.is_empty());
    out
}

struct WorkItem<'a, V> {
    shard: usize,
    dst: &'a mut [V],
    changed: &'a mut [bool],
}

#[derive(Default)]
struct IterationCounters {
    loaded: AtomicU64,
    skipped: AtomicU64,
    bytes_read_disk: AtomicU64,
}

/// Executes the program to convergence (empty active set) or until the
/// iteration cap. Iteration 1 is always a full pass: it fills the edge cache
/// and builds the per-shard Bloom filters; selective scheduling takes effect
/// from iteration 2.
pub fn run<P: VertexProgram>(
    dataset: &Dataset,
    program: &P,
    options: &EngineOptions,
) -> Result<RunOutcome<P::Value>> {
    let meta = &dataset.meta;
    if let Err(v) = validate_meta(meta) {
        return Err(Error::InvariantViolation(format!("invalid metadata: {v}")));
    }
    let num_vertices = meta.num_vertices;
    let num_shards = meta.num_shards as usize;
    let ctx = ProgramContext {
        num_vertices,
        degrees: &dataset.degrees,
        weighted: meta.weighted,
    };
    program.check(&ctx)?;

    let shard_sizes = dataset.shard_file_sizes()?;
    let total_shard_bytes: u64 = shard_sizes.iter().sum();
    let workers = options.effective_workers();

    let budget = options.cache_budget.unwrap_or_else(|| {
        default_cache_budget(
            num_vertices,
            meta.num_edges,
            shard_sizes.iter().copied().max().unwrap_or(0),
            workers,
            options.bits_per_key,
        )
    });
    let cache_mode = match options.cache {
        CacheSelection::Fixed(mode) => mode,
        CacheSelection::Auto => select_mode(total_shard_bytes.max(1), budget),
    };
    let cache = ShardCache::new(cache_mode, budget, meta.num_shards, options.lru_cache);

    // Persisted filters are reused only when built with the same parameters
    // and the default seed; anything else is rebuilt during iteration 1.
    let filters: Vec<OnceLock<ShardFilter>> =
        (0..num_shards).map(|_| OnceLock::new()).collect();
    if options.selective && options.seed == DEFAULT_SEED {
        for (k, slot) in filters.iter().enumerate() {
            let path = dataset.filter_path(k as u32);
            if !path.exists() {
                continue;
            }
            match scheduler::read_filter(&path, k as u32, options.seed) {
                Ok(f) if f.matches_params(options.bits_per_key, options.hash_count) => {
                    let _ = slot.set(f);
                }
                Ok(_) => {}
                Err(e) => log::warn!("ignoring unreadable filter {}: {e}", path.display()),
            }
        }
    }

    let mut metrics = match &options.metrics_path {
        Some(path) => Some(File::create(path).map_err(|e| Error::io(path, e))?),
        None => None,
    };

    let mut state = VertexState::<P::Value>::new(num_vertices);
    program.init(
        &mut state.src_values,
        &mut state.dst_values,
        &mut state.active,
        &ctx,
    );
    state.recount_active();

    let mut iterations: Vec<IterationStats> = Vec::new();
    let mut prev_hits = 0u64;
    let mut prev_misses = 0u64;

    for iteration in 1..=options.max_iterations {
        if state.active_count == 0 {
            break;
        }
        let started = Instant::now();
        let gating_ratio = state.active_count as f64 / num_vertices as f64;
        let full_pass =
            iteration == 1 || !options.selective || gating_ratio > options.activation_threshold;
        let active_list: Vec<VertexId> = if full_pass {
            Vec::new()
        } else {
            state
                .active
                .iter()
                .enumerate()
                .filter_map(|(v, &a)| a.then_some(v as u64))
                .collect()
        };

        let counters = IterationCounters::default();
        let first_error: Mutex<Option<Error>> = Mutex::new(None);
        let abort = AtomicBool::new(false);

        let src_values = &state.src_values;
        let dst_parts = partition_by_intervals(&mut state.dst_values, &meta.intervals);
        let changed_parts = partition_by_intervals(&mut state.changed, &meta.intervals);

        let (tx, rx) = crossbeam_channel::unbounded::<WorkItem<'_, P::Value>>();
        for ((shard, dst), changed) in dst_parts.into_iter().enumerate().zip(changed_parts) {
            tx.send(WorkItem {
                shard,
                dst,
                changed,
            })
            .expect("queue open");
        }
        drop(tx);

        std::thread::scope(|scope| {
            for _ in 0..workers.min(num_shards.max(1)) {
                scope.spawn(|| {
                    while let Ok(item) = rx.recv() {
                        if abort.load(Ordering::Relaxed) {
                            continue;
                        }
                        let res = run_shard_task(
                            item,
                            dataset,
                            program,
                            &ctx,
                            src_values,
                            &cache,
                            &filters,
                            &counters,
                            options,
                            iteration,
                            full_pass,
                            &active_list,
                        );
                        if let Err(e) = res {
                            abort.store(true, Ordering::Relaxed);
                            first_error.lock().unwrap().get_or_insert(e);
                        }
                    }
                });
            }
        });

        drop(rx);
        if let Some(e) = first_error.into_inner().unwrap() {
            return Err(e);
        }

        let totals = cache.stats();
        let (cache_hits, cache_misses) = (totals.hits - prev_hits, totals.misses - prev_misses);
        (prev_hits, prev_misses) = (totals.hits, totals.misses);
        let active_ratio = swap_and_tally(&mut state);
        let stats = IterationStats {
            iteration,
            active_ratio,
            shards_loaded: counters.loaded.load(Ordering::Relaxed),
            shards_skipped: counters.skipped.load(Ordering::Relaxed),
            cache_hits,
            cache_misses,
            bytes_read_disk: counters.bytes_read_disk.load(Ordering::Relaxed),
            wall_time: started.elapsed().as_secs_f64(),
        };
        if let Some(out) = metrics.as_mut() {
            write_metrics_line(out, &stats, options.metrics_path.as_ref().unwrap())?;
        }
        iterations.push(stats);
    }

    Ok(RunOutcome {
        values: state.src_values,
        iterations,
        cache_mode,
        cache_stats: cache.stats(),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_shard_task<P: VertexProgram>(
    item: WorkItem<'_, P::Value>,
    dataset: &Dataset,
    program: &P,
    ctx: &ProgramContext<'_>,
    src_values: &[P::Value],
    cache: &ShardCache,
    filters: &[OnceLock<ShardFilter>],
    counters: &IterationCounters,
    options: &EngineOptions,
    iteration: u32,
    full_pass: bool,
    active_list: &[VertexId],
) -> Result<()> {
    let k = item.shard;
    let interval = dataset.meta.intervals[k];

    let process = full_pass
        || match filters[k].get() {
            Some(filter) => should_process(
                filter,
                active_list,
                0.0, // the ratio gate was already applied via full_pass
                options.activation_threshold,
            ),
            // no filter yet (e.g. scheduling enabled mid-dataset): stay safe
            None => true,
        };

    if !process {
        counters.skipped.fetch_add(1, Ordering::Relaxed);
        // carry the interval over so dst still mirrors src at the barrier
        item.dst
            .copy_from_slice(&src_values[interval.start as usize..=interval.end as usize]);
        item.changed.fill(false);
        return Ok(());
    }

    counters.loaded.fetch_add(1, Ordering::Relaxed);
    let path = dataset.shard_path(k as u32);
    let bytes = match cache.get(k as u32) {
        Some(bytes) => bytes,
        None => {
            let bytes = crate::storage::read_file(&path)?;
            counters
                .bytes_read_disk
                .fetch_add(bytes.len() as u64, Ordering::Relaxed);
            cache.admit(k as u32, &bytes)?;
            bytes
        }
    };
    let shard = parse_shard_bytes(&bytes, &path)?;
    if shard.header.interval() != interval || shard.header.shard_id != k as u32 {
        return Err(Error::InvariantViolation(format!(
            "shard file {} does not match metadata interval",
            path.display()
        )));
    }

    if options.selective && iteration == 1 && filters[k].get().is_none() {
        let filter = build_filter(
            k as u32,
            &shard.col,
            options.bits_per_key,
            options.hash_count,
            options.seed,
        );
        scheduler::write_filter(&filter, &dataset.filter_path(k as u32))?;
        let _ = filters[k].set(filter);
    }

    process_shard(&shard, program, ctx, src_values, item.dst, item.changed)?;
    Ok(())
}

fn write_metrics_line(out: &mut File, stats: &IterationStats, path: &PathBuf) -> Result<()> {
    let mut line = serde_json::to_string(stats)
        .map_err(|e| Error::InvariantViolation(format!("metrics serialization: {e}")))?;
    line.push('\n');
    out.write_all(line.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes final values with [`crate::storage::write_values`], one 8-byte
/// slot per vertex.
pub fn export_values<V: Slot>(values: &[V], path: &std::path::Path) -> Result<u64> {
    let slots: Vec<u64> = values.iter().map(|v| v.to_slot_bits()).collect();
    crate::storage::write_values(&slots, path)
}
