//! Three-step preprocessing: degree counting, destination-based edge
//! scatter, and CSR shard construction.
//!
//! The pipeline converts a raw edge list into `P` destination-grouped CSR
//! shards plus metadata. It runs once per graph; every application then
//! executes against the same partitioned data. Input vertex IDs may be
//! non-contiguous, in which case a dense remap table is built first and
//! persisted as `vertexmap.bin`.
//!
//! Within one destination's adjacency row, sources are stored in ascending
//! source-ID order. Together with the fixed remap order this makes
//! preprocessing idempotent: running twice on the same input yields
//! byte-identical shard files.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::graph::{DegreeTable, Edge, GraphMeta, Interval, VertexId};
use crate::storage::{self, ShardCsr, ShardHeader};

/// Default max edges per shard; at 4 bytes per in-memory edge this targets
/// roughly 80 MB per shard.
pub const DEFAULT_THRESHOLD_EDGE_NUM: u64 = 20_000_000;

/// Default per-shard scatter buffer.
pub const DEFAULT_SCATTER_BUFFER: usize = 4 << 20;

/// Refuse inputs whose raw ID space is absurdly large (corruption guard).
const MAX_RAW_ID: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// Whitespace/comma-separated `src dst [weight]` lines; blank lines and
    /// `#` comments skipped.
    Text,
    /// Fixed-width little-endian records: `src u64, dst u64[, weight f64]`.
    Binary,
}

#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    pub threshold_edge_num: u64,
    pub weighted: bool,
    /// Emit both directions of every edge before sharding (required for CC).
    pub symmetrize: bool,
    pub format: InputFormat,
    pub buffer_bytes: usize,
    /// Re-read every shard after writing and verify its checksum.
    pub verify: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            threshold_edge_num: DEFAULT_THRESHOLD_EDGE_NUM,
            weighted: false,
            symmetrize: false,
            format: InputFormat::Text,
            buffer_bytes: DEFAULT_SCATTER_BUFFER,
            verify: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessSummary {
    pub num_vertices: u64,
    pub num_edges: u64,
    pub num_shards: u32,
    pub remapped: bool,
    pub bytes_read: u64,
    pub bytes_written: u64,
}

/// Shard interval plan produced by [`compute_intervals`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalPlan {
    pub threshold_edge_num: u64,
    pub intervals: Vec<Interval>,
}

impl IntervalPlan {
    pub fn num_shards(&self) -> u32 {
        self.intervals.len() as u32
    }

    /// Shard owning destination `v`, or `None` when uncovered.
    pub fn owner(&self, v: VertexId) -> Option<usize> {
        let idx = self.intervals.partition_point(|iv| iv.end < v);
        match self.intervals.get(idx) {
            Some(iv) if iv.contains(v) => Some(idx),
            _ => None,
        }
    }
}

/// Cuts `[0, |V|)` into intervals so that each shard's in-edge total stays
/// within `threshold_edge_num`, cutting only at vertex boundaries. A vertex
/// whose in-degree alone exceeds the threshold still gets a complete shard:
/// all in-edges of a vertex always land in one shard, which is what makes
/// the engine lock-free.
pub fn compute_intervals(in_degree: &[u64], threshold_edge_num: u64) -> Result<IntervalPlan> {
    if in_degree.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if threshold_edge_num == 0 {
        return Err(Error::InvariantViolation(
            "threshold_edge_num must be >= 1".into(),
        ));
    }
    let n = in_degree.len() as u64;
    let mut intervals = Vec::new();
    let mut start: u64 = 0;
    let mut edge_num: u64 = 0;
    for v in 0..n {
        let d = in_degree[v as usize];
        if v > start && edge_num + d > threshold_edge_num {
            intervals.push(Interval::new(start, v - 1));
            start = v;
            edge_num = d;
        } else {
            edge_num += d;
        }
    }
    intervals.push(Interval::new(start, n - 1));
    Ok(IntervalPlan {
        threshold_edge_num,
        intervals,
    })
}

/// Counts in/out degrees over one pass of the (dense-ID) edge stream.
pub fn count_degrees<I>(edge_source: I, num_vertices: u64) -> Result<DegreeTable>
where
    I: IntoIterator<Item = Result<Edge>>,
{
    let mut degrees = DegreeTable::new_zeroed(num_vertices);
    for edge in edge_source {
        let edge = edge?;
        for id in [edge.src, edge.dst] {
            if id >= num_vertices {
                return Err(Error::VertexOutOfRange { id, num_vertices });
            }
        }
        degrees.out_degree[edge.src as usize] += 1;
        degrees.in_degree[edge.dst as usize] += 1;
    }
    Ok(degrees)
}

#[derive(Debug, Clone, Default)]
pub struct ScatterOutcome {
    pub edges_written: u64,
    pub bytes_written: u64,
}

fn scatter_tmp_path(workdir: &Path, shard: usize) -> PathBuf {
    workdir.join(format!("scatter-{shard}.tmp"))
}

/// Appends each edge to its shard's scratch file based on the destination
/// interval. Appends are buffered per shard and flushed sequentially.
pub fn scatter_edges<I>(
    edge_source: I,
    plan: &IntervalPlan,
    workdir: &Path,
    weighted: bool,
    buffer_bytes: usize,
) -> Result<ScatterOutcome>
where
    I: IntoIterator<Item = Result<Edge>>,
{
    let shards = plan.intervals.len();
    for k in 0..shards {
        let path = scatter_tmp_path(workdir, k);
        File::create(&path).map_err(|e| Error::io(&path, e))?;
    }
    let record = if weighted { 24 } else { 16 };
    let cap = buffer_bytes.max(record);
    let mut buffers: Vec<Vec<u8>> = vec![Vec::new(); shards];
    let mut out = ScatterOutcome::default();

    let flush = |k: usize, buf: &mut Vec<u8>| -> Result<u64> {
        if buf.is_empty() {
            return Ok(0);
        }
        let path = scatter_tmp_path(workdir, k);
        let mut f = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        f.write_all(buf).map_err(|e| Error::io(&path, e))?;
        let n = buf.len() as u64;
        buf.clear();
        Ok(n)
    };

    for edge in edge_source {
        let edge = edge?;
        let k = plan
            .owner(edge.dst)
            .ok_or(Error::UnownedDestination { dst: edge.dst })?;
        let buf = &mut buffers[k];
        buf.extend_from_slice(&edge.src.to_le_bytes());
        buf.extend_from_slice(&edge.dst.to_le_bytes());
        if weighted {
            buf.extend_from_slice(&edge.weight.unwrap_or(1.0).to_le_bytes());
        }
        out.edges_written += 1;
        if buf.len() >= cap {
            out.bytes_written += flush(k, buf)?;
        }
    }
    for (k, buf) in buffers.iter_mut().enumerate() {
        out.bytes_written += flush(k, buf)?;
    }
    Ok(out)
}

/// Reads one shard's scratch records back into memory.
fn read_scatter_file(path: &Path, weighted: bool) -> Result<Vec<(u64, u64, f64)>> {
    let bytes = storage::read_file(path)?;
    let record = if weighted { 24 } else { 16 };
    if bytes.len() % record != 0 {
        return Err(Error::UnexpectedEof {
            path: path.to_path_buf(),
        });
    }
    let mut edges = Vec::with_capacity(bytes.len() / record);
    for chunk in bytes.chunks_exact(record) {
        let src = u64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let dst = u64::from_le_bytes(chunk[8..16].try_into().unwrap());
        let w = if weighted {
            f64::from_le_bytes(chunk[16..24].try_into().unwrap())
        } else {
            1.0
        };
        edges.push((src, dst, w));
    }
    Ok(edges)
}

/// Sorts one shard's edges by `(dst, src, weight-bits)` and builds the CSR
/// arrays. The full ordering keeps duplicate edges in a fixed position so
/// rebuilds are byte-identical.
fn build_one_shard(
    workdir: &Path,
    shard_id: u32,
    interval: Interval,
    weighted: bool,
    verify: bool,
) -> Result<(u64, u64)> {
    let tmp = scatter_tmp_path(workdir, shard_id as usize);
    let mut edges = read_scatter_file(&tmp, weighted)?;
    edges.sort_unstable_by_key(|&(src, dst, w)| (dst, src, w.to_bits()));

    let rows = interval.len() as usize;
    let mut row = vec![0u64; rows + 1];
    let mut col = Vec::with_capacity(edges.len());
    let mut val = if weighted {
        Some(Vec::with_capacity(edges.len()))
    } else {
        None
    };
    for &(src, dst, w) in &edges {
        if !interval.contains(dst) {
            return Err(Error::UnownedDestination { dst });
        }
        row[(dst - interval.start) as usize + 1] += 1;
        col.push(src);
        if let Some(val) = val.as_mut() {
            val.push(w);
        }
    }
    for r in 1..=rows {
        row[r] += row[r - 1];
    }

    let shard = ShardCsr {
        header: ShardHeader {
            shard_id,
            start_vertex: interval.start,
            end_vertex: interval.end,
            edge_count: edges.len() as u64,
            weighted,
            checksum: 0,
        },
        row,
        col,
        val,
    };
    let path = storage::shard_path(workdir, shard_id);
    let written = storage::write_shard(&shard, &path)?;
    if verify {
        storage::read_shard(&path)?;
    }
    Ok((written, edges.len() as u64))
}

#[derive(Debug, Clone, Default)]
pub struct BuildOutcome {
    pub bytes_written: u64,
    pub bytes_read: u64,
    pub per_shard_edges: Vec<u64>,
}

/// Transforms every scatter file into a CSR shard file and persists the
/// metadata and degree files. Distinct shards convert in parallel; they
/// share no mutable state.
pub fn build_csr_shards(
    workdir: &Path,
    plan: &IntervalPlan,
    degrees: &DegreeTable,
    weighted: bool,
    verify: bool,
) -> Result<BuildOutcome> {
    let shards = plan.intervals.len();
    let results: Vec<Mutex<Option<Result<(u64, u64)>>>> =
        (0..shards).map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(shards.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = cursor.fetch_add(1, Ordering::Relaxed);
                if k >= shards {
                    break;
                }
                let res = build_one_shard(workdir, k as u32, plan.intervals[k], weighted, verify);
                *results[k].lock().unwrap() = Some(res);
            });
        }
    });

    let mut out = BuildOutcome::default();
    for (k, cell) in results.into_iter().enumerate() {
        let (written, edges) = cell
            .into_inner()
            .unwrap()
            .expect("worker completed")?;
        let expected: u64 = plan.intervals[k]
            .range_usize()
            .map(|v| degrees.in_degree[v])
            .sum();
        if edges != expected {
            return Err(Error::InvariantViolation(format!(
                "shard {k}: {edges} edges scattered but in-degrees sum to {expected}"
            )));
        }
        out.bytes_written += written;
        out.per_shard_edges.push(edges);
    }

    let num_edges: u64 = out.per_shard_edges.iter().sum();
    let meta = GraphMeta {
        num_vertices: degrees.num_vertices(),
        num_edges,
        num_shards: plan.num_shards(),
        intervals: plan.intervals.clone(),
        weighted,
    };
    out.bytes_written += storage::write_meta(&meta, degrees, workdir)?;

    for k in 0..shards {
        let tmp = scatter_tmp_path(workdir, k);
        out.bytes_read += fs::metadata(&tmp).map(|m| m.len()).unwrap_or(0);
        fs::remove_file(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    Ok(out)
}

impl Interval {
    fn range_usize(&self) -> std::ops::RangeInclusive<usize> {
        self.start as usize..=self.end as usize
    }
}

/// Dense remap of a possibly sparse input ID space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdMap {
    /// Input IDs were already contiguous from 0.
    Identity { num_vertices: u64 },
    /// Sorted original IDs; dense ID = index.
    Remap(Vec<u64>),
}

impl IdMap {
    pub fn num_vertices(&self) -> u64 {
        match self {
            IdMap::Identity { num_vertices } => *num_vertices,
            IdMap::Remap(map) => map.len() as u64,
        }
    }

    pub fn to_dense(&self, original: u64) -> Result<VertexId> {
        match self {
            IdMap::Identity { num_vertices } => {
                if original < *num_vertices {
                    Ok(original)
                } else {
                    Err(Error::VertexOutOfRange {
                        id: original,
                        num_vertices: *num_vertices,
                    })
                }
            }
            IdMap::Remap(map) => map
                .binary_search(&original)
                .map(|i| i as u64)
                .map_err(|_| Error::InvariantViolation(format!("unseen vertex id {original}"))),
        }
    }
}

/// Word-addressed bitset of observed raw IDs.
struct SeenBits {
    words: Vec<u64>,
    max_id: Option<u64>,
}

impl SeenBits {
    fn new() -> Self {
        SeenBits {
            words: Vec::new(),
            max_id: None,
        }
    }

    fn set(&mut self, id: u64) -> Result<()> {
        if id >= MAX_RAW_ID {
            return Err(Error::VertexOutOfRange {
                id,
                num_vertices: MAX_RAW_ID,
            });
        }
        let word = (id / 64) as usize;
        if word >= self.words.len() {
            self.words.resize(word + 1, 0);
        }
        self.words[word] |= 1u64 << (id % 64);
        self.max_id = Some(self.max_id.map_or(id, |m| m.max(id)));
        Ok(())
    }

    fn into_id_map(self) -> Result<IdMap> {
        let max_id = self.max_id.ok_or(Error::EmptyGraph)?;
        let count: u64 = self.words.iter().map(|w| w.count_ones() as u64).sum();
        if count == max_id + 1 {
            return Ok(IdMap::Identity {
                num_vertices: count,
            });
        }
        let mut map = Vec::with_capacity(count as usize);
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let b = bits.trailing_zeros() as u64;
                map.push(wi as u64 * 64 + b);
                bits &= bits - 1;
            }
        }
        Ok(IdMap::Remap(map))
    }
}

/// Scans the input once and decides whether a dense remap is needed.
pub fn scan_vertex_ids<I>(edge_source: I) -> Result<IdMap>
where
    I: IntoIterator<Item = Result<Edge>>,
{
    let mut seen = SeenBits::new();
    for edge in edge_source {
        let edge = edge?;
        seen.set(edge.src)?;
        seen.set(edge.dst)?;
    }
    seen.into_id_map()
}

// ---------------------------------------------------------------------------
// Edge stream readers
// ---------------------------------------------------------------------------

struct TextEdgeReader {
    lines: std::io::Lines<BufReader<File>>,
    path: PathBuf,
    line_no: u64,
    weighted: bool,
}

impl TextEdgeReader {
    fn open(path: &Path, weighted: bool) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(TextEdgeReader {
            lines: BufReader::new(file).lines(),
            path: path.to_path_buf(),
            line_no: 0,
            weighted,
        })
    }

    fn parse_line(&self, line: &str) -> Result<Option<Edge>> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        let err = |detail: String| Error::ParseLine {
            path: self.path.clone(),
            line: self.line_no,
            detail,
        };
        let mut fields = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty());
        let src = fields
            .next()
            .ok_or_else(|| err("missing source field".into()))?
            .parse::<u64>()
            .map_err(|e| err(format!("bad source id: {e}")))?;
        let dst = fields
            .next()
            .ok_or_else(|| err("missing destination field".into()))?
            .parse::<u64>()
            .map_err(|e| err(format!("bad destination id: {e}")))?;
        let weight = if self.weighted {
            let w = fields
                .next()
                .ok_or_else(|| err("missing weight field".into()))?
                .parse::<f64>()
                .map_err(|e| err(format!("bad weight: {e}")))?;
            if !w.is_finite() {
                return Err(err(format!("non-finite weight {w}")));
            }
            if w < 0.0 {
                return Err(err(format!("negative weight {w}")));
            }
            Some(w)
        } else {
            None
        };
        Ok(Some(Edge { src, dst, weight }))
    }
}

impl Iterator for TextEdgeReader {
    type Item = Result<Edge>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            match self.parse_line(&line) {
                Ok(None) => continue,
                Ok(Some(edge)) => return Some(Ok(edge)),
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

struct BinaryEdgeReader {
    reader: BufReader<File>,
    path: PathBuf,
    record_no: u64,
    weighted: bool,
}

impl BinaryEdgeReader {
    fn open(path: &Path, weighted: bool) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(BinaryEdgeReader {
            reader: BufReader::new(file),
            path: path.to_path_buf(),
            record_no: 0,
            weighted,
        })
    }
}

impl Iterator for BinaryEdgeReader {
    type Item = Result<Edge>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut rec = [0u8; 24];
        let len = if self.weighted { 24 } else { 16 };
        match self.reader.read(&mut rec[..len]) {
            Ok(0) => return None,
            Ok(mut n) => {
                // a record may arrive in pieces at buffer boundaries
                while n < len {
                    match self.reader.read(&mut rec[n..len]) {
                        Ok(0) => {
                            return Some(Err(Error::UnexpectedEof {
                                path: self.path.clone(),
                            }))
                        }
                        Ok(m) => n += m,
                        Err(e) => return Some(Err(Error::io(&self.path, e))),
                    }
                }
            }
            Err(e) => return Some(Err(Error::io(&self.path, e))),
        }
        self.record_no += 1;
        let src = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let dst = u64::from_le_bytes(rec[8..16].try_into().unwrap());
        let weight = if self.weighted {
            let w = f64::from_le_bytes(rec[16..24].try_into().unwrap());
            if !w.is_finite() || w < 0.0 {
                return Some(Err(Error::ParseLine {
                    path: self.path.clone(),
                    line: self.record_no,
                    detail: format!("invalid weight {w}"),
                }));
            }
            Some(w)
        } else {
            None
        };
        Some(Ok(Edge { src, dst, weight }))
    }
}

/// Opens the raw input as an edge stream.
pub fn open_edge_stream(
    path: &Path,
    format: InputFormat,
    weighted: bool,
) -> Result<Box<dyn Iterator<Item = Result<Edge>>>> {
    Ok(match format {
        InputFormat::Text => Box::new(TextEdgeReader::open(path, weighted)?),
        InputFormat::Binary => Box::new(BinaryEdgeReader::open(path, weighted)?),
    })
}

/// Yields each edge and then its reverse.
struct Symmetrize<I> {
    inner: I,
    pending: Option<Edge>,
}

impl<I: Iterator<Item = Result<Edge>>> Iterator for Symmetrize<I> {
    type Item = Result<Edge>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = self.pending.take() {
            return Some(Ok(e));
        }
        match self.inner.next()? {
            Ok(e) => {
                self.pending = Some(Edge {
                    src: e.dst,
                    dst: e.src,
                    weight: e.weight,
                });
                Some(Ok(e))
            }
            Err(err) => Some(Err(err)),
        }
    }
}

fn processed_stream<'a>(
    input: &Path,
    opts: &PreprocessOptions,
    id_map: &'a IdMap,
) -> Result<Box<dyn Iterator<Item = Result<Edge>> + 'a>> {
    let raw = open_edge_stream(input, opts.format, opts.weighted)?;
    let remapped = raw.map(move |e| {
        let e = e?;
        Ok(Edge {
            src: id_map.to_dense(e.src)?,
            dst: id_map.to_dense(e.dst)?,
            weight: e.weight,
        })
    });
    if opts.symmetrize {
        Ok(Box::new(Symmetrize {
            inner: remapped,
            pending: None,
        }))
    } else {
        Ok(Box::new(remapped))
    }
}

/// Removes any previous preprocessing output from `workdir` so stale shards
/// or filters never mix with the new build.
fn clean_workdir(workdir: &Path) -> Result<()> {
    let entries = fs::read_dir(workdir).map_err(|e| Error::io(workdir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(workdir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        let stale = name == storage::META_FILE
            || name == storage::DEGREES_FILE
            || name == storage::VERTEXMAP_FILE
            || name == storage::VALUES_FILE
            || (name.starts_with("shard-") && name.ends_with(".bin"))
            || (name.starts_with("filter-") && name.ends_with(".bin"))
            || (name.starts_with("scatter-") && name.ends_with(".tmp"));
        if stale {
            let p = entry.path();
            fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    Ok(())
}

/// Full preprocessing pipeline: ID scan, degree count, interval planning,
/// destination scatter, CSR build, metadata persistence.
pub fn preprocess(
    input: &Path,
    workdir: &Path,
    opts: &PreprocessOptions,
) -> Result<PreprocessSummary> {
    fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
    clean_workdir(workdir)?;

    let input_len = fs::metadata(input)
        .map(|m| m.len())
        .map_err(|e| Error::io(input, e))?;

    let id_map = scan_vertex_ids(open_edge_stream(input, opts.format, opts.weighted)?)?;
    let num_vertices = id_map.num_vertices();

    let degrees = count_degrees(processed_stream(input, opts, &id_map)?, num_vertices)?;
    let plan = compute_intervals(&degrees.in_degree, opts.threshold_edge_num)?;

    let scatter = scatter_edges(
        processed_stream(input, opts, &id_map)?,
        &plan,
        workdir,
        opts.weighted,
        opts.buffer_bytes,
    )?;
    let build = build_csr_shards(workdir, &plan, &degrees, opts.weighted, opts.verify)?;

    let mut bytes_written = scatter.bytes_written + build.bytes_written;
    let remapped = matches!(id_map, IdMap::Remap(_));
    if let IdMap::Remap(map) = &id_map {
        bytes_written += storage::write_vertex_map(map, workdir)?;
    }

    Ok(PreprocessSummary {
        num_vertices,
        num_edges: scatter.edges_written,
        num_shards: plan.num_shards(),
        remapped,
        bytes_read: 3 * input_len + build.bytes_read,
        bytes_written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(list: &[(u64, u64)]) -> Vec<Result<Edge>> {
        list.iter().map(|&(s, d)| Ok(Edge::new(s, d))).collect()
    }

    #[test]
    fn intervals_split_uniform_degrees() {
        let plan = compute_intervals(&[1, 1, 1, 1, 1, 1], 2).unwrap();
        assert_eq!(
            plan.intervals,
            vec![
                Interval::new(0, 1),
                Interval::new(2, 3),
                Interval::new(4, 5)
            ]
        );
    }

    #[test]
    fn single_heavy_vertex_gets_own_shard() {
        let plan = compute_intervals(&[5], 2).unwrap();
        assert_eq!(plan.intervals, vec![Interval::new(0, 0)]);
        // and in the middle of a larger graph the heavy vertex is isolated
        let plan = compute_intervals(&[1, 9, 1], 2).unwrap();
        assert_eq!(
            plan.intervals,
            vec![
                Interval::new(0, 0),
                Interval::new(1, 1),
                Interval::new(2, 2)
            ]
        );
    }

    #[test]
    fn everything_fits_one_shard() {
        let plan = compute_intervals(&[1, 1, 1], 100).unwrap();
        assert_eq!(plan.intervals, vec![Interval::new(0, 2)]);
    }

    #[test]
    fn empty_graph_is_an_error() {
        assert!(matches!(compute_intervals(&[], 4), Err(Error::EmptyGraph)));
    }

    #[test]
    fn interval_totals_respect_threshold() {
        // each interval holds at most the threshold unless a single vertex
        // exceeds it on its own
        let degs = [3u64, 0, 4, 9, 1, 1, 1, 2, 8, 0, 0, 5];
        let threshold = 6;
        let plan = compute_intervals(&degs, threshold).unwrap();
        assert_eq!(plan.intervals.first().unwrap().start, 0);
        assert_eq!(plan.intervals.last().unwrap().end, degs.len() as u64 - 1);
        for w in plan.intervals.windows(2) {
            assert_eq!(w[1].start, w[0].end + 1);
        }
        for iv in &plan.intervals {
            let total: u64 = (iv.start..=iv.end).map(|v| degs[v as usize]).sum();
            assert!(total <= threshold || iv.len() == 1);
        }
        // fullness: adding the successor vertex would overflow
        for (i, iv) in plan.intervals.iter().enumerate() {
            if i + 1 < plan.intervals.len() {
                let total: u64 = (iv.start..=iv.end).map(|v| degs[v as usize]).sum();
                let next = degs[(iv.end + 1) as usize];
                assert!(total + next > threshold);
            }
        }
    }

    #[test]
    fn degree_counting() {
        let d = count_degrees(edges(&[(0, 1), (2, 1), (1, 0)]), 3).unwrap();
        assert_eq!(d.in_degree, vec![1, 2, 0]);
        assert_eq!(d.out_degree, vec![1, 1, 1]);
    }

    #[test]
    fn degree_counting_empty_and_self_loop() {
        let d = count_degrees(edges(&[]), 3).unwrap();
        assert_eq!(d.in_degree, vec![0, 0, 0]);
        assert_eq!(d.out_degree, vec![0, 0, 0]);
        let d = count_degrees(edges(&[(0, 0)]), 1).unwrap();
        assert_eq!(d.in_degree, vec![1]);
        assert_eq!(d.out_degree, vec![1]);
    }

    #[test]
    fn degree_counting_rejects_out_of_range() {
        let res = count_degrees(edges(&[(0, 7)]), 3);
        assert!(matches!(
            res,
            Err(Error::VertexOutOfRange {
                id: 7,
                num_vertices: 3
            })
        ));
    }

    #[test]
    fn scatter_routes_by_destination() {
        let dir = tempfile::tempdir().unwrap();
        let plan = IntervalPlan {
            threshold_edge_num: 10,
            intervals: vec![Interval::new(0, 2), Interval::new(3, 5)],
        };
        let out = scatter_edges(edges(&[(0, 5), (1, 0)]), &plan, dir.path(), false, 1 << 20)
            .unwrap();
        assert_eq!(out.edges_written, 2);
        let s0 = read_scatter_file(&scatter_tmp_path(dir.path(), 0), false).unwrap();
        let s1 = read_scatter_file(&scatter_tmp_path(dir.path(), 1), false).unwrap();
        assert_eq!(s0, vec![(1, 0, 1.0)]);
        assert_eq!(s1, vec![(0, 5, 1.0)]);
    }

    #[test]
    fn scatter_empty_stream_creates_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        let plan = IntervalPlan {
            threshold_edge_num: 10,
            intervals: vec![Interval::new(0, 1), Interval::new(2, 3)],
        };
        let out = scatter_edges(edges(&[]), &plan, dir.path(), false, 1 << 20).unwrap();
        assert_eq!(out.edges_written, 0);
        for k in 0..2 {
            let meta = fs::metadata(scatter_tmp_path(dir.path(), k)).unwrap();
            assert_eq!(meta.len(), 0);
        }
    }

    #[test]
    fn scatter_rejects_unowned_destination() {
        let dir = tempfile::tempdir().unwrap();
        let plan = IntervalPlan {
            threshold_edge_num: 10,
            intervals: vec![Interval::new(0, 1)],
        };
        let res = scatter_edges(edges(&[(0, 9)]), &plan, dir.path(), false, 1 << 20);
        assert!(matches!(res, Err(Error::UnownedDestination { dst: 9 })));
    }

    #[test]
    fn csr_build_sorts_and_groups_by_destination() {
        let dir = tempfile::tempdir().unwrap();
        let plan = IntervalPlan {
            threshold_edge_num: 10,
            intervals: vec![Interval::new(0, 1)],
        };
        let degrees = count_degrees(edges(&[(1, 0), (3, 0), (2, 1)]), 4).unwrap();
        // degrees covers 4 vertices but only 0..=1 receive edges here
        scatter_edges(
            edges(&[(2, 1), (3, 0), (1, 0)]),
            &plan,
            dir.path(),
            false,
            1 << 20,
        )
        .unwrap();
        let degrees = DegreeTable {
            in_degree: degrees.in_degree[..2].to_vec(),
            out_degree: degrees.out_degree[..2].to_vec(),
        };
        build_csr_shards(dir.path(), &plan, &degrees, false, true).unwrap();
        let shard = storage::read_shard(&storage::shard_path(dir.path(), 0)).unwrap();
        assert_eq!(shard.row, vec![0, 2, 3]);
        assert_eq!(shard.col, vec![1, 3, 2]);
        assert_eq!(shard.sources_of(0), &[1, 3]);
        assert_eq!(shard.sources_of(1), &[2]);
    }

    #[test]
    fn csr_offsets_match_reference_layout() {
        // 4-row shard with 9 edges and in-degrees [2, 2, 3, 2]: the offset
        // array must end [.., 7, 9] so the last row's two sources sit at
        // col[7] and col[8]
        let dir = tempfile::tempdir().unwrap();
        let plan = IntervalPlan {
            threshold_edge_num: 100,
            intervals: vec![Interval::new(0, 3)],
        };
        let edge_list = [
            (4, 0),
            (5, 0),
            (4, 1),
            (6, 1),
            (4, 2),
            (5, 2),
            (6, 2),
            (5, 3),
            (6, 3),
        ];
        let degrees = count_degrees(edges(&edge_list), 7).unwrap();
        let degrees = DegreeTable {
            in_degree: degrees.in_degree[..4].to_vec(),
            out_degree: degrees.out_degree[..4].to_vec(),
        };
        scatter_edges(edges(&edge_list), &plan, dir.path(), false, 1 << 20).unwrap();
        build_csr_shards(dir.path(), &plan, &degrees, false, false).unwrap();
        let shard = storage::read_shard(&storage::shard_path(dir.path(), 0)).unwrap();
        assert_eq!(shard.row, vec![0, 2, 4, 7, 9]);
        assert_eq!(shard.row[3], 7);
        assert_eq!(shard.row[4], 9);
        assert_eq!(&shard.col[7..9], shard.sources_of(3));
    }

    #[test]
    fn empty_shard_has_zero_rows() {
        let dir = tempfile::tempdir().unwrap();
        let plan = IntervalPlan {
            threshold_edge_num: 10,
            intervals: vec![Interval::new(0, 2)],
        };
        let degrees = DegreeTable::new_zeroed(3);
        scatter_edges(edges(&[]), &plan, dir.path(), false, 1 << 20).unwrap();
        build_csr_shards(dir.path(), &plan, &degrees, false, false).unwrap();
        let shard = storage::read_shard(&storage::shard_path(dir.path(), 0)).unwrap();
        assert_eq!(shard.row, vec![0, 0, 0, 0]);
        assert!(shard.col.is_empty());
    }

    fn write_lines(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    #[test]
    fn text_parser_handles_comments_commas_and_blanks() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_lines(
            dir.path(),
            "g.txt",
            "# a comment\n0 1\n\n1,2\n  2\t0  \n",
        );
        let edges: Vec<Edge> = TextEdgeReader::open(&input, false)
            .unwrap()
            .map(|e| e.unwrap())
            .collect();
        assert_eq!(
            edges,
            vec![Edge::new(0, 1), Edge::new(1, 2), Edge::new(2, 0)]
        );
    }

    #[test]
    fn text_parser_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_lines(dir.path(), "g.txt", "0 1\nnot an edge\n");
        let err = TextEdgeReader::open(&input, false)
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        match err {
            Error::ParseLine { line, .. } => assert_eq!(line, 2),
            other => panic!("expected ParseLine, got {other:?}"),
        }
    }

    #[test]
    fn negative_weight_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_lines(dir.path(), "g.txt", "0 1 -2.5\n");
        let err = TextEdgeReader::open(&input, true)
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::ParseLine { .. }));
        assert!(err.to_string().contains("negative weight"));
    }

    #[test]
    fn binary_reader_round_trips_and_detects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        let mut bytes = Vec::new();
        for (s, d) in [(0u64, 1u64), (1, 2)] {
            bytes.extend_from_slice(&s.to_le_bytes());
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        fs::write(&path, &bytes).unwrap();
        let edges: Vec<Edge> = BinaryEdgeReader::open(&path, false)
            .unwrap()
            .map(|e| e.unwrap())
            .collect();
        assert_eq!(edges, vec![Edge::new(0, 1), Edge::new(1, 2)]);

        fs::write(&path, &bytes[..20]).unwrap();
        let err = BinaryEdgeReader::open(&path, false)
            .unwrap()
            .collect::<Result<Vec<_>>>()
            .unwrap_err();
        assert!(matches!(err, Error::UnexpectedEof { .. }));
    }

    #[test]
    fn sparse_ids_get_remapped_densely() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_lines(dir.path(), "g.txt", "100 5\n5 7\n");
        let work = dir.path().join("work");
        let summary = preprocess(&input, &work, &PreprocessOptions::default()).unwrap();
        assert_eq!(summary.num_vertices, 3);
        assert_eq!(summary.num_edges, 2);
        assert!(summary.remapped);
        let map = storage::read_vertex_map(&work).unwrap().unwrap();
        assert_eq!(map, vec![5, 7, 100]);
        // edge 100 -> 5 becomes 2 -> 0, edge 5 -> 7 becomes 0 -> 1
        let (_, degrees) = storage::read_meta(&work).unwrap();
        assert_eq!(degrees.in_degree, vec![1, 1, 0]);
        assert_eq!(degrees.out_degree, vec![1, 0, 1]);
    }

    #[test]
    fn dense_ids_need_no_map_file() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_lines(dir.path(), "g.txt", "0 1\n1 2\n2 0\n");
        let work = dir.path().join("work");
        let summary = preprocess(&input, &work, &PreprocessOptions::default()).unwrap();
        assert!(!summary.remapped);
        assert!(!work.join(storage::VERTEXMAP_FILE).exists());
    }

    #[test]
    fn symmetrize_doubles_the_edge_multiset() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_lines(dir.path(), "g.txt", "0 1\n1 2\n");
        let work = dir.path().join("work");
        let opts = PreprocessOptions {
            symmetrize: true,
            ..Default::default()
        };
        let summary = preprocess(&input, &work, &opts).unwrap();
        assert_eq!(summary.num_edges, 4);
        let (_, degrees) = storage::read_meta(&work).unwrap();
        assert_eq!(degrees.in_degree, vec![1, 2, 1]);
        assert_eq!(degrees.out_degree, vec![1, 2, 1]);
    }

    #[test]
    fn preprocess_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_lines(
            dir.path(),
            "g.txt",
            "0 3\n3 1\n1 0\n2 3\n0 2\n3 3\n2 1\n",
        );
        let opts = PreprocessOptions {
            threshold_edge_num: 3,
            ..Default::default()
        };
        let work = dir.path().join("work");
        preprocess(&input, &work, &opts).unwrap();
        let snapshot = |d: &Path| -> Vec<(String, Vec<u8>)> {
            let mut files: Vec<_> = fs::read_dir(d)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            files
                .into_iter()
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        fs::read(&p).unwrap(),
                    )
                })
                .collect()
        };
        let first = snapshot(&work);
        preprocess(&input, &work, &opts).unwrap();
        let second = snapshot(&work);
        assert_eq!(first, second);
    }

    #[test]
    fn default_threshold_targets_80mb_shards() {
        assert_eq!(DEFAULT_THRESHOLD_EDGE_NUM * 4, 80_000_000);
    }
}
