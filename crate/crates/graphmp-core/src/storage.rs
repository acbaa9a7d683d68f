//! Bit-exact on-disk formats and sequential shard loading.
//!
//! All multi-byte integers are little-endian. Each format starts with a
//! four-byte magic and a `u16` version. Shard and filter files end with a
//! CRC-64/XZ checksum over every preceding byte.
//!
//! Work directory layout:
//!
//! * `meta.bin`      — graph properties and the shard intervals
//! * `degrees.bin`   — in-degree and out-degree arrays
//! * `vertexmap.bin` — dense-to-original vertex ID map (only when the input
//!   ID space was sparse and got remapped)
//! * `shard-<k>.bin` — destination-grouped CSR shard `k`
//! * `filter-<k>.bin`— Bloom filter over shard `k`'s source IDs (written by
//!   the engine when selective scheduling is on)
//! * `values.bin`    — final vertex values, exported at program end

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, WriteBytesExt};
use crc::{Crc, CRC_64_XZ};

use crate::error::{Error, Result};
use crate::graph::{validate_meta, DegreeTable, GraphMeta, Interval, VertexId};

pub const SHARD_MAGIC: [u8; 4] = *b"GMPS";
pub const META_MAGIC: [u8; 4] = *b"GMPM";
pub const DEGREES_MAGIC: [u8; 4] = *b"GMPD";
pub const FILTER_MAGIC: [u8; 4] = *b"GMPF";
pub const VALUES_MAGIC: [u8; 4] = *b"GMPV";
pub const VERTEXMAP_MAGIC: [u8; 4] = *b"GMPR";

pub const FORMAT_VERSION: u16 = 1;

const FLAG_WEIGHTED: u16 = 1;

pub const META_FILE: &str = "meta.bin";
pub const DEGREES_FILE: &str = "degrees.bin";
pub const VERTEXMAP_FILE: &str = "vertexmap.bin";
pub const VALUES_FILE: &str = "values.bin";

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

/// CRC-64/XZ over `bytes`; the streaming checksum used by shard and filter
/// files.
pub fn checksum64(bytes: &[u8]) -> u64 {
    CRC64.checksum(bytes)
}

pub fn shard_path(dir: &Path, shard_id: u32) -> PathBuf {
    dir.join(format!("shard-{shard_id}.bin"))
}

pub fn filter_path(dir: &Path, shard_id: u32) -> PathBuf {
    dir.join(format!("filter-{shard_id}.bin"))
}

/// Fixed-size shard file header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardHeader {
    pub shard_id: u32,
    pub start_vertex: VertexId,
    pub end_vertex: VertexId,
    pub edge_count: u64,
    pub weighted: bool,
    /// Checksum over header + payload; filled on write, verified on read.
    pub checksum: u64,
}

impl ShardHeader {
    pub fn interval(&self) -> Interval {
        Interval::new(self.start_vertex, self.end_vertex)
    }

    /// Number of vertices in the shard's interval.
    pub fn num_rows(&self) -> u64 {
        self.end_vertex - self.start_vertex + 1
    }
}

/// One destination-grouped edge shard in CSR form.
///
/// `row` has `num_rows + 1` offsets with `row[0] = 0` and
/// `row[num_rows] = edge_count`. The in-adjacency of vertex `v` inside the
/// interval is `col[row[v - start] .. row[v - start + 1]]`, listing source
/// IDs in ascending order. `val` is present iff the graph is weighted.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardCsr {
    pub header: ShardHeader,
    pub row: Vec<u64>,
    pub col: Vec<VertexId>,
    pub val: Option<Vec<f64>>,
}

impl ShardCsr {
    /// CSR offsets of local row `local` as a `usize` range.
    pub fn row_range(&self, local: u64) -> std::ops::Range<usize> {
        self.row[local as usize] as usize..self.row[local as usize + 1] as usize
    }

    /// Ascending source IDs of the in-edges of vertex `v` (global ID).
    pub fn sources_of(&self, v: VertexId) -> &[VertexId] {
        &self.col[self.row_range(v - self.header.start_vertex)]
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let rows = self.header.num_rows() as usize;
        let detail = |d: String| Error::FormatViolation {
            path: path.to_path_buf(),
            detail: d,
        };
        if self.row.len() != rows + 1 {
            return Err(detail(format!(
                "row array has {} entries, expected {}",
                self.row.len(),
                rows + 1
            )));
        }
        if self.row[0] != 0 {
            return Err(detail(format!("row[0] = {}, expected 0", self.row[0])));
        }
        if let Some(i) = (1..self.row.len()).find(|&i| self.row[i] < self.row[i - 1]) {
            return Err(detail(format!("row not monotone at index {i}")));
        }
        if *self.row.last().unwrap() != self.header.edge_count {
            return Err(detail(format!(
                "row[last] = {}, expected edge_count {}",
                self.row.last().unwrap(),
                self.header.edge_count
            )));
        }
        if self.col.len() as u64 != self.header.edge_count {
            return Err(detail(format!(
                "col has {} entries, expected {}",
                self.col.len(),
                self.header.edge_count
            )));
        }
        match (&self.val, self.header.weighted) {
            (Some(val), true) if val.len() as u64 != self.header.edge_count => {
                return Err(detail(format!(
                    "val has {} entries, expected {}",
                    val.len(),
                    self.header.edge_count
                )));
            }
            (Some(_), false) => return Err(detail("val present on unweighted shard".into())),
            (None, true) => return Err(detail("val missing on weighted shard".into())),
            _ => {}
        }
        if self.header.start_vertex > self.header.end_vertex {
            return Err(detail("start_vertex > end_vertex".into()));
        }
        Ok(())
    }
}

/// Serializes the shard into its file byte image (including checksum).
pub fn shard_to_bytes(shard: &ShardCsr) -> Vec<u8> {
    let rows = shard.row.len();
    let mut buf = Vec::with_capacity(50 + 8 * (rows + 2 * shard.col.len()));
    buf.extend_from_slice(&SHARD_MAGIC);
    buf.write_u16::<LittleEndian>(FORMAT_VERSION).unwrap();
    let flags = if shard.header.weighted { FLAG_WEIGHTED } else { 0 };
    buf.write_u16::<LittleEndian>(flags).unwrap();
    buf.write_u32::<LittleEndian>(shard.header.shard_id).unwrap();
    buf.write_u64::<LittleEndian>(shard.header.start_vertex).unwrap();
    buf.write_u64::<LittleEndian>(shard.header.end_vertex).unwrap();
    buf.write_u64::<LittleEndian>(shard.header.edge_count).unwrap();
    for &r in &shard.row {
        buf.write_u64::<LittleEndian>(r).unwrap();
    }
    for &c in &shard.col {
        buf.write_u64::<LittleEndian>(c).unwrap();
    }
    if let Some(val) = &shard.val {
        for &w in val {
            buf.write_f64::<LittleEndian>(w).unwrap();
        }
    }
    let sum = checksum64(&buf);
    buf.write_u64::<LittleEndian>(sum).unwrap();
    buf
}

/// Writes the shard to `path`, returning the number of bytes written.
pub fn write_shard(shard: &ShardCsr, path: &Path) -> Result<u64> {
    shard.validate(path)?;
    let bytes = shard_to_bytes(shard);
    write_file(path, &bytes)?;
    Ok(bytes.len() as u64)
}

/// Reads and fully validates a shard file.
pub fn read_shard(path: &Path) -> Result<ShardCsr> {
    let mut file = open_file(path)?;
    read_shard_from(&mut file, path)
}

/// Reads a shard from any sequential byte source. The source is consumed
/// front-to-back in a single pass.
pub fn read_shard_from<R: Read>(reader: &mut R, path: &Path) -> Result<ShardCsr> {
    let mut buf = Vec::new();
    reader
        .read_to_end(&mut buf)
        .map_err(|e| Error::io(path, e))?;
    parse_shard_bytes(&buf, path)
}

/// Parses a shard from its complete file byte image, verifying magic,
/// version, checksum and CSR invariants. Shared by the disk and cache read
/// paths.
pub fn parse_shard_bytes(buf: &[u8], path: &Path) -> Result<ShardCsr> {
    let mut r = SliceReader::new(buf, path);
    r.magic(SHARD_MAGIC)?;
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let flags = r.u16()?;
    let weighted = flags & FLAG_WEIGHTED != 0;
    let shard_id = r.u32()?;
    let start_vertex = r.u64()?;
    let end_vertex = r.u64()?;
    let edge_count = r.u64()?;
    if start_vertex > end_vertex {
        return Err(Error::FormatViolation {
            path: path.to_path_buf(),
            detail: "start_vertex > end_vertex".into(),
        });
    }

    // Checksum is validated before the payload is interpreted, so corruption
    // anywhere in the file surfaces as ChecksumMismatch rather than as a
    // downstream invariant error.
    if buf.len() < 8 {
        return Err(Error::UnexpectedEof {
            path: path.to_path_buf(),
        });
    }
    let rows = end_vertex - start_vertex + 1;
    let payload_len = 36usize
        .checked_add(8 * (rows as usize + 1))
        .and_then(|n| n.checked_add(8 * edge_count as usize))
        .and_then(|n| n.checked_add(if weighted { 8 * edge_count as usize } else { 0 }))
        .ok_or_else(|| Error::FormatViolation {
            path: path.to_path_buf(),
            detail: "size overflow".into(),
        })?;
    if buf.len() < payload_len + 8 {
        return Err(Error::UnexpectedEof {
            path: path.to_path_buf(),
        });
    }
    if buf.len() > payload_len + 8 {
        return Err(Error::FormatViolation {
            path: path.to_path_buf(),
            detail: format!("{} trailing bytes", buf.len() - payload_len - 8),
        });
    }
    let stored = u64::from_le_bytes(buf[payload_len..payload_len + 8].try_into().unwrap());
    let computed = checksum64(&buf[..payload_len]);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }

    let row = r.u64_array(rows as usize + 1)?;
    let col = r.u64_array(edge_count as usize)?;
    let val = if weighted {
        Some(r.f64_array(edge_count as usize)?)
    } else {
        None
    };

    let shard = ShardCsr {
        header: ShardHeader {
            shard_id,
            start_vertex,
            end_vertex,
            edge_count,
            weighted,
            checksum: stored,
        },
        row,
        col,
        val,
    };
    shard.validate(path)?;
    Ok(shard)
}

/// Writes `meta.bin` and `degrees.bin` into `dir`.
pub fn write_meta(meta: &GraphMeta, degrees: &DegreeTable, dir: &Path) -> Result<u64> {
    if let Err(v) = validate_meta(meta) {
        return Err(Error::InvariantViolation(format!("invalid metadata: {v}")));
    }
    let mut buf = Vec::with_capacity(25 + 16 * meta.intervals.len());
    buf.extend_from_slice(&META_MAGIC);
    buf.write_u16::<LittleEndian>(FORMAT_VERSION).unwrap();
    buf.write_u64::<LittleEndian>(meta.num_vertices).unwrap();
    buf.write_u64::<LittleEndian>(meta.num_edges).unwrap();
    buf.write_u32::<LittleEndian>(meta.num_shards).unwrap();
    buf.push(meta.weighted as u8);
    for iv in &meta.intervals {
        buf.write_u64::<LittleEndian>(iv.start).unwrap();
        buf.write_u64::<LittleEndian>(iv.end).unwrap();
    }
    let meta_path = dir.join(META_FILE);
    write_file(&meta_path, &buf)?;
    let mut written = buf.len() as u64;

    let mut dbuf = Vec::with_capacity(6 + 16 * degrees.in_degree.len());
    dbuf.extend_from_slice(&DEGREES_MAGIC);
    dbuf.write_u16::<LittleEndian>(FORMAT_VERSION).unwrap();
    for &d in &degrees.in_degree {
        dbuf.write_u64::<LittleEndian>(d).unwrap();
    }
    for &d in &degrees.out_degree {
        dbuf.write_u64::<LittleEndian>(d).unwrap();
    }
    write_file(&dir.join(DEGREES_FILE), &dbuf)?;
    written += dbuf.len() as u64;
    Ok(written)
}

/// Reads `meta.bin` and `degrees.bin` back from `dir`.
pub fn read_meta(dir: &Path) -> Result<(GraphMeta, DegreeTable)> {
    let meta_path = dir.join(META_FILE);
    if !meta_path.exists() {
        return Err(Error::MetadataNotFound {
            dir: dir.to_path_buf(),
        });
    }
    let buf = read_file(&meta_path)?;
    let mut r = SliceReader::new(&buf, &meta_path);
    r.magic(META_MAGIC)?;
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: meta_path,
            found: version,
        });
    }
    let num_vertices = r.u64()?;
    let num_edges = r.u64()?;
    let num_shards = r.u32()?;
    let weighted = r.u8()? != 0;
    let mut intervals = Vec::with_capacity(num_shards as usize);
    for _ in 0..num_shards {
        let start = r.u64()?;
        let end = r.u64()?;
        intervals.push(Interval::new(start, end));
    }
    r.finish()?;
    let meta = GraphMeta {
        num_vertices,
        num_edges,
        num_shards,
        intervals,
        weighted,
    };
    if let Err(v) = validate_meta(&meta) {
        return Err(Error::FormatViolation {
            path: dir.join(META_FILE),
            detail: format!("invalid metadata: {v}"),
        });
    }

    let deg_path = dir.join(DEGREES_FILE);
    let dbuf = read_file(&deg_path)?;
    let mut r = SliceReader::new(&dbuf, &deg_path);
    r.magic(DEGREES_MAGIC)?;
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: deg_path,
            found: version,
        });
    }
    let n = num_vertices as usize;
    let in_degree = r.u64_array(n)?;
    let out_degree = r.u64_array(n)?;
    r.finish()?;
    Ok((
        meta,
        DegreeTable {
            in_degree,
            out_degree,
        },
    ))
}

/// Writes the dense-to-original vertex ID map.
pub fn write_vertex_map(map: &[u64], dir: &Path) -> Result<u64> {
    let mut buf = Vec::with_capacity(14 + 8 * map.len());
    buf.extend_from_slice(&VERTEXMAP_MAGIC);
    buf.write_u16::<LittleEndian>(FORMAT_VERSION).unwrap();
    buf.write_u64::<LittleEndian>(map.len() as u64).unwrap();
    for &id in map {
        buf.write_u64::<LittleEndian>(id).unwrap();
    }
    write_file(&dir.join(VERTEXMAP_FILE), &buf)?;
    Ok(buf.len() as u64)
}

/// Reads `vertexmap.bin` if present; `None` means IDs were already dense.
pub fn read_vertex_map(dir: &Path) -> Result<Option<Vec<u64>>> {
    let path = dir.join(VERTEXMAP_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let buf = read_file(&path)?;
    let mut r = SliceReader::new(&buf, &path);
    r.magic(VERTEXMAP_MAGIC)?;
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path,
            found: version,
        });
    }
    let count = r.u64()?;
    let map = r.u64_array(count as usize)?;
    r.finish()?;
    Ok(Some(map))
}

/// Exports per-vertex value slots (8 bytes each) to `path`.
pub fn write_values(slots: &[u64], path: &Path) -> Result<u64> {
    let mut buf = Vec::with_capacity(14 + 8 * slots.len());
    buf.extend_from_slice(&VALUES_MAGIC);
    buf.write_u16::<LittleEndian>(FORMAT_VERSION).unwrap();
    buf.write_u64::<LittleEndian>(slots.len() as u64).unwrap();
    for &s in slots {
        buf.write_u64::<LittleEndian>(s).unwrap();
    }
    write_file(path, &buf)?;
    Ok(buf.len() as u64)
}

/// Reads value slots back from a `values.bin` export.
pub fn read_values(path: &Path) -> Result<Vec<u64>> {
    let buf = read_file(path)?;
    let mut r = SliceReader::new(&buf, path);
    r.magic(VALUES_MAGIC)?;
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let count = r.u64()?;
    let slots = r.u64_array(count as usize)?;
    r.finish()?;
    Ok(slots)
}

/// A preprocessed work directory opened for execution.
#[derive(Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub meta: GraphMeta,
    pub degrees: DegreeTable,
    /// Dense-to-original ID map when the input space was remapped.
    pub vertex_map: Option<Vec<u64>>,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let (meta, degrees) = read_meta(dir)?;
        let vertex_map = read_vertex_map(dir)?;
        Ok(Dataset {
            dir: dir.to_path_buf(),
            meta,
            degrees,
            vertex_map,
        })
    }

    pub fn shard_path(&self, shard_id: u32) -> PathBuf {
        shard_path(&self.dir, shard_id)
    }

    pub fn filter_path(&self, shard_id: u32) -> PathBuf {
        filter_path(&self.dir, shard_id)
    }

    /// Size in bytes of each shard file, indexed by shard ID.
    pub fn shard_file_sizes(&self) -> Result<Vec<u64>> {
        (0..self.meta.num_shards)
            .map(|k| {
                let p = self.shard_path(k);
                fs::metadata(&p).map(|m| m.len()).map_err(|e| Error::io(&p, e))
            })
            .collect()
    }

    /// Maps an original vertex ID to its dense ID.
    pub fn to_dense(&self, original: u64) -> Option<VertexId> {
        match &self.vertex_map {
            None => (original < self.meta.num_vertices).then_some(original),
            Some(map) => map.binary_search(&original).ok().map(|i| i as u64),
        }
    }

    /// Maps a dense vertex ID back to the original input ID.
    pub fn to_original(&self, dense: VertexId) -> u64 {
        match &self.vertex_map {
            None => dense,
            Some(map) => map[dense as usize],
        }
    }
}

fn open_file(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Little-endian slice reader with positional EOF errors.
pub(crate) struct SliceReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> SliceReader<'a> {
    pub(crate) fn new(buf: &'a [u8], path: &'a Path) -> Self {
        SliceReader { buf, pos: 0, path }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::UnexpectedEof {
                path: self.path.to_path_buf(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(Error::BadMagic {
                path: self.path.to_path_buf(),
                expected,
            });
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn u64_array(&mut self, n: usize) -> Result<Vec<u64>> {
        let bytes = self.take(8 * n)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn f64_array(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(8 * n)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::FormatViolation {
                path: self.path.to_path_buf(),
                detail: format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}
