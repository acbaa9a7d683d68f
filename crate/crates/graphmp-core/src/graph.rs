//! Core graph types shared by every other module.
//!
//! Vertex IDs are dense: after preprocessing they run contiguously from 0 to
//! `|V| - 1`. All types here are immutable after construction and safe to
//! share read-only across workers.

/// Dense vertex identifier in `[0, |V|)`.
pub type VertexId = u64;

/// A directed edge. `weight` is `None` for unweighted graphs, where the
/// effective weight of every edge is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: VertexId,
    pub dst: VertexId,
    pub weight: Option<f64>,
}

impl Edge {
    pub fn new(src: VertexId, dst: VertexId) -> Self {
        Edge {
            src,
            dst,
            weight: None,
        }
    }

    pub fn weighted(src: VertexId, dst: VertexId, weight: f64) -> Self {
        Edge {
            src,
            dst,
            weight: Some(weight),
        }
    }
}

/// Inclusive vertex ID range `[start, end]` owned by one shard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: VertexId,
    pub end: VertexId,
}

impl Interval {
    pub fn new(start: VertexId, end: VertexId) -> Self {
        Interval { start, end }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.start <= v && v <= self.end
    }

    /// Number of vertices in the interval.
    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

/// Global graph properties: counts plus the per-shard vertex intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphMeta {
    pub num_vertices: u64,
    pub num_edges: u64,
    pub num_shards: u32,
    pub intervals: Vec<Interval>,
    pub weighted: bool,
}

/// Per-vertex in/out degree arrays, indexed by `VertexId`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeTable {
    pub in_degree: Vec<u64>,
    pub out_degree: Vec<u64>,
}

impl DegreeTable {
    pub fn new_zeroed(num_vertices: u64) -> Self {
        DegreeTable {
            in_degree: vec![0; num_vertices as usize],
            out_degree: vec![0; num_vertices as usize],
        }
    }

    pub fn num_vertices(&self) -> u64 {
        self.in_degree.len() as u64
    }
}

/// First violated `GraphMeta` invariant, if any. Violations are ordinary
/// return values, not failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetaViolation {
    NoIntervals,
    ShardCountMismatch { declared: u32, actual: usize },
    FirstIntervalStart { start: VertexId },
    InvertedInterval { index: usize },
    Gap { index: usize, at: VertexId },
    Overlap { index: usize, at: VertexId },
    LastIntervalEnd { end: VertexId, expected: VertexId },
}

impl std::fmt::Display for MetaViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetaViolation::NoIntervals => write!(f, "no intervals"),
            MetaViolation::ShardCountMismatch { declared, actual } => {
                write!(f, "num_shards = {declared} but {actual} intervals")
            }
            MetaViolation::FirstIntervalStart { start } => {
                write!(f, "first interval starts at {start}, expected 0")
            }
            MetaViolation::InvertedInterval { index } => {
                write!(f, "interval {index} has end < start")
            }
            MetaViolation::Gap { index, at } => {
                write!(f, "gap before interval {index}: vertex {at} unowned")
            }
            MetaViolation::Overlap { index, at } => {
                write!(f, "interval {index} overlaps previous at vertex {at}")
            }
            MetaViolation::LastIntervalEnd { end, expected } => {
                write!(f, "last interval ends at {end}, expected {expected}")
            }
        }
    }
}

/// Checks that the intervals are disjoint, sorted, and cover `[0, |V|)`
/// exactly. Returns the first violated invariant.
pub fn validate_meta(meta: &GraphMeta) -> std::result::Result<(), MetaViolation> {
    if meta.intervals.is_empty() {
        return Err(MetaViolation::NoIntervals);
    }
    if meta.num_shards as usize != meta.intervals.len() {
        return Err(MetaViolation::ShardCountMismatch {
            declared: meta.num_shards,
            actual: meta.intervals.len(),
        });
    }
    let first = meta.intervals[0];
    if first.start != 0 {
        return Err(MetaViolation::FirstIntervalStart { start: first.start });
    }
    let mut prev_end: Option<VertexId> = None;
    for (index, iv) in meta.intervals.iter().enumerate() {
        if iv.is_empty() {
            return Err(MetaViolation::InvertedInterval { index });
        }
        if let Some(end) = prev_end {
            if iv.start > end + 1 {
                return Err(MetaViolation::Gap { index, at: end + 1 });
            }
            if iv.start <= end {
                return Err(MetaViolation::Overlap {
                    index,
                    at: iv.start,
                });
            }
        }
        prev_end = Some(iv.end);
    }
    let last_end = prev_end.unwrap();
    if meta.num_vertices == 0 || last_end != meta.num_vertices - 1 {
        return Err(MetaViolation::LastIntervalEnd {
            end: last_end,
            expected: meta.num_vertices.saturating_sub(1),
        });
    }
    Ok(())
}

/// Shard index owning vertex `v`, by binary search over the intervals.
/// Returns `None` when `v` lies outside every interval.
pub fn owner_shard(meta: &GraphMeta, v: VertexId) -> Option<usize> {
    let idx = meta
        .intervals
        .partition_point(|iv| iv.end < v);
    match meta.intervals.get(idx) {
        Some(iv) if iv.contains(v) => Some(idx),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(intervals: &[(u64, u64)], num_vertices: u64) -> GraphMeta {
        GraphMeta {
            num_vertices,
            num_edges: 0,
            num_shards: intervals.len() as u32,
            intervals: intervals.iter().map(|&(s, e)| Interval::new(s, e)).collect(),
            weighted: false,
        }
    }

    #[test]
    fn contiguous_cover_is_ok() {
        let m = meta(&[(0, 2), (3, 5), (6, 6)], 7);
        assert_eq!(validate_meta(&m), Ok(()));
    }

    #[test]
    fn gap_is_reported() {
        let m = meta(&[(0, 2), (4, 6)], 7);
        assert_eq!(
            validate_meta(&m),
            Err(MetaViolation::Gap { index: 1, at: 3 })
        );
    }

    #[test]
    fn overlap_is_reported() {
        let m = meta(&[(0, 3), (3, 6)], 7);
        assert_eq!(
            validate_meta(&m),
            Err(MetaViolation::Overlap { index: 1, at: 3 })
        );
    }

    #[test]
    fn bad_first_start_and_last_end() {
        let m = meta(&[(1, 6)], 7);
        assert_eq!(
            validate_meta(&m),
            Err(MetaViolation::FirstIntervalStart { start: 1 })
        );
        let m = meta(&[(0, 5)], 7);
        assert_eq!(
            validate_meta(&m),
            Err(MetaViolation::LastIntervalEnd {
                end: 5,
                expected: 6
            })
        );
    }

    #[test]
    fn every_vertex_maps_to_exactly_one_shard() {
        let m = meta(&[(0, 2), (3, 5), (6, 6)], 7);
        assert_eq!(validate_meta(&m), Ok(()));
        let mut prev = 0usize;
        for v in 0..7 {
            let k = owner_shard(&m, v).expect("covered");
            assert!(m.intervals[k].contains(v));
            // monotone non-decreasing in v
            assert!(k >= prev);
            prev = k;
        }
        assert_eq!(owner_shard(&m, 7), None);
    }
}
