//! The shipped vertex programs: PageRank, single-source shortest paths and
//! weakly connected components.
//!
//! All three pull values from their in-neighbors, so SSSP and CC follow
//! in-edges; CC therefore expects a symmetrized dataset (preprocess with
//! `symmetrize` on). Each accumulation walks the in-adjacency in ascending
//! source order, which makes PageRank's floating-point results reproducible
//! across runs and worker counts.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::engine::{InEdges, ProgramContext, VertexProgram};
use crate::error::{Error, Result};
use crate::graph::VertexId;

/// Unreachable-distance sentinel for SSSP.
pub const INFINITE_DISTANCE: u64 = u64::MAX;

/// Rank slots: `rank(v) = teleport/|V| + damping * Σ src[u]/d_out(u)` over
/// the in-neighbors of `v`.
#[derive(Debug, Clone)]
pub struct PageRank {
    pub teleport: f64,
    pub damping: f64,
    /// Change-detection tolerance. `None` compares stored values for exact
    /// inequality, which keeps termination well-defined.
    pub epsilon: Option<f64>,
}

impl Default for PageRank {
    fn default() -> Self {
        PageRank {
            teleport: 0.15,
            damping: 0.85,
            epsilon: None,
        }
    }
}

impl VertexProgram for PageRank {
    type Value = f64;

    fn init(
        &self,
        src_values: &mut [f64],
        dst_values: &mut [f64],
        active: &mut [bool],
        ctx: &ProgramContext<'_>,
    ) {
        let initial = 1.0 / ctx.num_vertices as f64;
        src_values.fill(initial);
        dst_values.fill(initial);
        active.fill(true);
    }

    fn update(
        &self,
        vertex: VertexId,
        in_edges: InEdges<'_>,
        src_values: &[f64],
        ctx: &ProgramContext<'_>,
    ) -> Result<(f64, bool)> {
        let mut sum = 0.0;
        for &u in in_edges.sources {
            let out_degree = ctx.degrees.out_degree[u as usize];
            // a source appearing in an adjacency list has at least one
            // out-edge by construction
            debug_assert!(out_degree > 0);
            sum += src_values[u as usize] / out_degree as f64;
        }
        let new = self.teleport / ctx.num_vertices as f64 + self.damping * sum;
        let old = src_values[vertex as usize];
        let changed = match self.epsilon {
            None => new != old,
            Some(eps) => (new - old).abs() > eps,
        };
        Ok((new, changed))
    }
}

/// Distance slots: integer distances with `u64::MAX` as infinity. Only the
/// source starts active; distances never increase.
#[derive(Debug, Clone)]
pub struct Sssp {
    /// Dense ID of the source vertex.
    pub source: VertexId,
}

impl Sssp {
    pub fn new(source: VertexId) -> Self {
        Sssp { source }
    }

    fn edge_distance(in_edges: &InEdges<'_>, i: usize, weighted: bool) -> u64 {
        if !weighted {
            return 1;
        }
        let w = in_edges.weight(i);
        if w.fract() != 0.0 {
            warn_fractional_weights();
        }
        w.round() as u64
    }
}

static FRACTIONAL_WARNED: AtomicBool = AtomicBool::new(false);

fn warn_fractional_weights() {
    if !FRACTIONAL_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("fractional edge weights are rounded to integers for SSSP");
    }
}

impl VertexProgram for Sssp {
    type Value = u64;

    fn check(&self, ctx: &ProgramContext<'_>) -> Result<()> {
        if self.source >= ctx.num_vertices {
            return Err(Error::VertexOutOfRange {
                id: self.source,
                num_vertices: ctx.num_vertices,
            });
        }
        Ok(())
    }

    fn init(
        &self,
        src_values: &mut [u64],
        dst_values: &mut [u64],
        active: &mut [bool],
        _ctx: &ProgramContext<'_>,
    ) {
        src_values.fill(INFINITE_DISTANCE);
        src_values[self.source as usize] = 0;
        dst_values.copy_from_slice(src_values);
        active.fill(false);
        active[self.source as usize] = true;
    }

    fn update(
        &self,
        vertex: VertexId,
        in_edges: InEdges<'_>,
        src_values: &[u64],
        ctx: &ProgramContext<'_>,
    ) -> Result<(u64, bool)> {
        let mut d = INFINITE_DISTANCE;
        for (i, &u) in in_edges.sources.iter().enumerate() {
            let w = Self::edge_distance(&in_edges, i, ctx.weighted);
            d = d.min(src_values[u as usize].saturating_add(w));
        }
        let old = src_values[vertex as usize];
        let new = d.min(old);
        Ok((new, new != old))
    }

    fn format_value(&self, value: &u64) -> String {
        if *value == INFINITE_DISTANCE {
            "inf".to_string()
        } else {
            value.to_string()
        }
    }
}

/// Label slots: every vertex starts as its own component ID and adopts the
/// minimum label among itself and its in-neighbors until no label moves. On
/// a symmetrized graph the fixpoint label of `v` is the smallest vertex ID
/// in `v`'s component.
#[derive(Debug, Clone, Default)]
pub struct ConnectedComponents;

impl VertexProgram for ConnectedComponents {
    type Value = u64;

    fn init(
        &self,
        src_values: &mut [u64],
        dst_values: &mut [u64],
        active: &mut [bool],
        _ctx: &ProgramContext<'_>,
    ) {
        for (i, v) in src_values.iter_mut().enumerate() {
            *v = i as u64;
        }
        dst_values.copy_from_slice(src_values);
        active.fill(true);
    }

    fn update(
        &self,
        vertex: VertexId,
        in_edges: InEdges<'_>,
        src_values: &[u64],
        _ctx: &ProgramContext<'_>,
    ) -> Result<(u64, bool)> {
        let mut label = u64::MAX;
        for &u in in_edges.sources {
            label = label.min(src_values[u as usize]);
        }
        let old = src_values[vertex as usize];
        let new = label.min(old);
        Ok((new, new != old))
    }
}
