//! Shared fixtures for integration tests: seeded graph generators, reference
//! oracles (single-threaded PageRank, Dijkstra, union-find) and preprocess
//! helpers. The oracles work from raw edge lists and share no code with the
//! shard/engine path they check.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use graphmp_core::preprocess::{preprocess, InputFormat, PreprocessOptions};
use graphmp_core::storage::Dataset;

#[derive(Debug, Clone)]
pub struct TestGraph {
    pub num_vertices: u64,
    /// (src, dst, weight); weight is 1 for unweighted graphs.
    pub edges: Vec<(u64, u64, u64)>,
    pub weighted: bool,
}

impl TestGraph {
    pub fn write_text(&self, path: &Path) {
        let mut out = String::new();
        for &(s, d, w) in &self.edges {
            if self.weighted {
                out.push_str(&format!("{s} {d} {w}\n"));
            } else {
                out.push_str(&format!("{s} {d}\n"));
            }
        }
        fs::write(path, out).unwrap();
    }

    pub fn write_binary(&self, path: &Path) {
        let record = if self.weighted { 24 } else { 16 };
        let mut out = Vec::with_capacity(self.edges.len() * record);
        for &(s, d, w) in &self.edges {
            out.extend_from_slice(&s.to_le_bytes());
            out.extend_from_slice(&d.to_le_bytes());
            if self.weighted {
                out.extend_from_slice(&(w as f64).to_le_bytes());
            }
        }
        fs::write(path, out).unwrap();
    }

    /// Unweighted view of the edge list.
    pub fn pairs(&self) -> Vec<(u64, u64)> {
        self.edges.iter().map(|&(s, d, _)| (s, d)).collect()
    }
}

/// Pads the edge list with self-loops so every ID in `[0, n)` appears and
/// preprocessing never remaps; self-loops change no oracle's answer shape.
fn pad_unseen(num_vertices: u64, edges: &mut Vec<(u64, u64, u64)>) {
    let mut seen = vec![false; num_vertices as usize];
    for &(s, d, _) in edges.iter() {
        seen[s as usize] = true;
        seen[d as usize] = true;
    }
    for (v, seen) in seen.iter().enumerate() {
        if !seen {
            edges.push((v as u64, v as u64, 1));
        }
    }
}

pub fn random_graph(seed: u64, num_vertices: u64, num_edges: u64) -> TestGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(num_edges as usize);
    for _ in 0..num_edges {
        let s = rng.random_range(0..num_vertices);
        let d = rng.random_range(0..num_vertices);
        edges.push((s, d, 1));
    }
    pad_unseen(num_vertices, &mut edges);
    TestGraph {
        num_vertices,
        edges,
        weighted: false,
    }
}

pub fn random_weighted_graph(seed: u64, num_vertices: u64, num_edges: u64) -> TestGraph {
    let mut g = random_graph(seed, num_vertices, num_edges);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for e in &mut g.edges {
        e.2 = rng.random_range(1..=10);
    }
    g.weighted = true;
    g
}

/// Zipf-distributed destinations over uniform sources: a few vertices absorb
/// most in-edges, like a web graph.
pub fn power_law_graph(seed: u64, num_vertices: u64, num_edges: u64) -> TestGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = rand_distr::Zipf::new(num_vertices as f64, 1.1).unwrap();
    let mut edges = Vec::with_capacity(num_edges as usize);
    for _ in 0..num_edges {
        let s = rng.random_range(0..num_vertices);
        let d = (zipf.sample(&mut rng) as u64 - 1).min(num_vertices - 1);
        edges.push((s, d, 1));
    }
    pad_unseen(num_vertices, &mut edges);
    TestGraph {
        num_vertices,
        edges,
        weighted: false,
    }
}

/// Writes the graph and preprocesses it under `dir`, returning the opened
/// dataset.
pub fn prepare(graph: &TestGraph, dir: &Path, threshold: u64, symmetrize: bool) -> Dataset {
    fs::create_dir_all(dir).unwrap();
    let input = dir.join("edges.txt");
    graph.write_text(&input);
    let work = dir.join("work");
    let opts = PreprocessOptions {
        threshold_edge_num: threshold,
        weighted: graph.weighted,
        symmetrize,
        format: InputFormat::Text,
        ..Default::default()
    };
    preprocess(&input, &work, &opts).unwrap();
    Dataset::open(&work).unwrap()
}

pub fn workdir_of(dataset: &Dataset) -> PathBuf {
    dataset.dir.clone()
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Single-threaded PageRank over the raw edge list with the same formula and
/// the same ascending-source accumulation order as the engine.
pub fn pagerank_reference(
    num_vertices: u64,
    edges: &[(u64, u64)],
    iterations: u32,
    teleport: f64,
    damping: f64,
) -> Vec<f64> {
    let n = num_vertices as usize;
    let mut out_degree = vec![0u64; n];
    for &(s, _) in edges {
        out_degree[s as usize] += 1;
    }
    let mut in_adj: Vec<(u64, u64)> = edges.iter().map(|&(s, d)| (d, s)).collect();
    in_adj.sort_unstable();
    let mut starts = vec![0usize; n + 1];
    for &(d, _) in &in_adj {
        starts[d as usize + 1] += 1;
    }
    for v in 1..=n {
        starts[v] += starts[v - 1];
    }

    let mut src = vec![1.0 / n as f64; n];
    let mut dst = vec![0.0f64; n];
    for _ in 0..iterations {
        for v in 0..n {
            let mut sum = 0.0;
            for &(_, u) in &in_adj[starts[v]..starts[v + 1]] {
                sum += src[u as usize] / out_degree[u as usize] as f64;
            }
            dst[v] = teleport / n as f64 + damping * sum;
        }
        std::mem::swap(&mut src, &mut dst);
    }
    src
}

/// Dijkstra over the raw weighted edge list; `u64::MAX` marks unreachable.
pub fn dijkstra(num_vertices: u64, edges: &[(u64, u64, u64)], source: u64) -> Vec<u64> {
    let n = num_vertices as usize;
    let mut adj: Vec<Vec<(u64, u64)>> = vec![Vec::new(); n];
    for &(s, d, w) in edges {
        adj[s as usize].push((d, w));
    }
    let mut dist = vec![u64::MAX; n];
    dist[source as usize] = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v as usize] {
            continue;
        }
        for &(to, w) in &adj[v as usize] {
            let nd = d.saturating_add(w);
            if nd < dist[to as usize] {
                dist[to as usize] = nd;
                heap.push(Reverse((nd, to)));
            }
        }
    }
    dist
}

/// Union-find connected components over the edge list treated as undirected;
/// returns per-vertex labels where each label is the smallest vertex ID in
/// the component.
pub fn cc_reference(num_vertices: u64, edges: &[(u64, u64)]) -> Vec<u64> {
    struct Dsu(Vec<usize>);
    impl Dsu {
        fn find(&mut self, v: usize) -> usize {
            if self.0[v] != v {
                let root = self.find(self.0[v]);
                self.0[v] = root;
            }
            self.0[v]
        }

        fn union(&mut self, a: usize, b: usize) {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra != rb {
                self.0[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let n = num_vertices as usize;
    let mut dsu = Dsu((0..n).collect());
    for &(s, d) in edges {
        dsu.union(s as usize, d as usize);
    }
    // roots are minimal by the union rule above
    (0..n).map(|v| dsu.find(v) as u64).collect()
}

/// Partition equality irrespective of label values.
pub fn same_partition(a: &[u64], b: &[u64]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: HashMap<u64, u64> = HashMap::new();
    let mut bwd: HashMap<u64, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if *fwd.entry(x).or_insert(y) != y {
            return false;
        }
        if *bwd.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

/// Bit pattern of a value-slot vector, for exact comparisons.
pub fn f64_bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}
