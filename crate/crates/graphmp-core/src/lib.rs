//! Out-of-core graph analytics on a single machine.
//!
//! The crate preprocesses an edge list into destination-grouped CSR shards
//! and executes vertex-centric programs (PageRank, SSSP, CC) while keeping
//! every vertex value in memory and streaming edge shards from disk. Two
//! optimizations cut disk traffic further: Bloom-filter selective scheduling
//! skips shards with no active sources, and a compressed edge cache keeps as
//! many shards in memory as the budget allows. An analytic cost model
//! compares the engine's I/O profile against four published out-of-core
//! computation models.
//!
//! Typical flow:
//!
//! ```no_run
//! use graphmp_core::{apps::PageRank, engine, preprocess, storage::Dataset};
//!
//! # fn main() -> graphmp_core::Result<()> {
//! let opts = preprocess::PreprocessOptions::default();
//! preprocess::preprocess("edges.txt".as_ref(), "work".as_ref(), &opts)?;
//!
//! let dataset = Dataset::open("work".as_ref())?;
//! let outcome = engine::run(&dataset, &PageRank::default(), &engine::EngineOptions::default())?;
//! println!("converged after {} iterations", outcome.iterations.len());
//! # Ok(())
//! # }
//! ```

pub mod apps;
pub mod cache;
pub mod costmodel;
pub mod engine;
pub mod error;
pub mod graph;
pub mod preprocess;
pub mod scheduler;
pub mod storage;

pub use error::{Error, Result};
pub use graph::{DegreeTable, Edge, GraphMeta, Interval, VertexId};
