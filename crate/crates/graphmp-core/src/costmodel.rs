//! Analytic per-iteration I/O cost of five out-of-core computation models.
//!
//! For a graph with `|V|` vertices and `|E|` edges split into `P` parts,
//! processed by `N` cores, with `C` bytes per vertex record and `D` bytes
//! per edge record, the models compare as:
//!
//! | model | data read              | data write        | memory              | preprocessing I/O |
//! |-------|------------------------|-------------------|---------------------|-------------------|
//! | PSW   | `C|V| + 2(C+D)|E|`     | `C|V| + 2(C+D)|E|`| `(C|V|+2(C+D)|E|)/P`| `(C+5D)|E|`       |
//! | ESG   | `C|V| + (C+D)|E|`      | `C|V| + C|E|`     | `C|V|/P`            | `2D|E|`           |
//! | VSP   | `C(1+δ)|V| + D|E|`     | `C|V|`            | `C(2+δ)|V|/P`       | `4D|E|`           |
//! | DSW   | `C√P|V| + D|E|`        | `C√P|V|`          | `2C|V|/√P`          | `6D|E|`           |
//! | VSW   | `θD|E|`                | `0`               | `2C|V| + ND|E|/P`   | `5D|E|`           |
//!
//! δ is the v-shard replication factor `(1 − e^(−d_avg/P))·P`; θ is the
//! fraction of shard bytes the sliding-window engine must read from disk
//! per steady-state iteration (0 when fully cached).
//!
//! PSW, ESG, VSP and DSW are the models of GraphChi, X-Stream, VENUS and
//! GridGraph respectively; they exist here only analytically.

use crate::engine::IterationStats;
use crate::error::{Error, Result};

/// Computation model under analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Psw,
    Esg,
    Vsp,
    Dsw,
    Vsw,
}

impl Model {
    pub const ALL: [Model; 5] = [Model::Psw, Model::Esg, Model::Vsp, Model::Dsw, Model::Vsw];

    pub fn name(self) -> &'static str {
        match self {
            Model::Psw => "PSW",
            Model::Esg => "ESG",
            Model::Vsp => "VSP",
            Model::Dsw => "DSW",
            Model::Vsw => "VSW",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Model parameters; all byte quantities and counts as reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Bytes per vertex record (C).
    pub vertex_bytes: f64,
    /// Bytes per edge record (D).
    pub edge_bytes: f64,
    /// |V|
    pub num_vertices: f64,
    /// |E|
    pub num_edges: f64,
    /// Shard / partition / block count (P).
    pub num_partitions: f64,
    /// Worker cores (N).
    pub workers: f64,
    /// Disk-read fraction of shard bytes per steady-state iteration.
    pub theta: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("C", self.vertex_bytes),
            ("D", self.edge_bytes),
            ("V", self.num_vertices),
            ("E", self.num_edges),
            ("P", self.num_partitions),
            ("N", self.workers),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvariantViolation(format!(
                    "cost parameter {name} must be positive, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvariantViolation(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }

    /// Average degree `|E| / |V|`.
    pub fn d_avg(&self) -> f64 {
        self.num_edges / self.num_vertices
    }

    /// v-shard replication factor `(1 − e^(−d_avg/P))·P`.
    pub fn delta(&self) -> f64 {
        (1.0 - (-self.d_avg() / self.num_partitions).exp()) * self.num_partitions
    }
}

/// One model's per-iteration byte costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub read_bytes: f64,
    pub write_bytes: f64,
    pub memory_bytes: f64,
    pub preprocess_io_bytes: f64,
}

/// Evaluates one model's row of the table above.
pub fn cost(model: Model, p: &CostParams) -> CostReport {
    let c = p.vertex_bytes;
    let d = p.edge_bytes;
    let v = p.num_vertices;
    let e = p.num_edges;
    let parts = p.num_partitions;
    let n = p.workers;
    match model {
        Model::Psw => CostReport {
            read_bytes: c * v + 2.0 * (c + d) * e,
            write_bytes: c * v + 2.0 * (c + d) * e,
            memory_bytes: (c * v + 2.0 * (c + d) * e) / parts,
            preprocess_io_bytes: (c + 5.0 * d) * e,
        },
        Model::Esg => CostReport {
            read_bytes: c * v + (c + d) * e,
            write_bytes: c * v + c * e,
            memory_bytes: c * v / parts,
            preprocess_io_bytes: 2.0 * d * e,
        },
        Model::Vsp => {
            let delta = p.delta();
            CostReport {
                read_bytes: c * (1.0 + delta) * v + d * e,
                write_bytes: c * v,
                memory_bytes: c * (2.0 + delta) * v / parts,
                preprocess_io_bytes: 4.0 * d * e,
            }
        }
        Model::Dsw => CostReport {
            read_bytes: c * parts.sqrt() * v + d * e,
            write_bytes: c * parts.sqrt() * v,
            memory_bytes: 2.0 * c * v / parts.sqrt(),
            preprocess_io_bytes: 6.0 * d * e,
        },
        Model::Vsw => CostReport {
            read_bytes: p.theta * d * e,
            write_bytes: 0.0,
            memory_bytes: 2.0 * c * v + n * d * e / parts,
            preprocess_io_bytes: 5.0 * d * e,
        },
    }
}

/// All five models evaluated at the same parameters.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub params: CostParams,
    pub rows: Vec<(Model, CostReport)>,
}

impl Comparison {
    /// Column-wise minima; ties share the minimum.
    pub fn minima(&self) -> CostReport {
        let fold = |get: fn(&CostReport) -> f64| {
            self.rows
                .iter()
                .map(|(_, r)| get(r))
                .fold(f64::INFINITY, f64::min)
        };
        CostReport {
            read_bytes: fold(|r| r.read_bytes),
            write_bytes: fold(|r| r.write_bytes),
            memory_bytes: fold(|r| r.memory_bytes),
            preprocess_io_bytes: fold(|r| r.preprocess_io_bytes),
        }
    }
}

/// Evaluates every model at `p`.
pub fn compare(p: &CostParams) -> Result<Comparison> {
    p.validate()?;
    Ok(Comparison {
        params: *p,
        rows: Model::ALL.iter().map(|&m| (m, cost(m, p))).collect(),
    })
}

/// Measured steady-state disk reads vs the sliding-window model's `θD|E|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDeviation {
    /// Mean bytes read from disk per steady-state iteration (iteration 1,
    /// which fills the cache, is excluded).
    pub measured_bytes: f64,
    pub model_bytes: f64,
    pub relative_error: f64,
}

/// Compares a run's measured per-iteration disk reads against the model.
pub fn measured_vs_model(stats: &[IterationStats], p: &CostParams) -> Result<ModelDeviation> {
    p.validate()?;
    if stats.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 iterations to reach steady state, got {}",
            stats.len()
        )));
    }
    let steady = &stats[1..];
    let measured_bytes =
        steady.iter().map(|s| s.bytes_read_disk as f64).sum::<f64>() / steady.len() as f64;
    let model_bytes = p.theta * p.edge_bytes * p.num_edges;
    let relative_error = if model_bytes == 0.0 {
        if measured_bytes == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (measured_bytes - model_bytes) / model_bytes
    };
    Ok(ModelDeviation {
        measured_bytes,
        model_bytes,
        relative_error,
    })
}
