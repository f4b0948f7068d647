//! Deterministic discrete-time simulator and allocation-policy library for
//! serving multiple model-backed agents on one fractionally shared GPU.
//!
//! The GPU's compute is split into per-agent fractions each timestep by a
//! pluggable policy: an adaptive demand-proportional allocator with minimum
//! floors, or the static-equal and round-robin baselines. A fluid-queue
//! engine turns a workload trace into per-step records and aggregate
//! latency/throughput/cost metrics, and the report module exports CSV and
//! JSON artifacts plus a policy-comparison table.
//!
//! Start with the runnable programs under `examples/`; the `gpushare` binary
//! wraps the same functionality as `run`, `compare`, `scenario` and `bench`
//! subcommands.
//!
//! ```
//! use gpushare::allocator::allocate_adaptive;
//! use gpushare::domain::AgentSpec;
//!
//! let agents = vec![
//!     AgentSpec {
//!         id: 0,
//!         name: "coordinator".into(),
//!         model_size_mb: 500.0,
//!         base_throughput_rps: 100.0,
//!         min_gpu_fraction: 0.10,
//!         priority: 1,
//!     },
//!     AgentSpec {
//!         id: 1,
//!         name: "specialist".into(),
//!         model_size_mb: 3000.0,
//!         base_throughput_rps: 30.0,
//!         min_gpu_fraction: 0.35,
//!         priority: 1,
//!     },
//! ];
//! let allocation = allocate_adaptive(&agents, &[80.0, 25.0], 1.0).unwrap();
//! assert!((allocation.sum() - 1.0).abs() < 1e-9);
//! ```

pub mod allocator;
pub mod cli;
pub mod domain;
pub mod engine;
pub mod error;
pub mod report;
pub mod workload;

pub use allocator::PolicyId;
pub use domain::{AgentSpec, Allocation, GpuSpec, ObjectiveWeights, Usd, WorkloadTrace};
pub use engine::{RunSummary, SimConfig, SimState, TimestepRecord};
pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod test_util {
    use crate::domain::{AgentSpec, GpuSpec};

    /// The bundled four-agent reference system (see `configs/paper.json`).
    pub fn reference_agents() -> Vec<AgentSpec> {
        vec![
            AgentSpec {
                id: 0,
                name: "coordinator".into(),
                model_size_mb: 500.0,
                base_throughput_rps: 100.0,
                min_gpu_fraction: 0.10,
                priority: 1,
            },
            AgentSpec {
                id: 1,
                name: "specialist-nlp".into(),
                model_size_mb: 2000.0,
                base_throughput_rps: 50.0,
                min_gpu_fraction: 0.30,
                priority: 2,
            },
            AgentSpec {
                id: 2,
                name: "specialist-vision".into(),
                model_size_mb: 1500.0,
                base_throughput_rps: 60.0,
                min_gpu_fraction: 0.25,
                priority: 2,
            },
            AgentSpec {
                id: 3,
                name: "specialist-reasoning".into(),
                model_size_mb: 3000.0,
                base_throughput_rps: 30.0,
                min_gpu_fraction: 0.35,
                priority: 1,
            },
        ]
    }

    pub fn reference_gpu() -> GpuSpec {
        GpuSpec {
            total_capacity: 1.0,
            memory_mb: 16_384.0,
            price_per_hour_usd: 0.72,
        }
    }

    pub fn reference_rates() -> [f64; 4] {
        [80.0, 40.0, 45.0, 25.0]
    }

    /// Adaptive allocation on the reference system, frozen from hand
    /// execution of the three policy phases: demands (8.0, 6.0, 5.625,
    /// 8.75), floored shares (0.28194, 0.30, 0.25, 0.35) summing to
    /// 1.18194, then normalization.
    pub const EXPECTED_ADAPTIVE_ALLOCATION: [f64; 4] = [
        0.2385389489377563,
        0.2538203503540813,
        0.21151695862840106,
        0.2961237420797615,
    ];
}
