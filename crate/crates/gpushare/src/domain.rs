//! Core data model: agent profiles, GPU spec, workload traces, allocations,
//! objective weights and money.
//!
//! All types here are immutable value types and safe to share or copy across
//! threads. Agent count is unbounded; every per-agent quantity is a
//! dynamically sized vector indexed in agent (config) order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for capacity-constraint checks. Normalization divides
/// by a floating-point sum, so an allocation may overshoot capacity by a few
/// ulps.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

/// Static profile of one serving agent.
///
/// `base_throughput_rps` is the request rate the agent sustains at 100% GPU;
/// effective throughput scales proportionally with its allocated fraction.
/// `min_gpu_fraction` is the pre-normalization floor the agent receives
/// whenever it has any demand. `priority` is 1 (high) to 3 (low); lower
/// values weigh demand more heavily.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: u32,
    pub name: String,
    pub model_size_mb: f64,
    pub base_throughput_rps: f64,
    pub min_gpu_fraction: f64,
    pub priority: u8,
}

/// The shared GPU: normalized compute capacity, memory, hourly price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpuSpec {
    #[serde(default = "default_total_capacity")]
    pub total_capacity: f64,
    pub memory_mb: f64,
    pub price_per_hour_usd: f64,
}

fn default_total_capacity() -> f64 {
    1.0
}

/// Per-timestep, per-agent request arrival rates.
///
/// Row `t` holds the arrival rate (requests/second) of every agent during
/// timestep `t`. Construction validates the matrix shape and non-negativity;
/// the type is immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadTrace {
    duration_steps: usize,
    timestep_seconds: f64,
    rates: Vec<Vec<f64>>,
}

impl WorkloadTrace {
    /// Builds a trace from a `[step][agent]` rate matrix.
    pub fn new(rates: Vec<Vec<f64>>, timestep_seconds: f64) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidTrace("trace has zero timesteps".into()));
        }
        if !(timestep_seconds.is_finite() && timestep_seconds > 0.0) {
            return Err(Error::InvalidTrace(format!(
                "timestep_seconds must be finite and positive, got {timestep_seconds}"
            )));
        }
        let num_agents = rates[0].len();
        if num_agents == 0 {
            return Err(Error::InvalidTrace("trace has zero agents".into()));
        }
        for (step, row) in rates.iter().enumerate() {
            if row.len() != num_agents {
                return Err(Error::InvalidTrace(format!(
                    "row {step} has {} columns, expected {num_agents}",
                    row.len()
                )));
            }
            for (agent, &rate) in row.iter().enumerate() {
                if !rate.is_finite() || rate < 0.0 {
                    return Err(Error::InvalidTrace(format!(
                        "rate at step {step}, agent {agent} is {rate}; must be finite and >= 0"
                    )));
                }
            }
        }
        Ok(Self {
            duration_steps: rates.len(),
            timestep_seconds,
            rates,
        })
    }

    pub fn duration_steps(&self) -> usize {
        self.duration_steps
    }

    pub fn timestep_seconds(&self) -> f64 {
        self.timestep_seconds
    }

    pub fn num_agents(&self) -> usize {
        self.rates[0].len()
    }

    /// Total simulated wall time in seconds.
    pub fn duration_seconds(&self) -> f64 {
        self.duration_steps as f64 * self.timestep_seconds
    }

    /// Arrival rates for one timestep.
    pub fn rates_at(&self, step: usize) -> &[f64] {
        &self.rates[step]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rates
    }
}

/// One timestep's GPU-fraction vector over agents.
///
/// Invariant: every fraction is non-negative and the sum does not exceed
/// `total_capacity` beyond [`CAPACITY_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    fractions: Vec<f64>,
    total_capacity: f64,
}

impl Allocation {
    pub fn new(fractions: Vec<f64>, total_capacity: f64) -> Result<Self> {
        if !(total_capacity.is_finite() && total_capacity > 0.0) {
            return Err(Error::InvalidCapacity(total_capacity));
        }
        let mut sum = 0.0;
        for &g in &fractions {
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    what: "allocation fraction",
                    value: g,
                });
            }
            if g < 0.0 {
                return Err(Error::FractionOutOfRange(g));
            }
            sum += g;
        }
        if sum > total_capacity + CAPACITY_TOLERANCE {
            return Err(Error::CapacityExceeded {
                sum,
                capacity: total_capacity,
            });
        }
        Ok(Self {
            fractions,
            total_capacity,
        })
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn total_capacity(&self) -> f64 {
        self.total_capacity
    }

    pub fn get(&self, agent: usize) -> f64 {
        self.fractions[agent]
    }

    pub fn sum(&self) -> f64 {
        self.fractions.iter().sum()
    }
}

/// Weights of the scalar objective: `alpha * latency + beta * cost - gamma * throughput`.
///
/// No blessed defaults exist; callers must choose weights for their workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Money in exact decimal units (10^-5 USD), so rendered values never carry
/// binary-float artifacts. Display rounds to 3 decimals, e.g. `$0.020`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Usd(i64);

impl Usd {
    pub const ZERO: Usd = Usd(0);

    /// Scale of the fixed-point representation: units per dollar.
    const UNITS_PER_DOLLAR: f64 = 100_000.0;

    /// Converts a dollar amount, rounding to the nearest 10^-5 USD.
    pub fn from_dollars(dollars: f64) -> Result<Self> {
        if !dollars.is_finite() {
            return Err(Error::NonFinite {
                what: "dollar amount",
                value: dollars,
            });
        }
        Ok(Usd((dollars * Self::UNITS_PER_DOLLAR).round() as i64))
    }

    /// Whole-GPU billing: hourly price times wall duration, independent of
    /// how fractions are split across agents.
    pub fn billing(price_per_hour_usd: f64, duration_s: f64) -> Result<Self> {
        Self::from_dollars(price_per_hour_usd * duration_s / 3600.0)
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 / Self::UNITS_PER_DOLLAR
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl fmt::Display for Usd {
    /// Renders as dollars with 3 decimals: `$0.020`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        // Round 10^-5-dollar units to milli-dollars for display.
        let milli = (self.0.unsigned_abs() + 50) / 100;
        write!(f, "{sign}${}.{:03}", milli / 1000, milli % 1000)
    }
}

impl Serialize for Usd {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_dollars())
    }
}

impl<'de> Deserialize<'de> for Usd {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let dollars = f64::deserialize(deserializer)?;
        Usd::from_dollars(dollars).map_err(serde::de::Error::custom)
    }
}

/// A single violated invariant found by [`validate_system`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyAgentList,
    NonPositiveModelSize { agent_id: u32, value: f64 },
    NonPositiveThroughput { agent_id: u32, value: f64 },
    FloorOutOfRange { agent_id: u32, value: f64 },
    InvalidPriority { agent_id: u32, value: u8 },
    DuplicateAgentId { agent_id: u32 },
    GpuMemoryExceeded { required_mb: f64, available_mb: f64 },
    InvalidGpu { message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyAgentList => write!(f, "agent list is empty"),
            Violation::NonPositiveModelSize { agent_id, value } => {
                write!(f, "agent {agent_id}: model_size_mb {value} must be > 0")
            }
            Violation::NonPositiveThroughput { agent_id, value } => {
                write!(f, "agent {agent_id}: base_throughput_rps {value} must be > 0")
            }
            Violation::FloorOutOfRange { agent_id, value } => {
                write!(f, "agent {agent_id}: min_gpu_fraction {value} must be in (0, 1]")
            }
            Violation::InvalidPriority { agent_id, value } => {
                write!(f, "agent {agent_id}: priority {value} must be 1, 2 or 3")
            }
            Violation::DuplicateAgentId { agent_id } => {
                write!(f, "agent id {agent_id} appears more than once")
            }
            Violation::GpuMemoryExceeded {
                required_mb,
                available_mb,
            } => write!(
                f,
                "models need {required_mb} MB but the GPU has {available_mb} MB"
            ),
            Violation::InvalidGpu { message } => write!(f, "gpu: {message}"),
        }
    }
}

/// Checks every agent invariant plus memory feasibility: the resident models
/// must fit in GPU memory together (all models stay loaded; nothing is
/// swapped between timesteps).
///
/// Returns all violations found, not just the first.
pub fn validate_system(
    agents: &[AgentSpec],
    gpu: &GpuSpec,
) -> std::result::Result<(), Vec<Violation>> {
    let mut violations = Vec::new();

    if agents.is_empty() {
        violations.push(Violation::EmptyAgentList);
    }

    if !(gpu.total_capacity.is_finite() && gpu.total_capacity > 0.0) {
        violations.push(Violation::InvalidGpu {
            message: format!("total_capacity {} must be > 0", gpu.total_capacity),
        });
    }
    if !(gpu.memory_mb.is_finite() && gpu.memory_mb > 0.0) {
        violations.push(Violation::InvalidGpu {
            message: format!("memory_mb {} must be > 0", gpu.memory_mb),
        });
    }
    if !(gpu.price_per_hour_usd.is_finite() && gpu.price_per_hour_usd >= 0.0) {
        violations.push(Violation::InvalidGpu {
            message: format!("price_per_hour_usd {} must be >= 0", gpu.price_per_hour_usd),
        });
    }

    let mut seen_ids = std::collections::BTreeSet::new();
    let mut total_model_mb = 0.0;
    for agent in agents {
        if !(agent.model_size_mb.is_finite() && agent.model_size_mb > 0.0) {
            violations.push(Violation::NonPositiveModelSize {
                agent_id: agent.id,
                value: agent.model_size_mb,
            });
        }
        if !(agent.base_throughput_rps.is_finite() && agent.base_throughput_rps > 0.0) {
            violations.push(Violation::NonPositiveThroughput {
                agent_id: agent.id,
                value: agent.base_throughput_rps,
            });
        }
        if !(agent.min_gpu_fraction.is_finite()
            && agent.min_gpu_fraction > 0.0
            && agent.min_gpu_fraction <= 1.0)
        {
            violations.push(Violation::FloorOutOfRange {
                agent_id: agent.id,
                value: agent.min_gpu_fraction,
            });
        }
        if !(1..=3).contains(&agent.priority) {
            violations.push(Violation::InvalidPriority {
                agent_id: agent.id,
                value: agent.priority,
            });
        }
        if !seen_ids.insert(agent.id) {
            violations.push(Violation::DuplicateAgentId { agent_id: agent.id });
        }
        total_model_mb += agent.model_size_mb;
    }

    if !agents.is_empty() && gpu.memory_mb.is_finite() && total_model_mb > gpu.memory_mb {
        violations.push(Violation::GpuMemoryExceeded {
            required_mb: total_model_mb,
            available_mb: gpu.memory_mb,
        });
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_agents() -> Vec<AgentSpec> {
        crate::test_util::reference_agents()
    }

    pub(crate) fn reference_gpu() -> GpuSpec {
        crate::test_util::reference_gpu()
    }

    #[test]
    fn reference_system_is_valid() {
        // 500 + 2000 + 1500 + 3000 = 7000 MB fits in 16384 MB.
        assert!(validate_system(&reference_agents(), &reference_gpu()).is_ok());
    }

    #[test]
    fn zero_floor_is_invalid() {
        let mut agents = reference_agents();
        agents[0].min_gpu_fraction = 0.0;
        let violations = validate_system(&agents, &reference_gpu()).unwrap_err();
        assert!(matches!(
            violations[0],
            Violation::FloorOutOfRange { agent_id: 0, .. }
        ));
    }

    #[test]
    fn models_exceeding_memory_are_rejected() {
        let agents = vec![
            AgentSpec {
                id: 0,
                name: "a".into(),
                model_size_mb: 10_000.0,
                base_throughput_rps: 10.0,
                min_gpu_fraction: 0.5,
                priority: 1,
            },
            AgentSpec {
                id: 1,
                name: "b".into(),
                model_size_mb: 10_000.0,
                base_throughput_rps: 10.0,
                min_gpu_fraction: 0.5,
                priority: 1,
            },
        ];
        let violations = validate_system(&agents, &reference_gpu()).unwrap_err();
        assert_eq!(
            violations,
            vec![Violation::GpuMemoryExceeded {
                required_mb: 20_000.0,
                available_mb: 16_384.0
            }]
        );
    }

    #[test]
    fn empty_agent_list_is_an_error() {
        let violations = validate_system(&[], &reference_gpu()).unwrap_err();
        assert!(violations.contains(&Violation::EmptyAgentList));
    }

    #[test]
    fn all_violations_are_reported() {
        let agents = vec![AgentSpec {
            id: 7,
            name: "broken".into(),
            model_size_mb: -1.0,
            base_throughput_rps: 0.0,
            min_gpu_fraction: 1.5,
            priority: 4,
        }];
        let violations = validate_system(&agents, &reference_gpu()).unwrap_err();
        assert_eq!(violations.len(), 4);
        for v in &violations {
            assert!(v.to_string().contains('7'), "violation names the agent: {v}");
        }
    }

    #[test]
    fn reference_floors_sum_to_exactly_one() {
        // The reference system is exactly fully subscribed at its floors.
        let sum: f64 = reference_agents().iter().map(|a| a.min_gpu_fraction).sum();
        assert_eq!(sum, 1.0);
    }

    #[test]
    fn trace_shape_is_validated() {
        assert!(WorkloadTrace::new(vec![], 1.0).is_err());
        assert!(WorkloadTrace::new(vec![vec![]], 1.0).is_err());
        assert!(WorkloadTrace::new(vec![vec![1.0], vec![1.0, 2.0]], 1.0).is_err());
        assert!(WorkloadTrace::new(vec![vec![1.0, -2.0]], 1.0).is_err());
        assert!(WorkloadTrace::new(vec![vec![1.0, 2.0]], 0.0).is_err());
        let trace = WorkloadTrace::new(vec![vec![1.0, 2.0]; 3], 0.5).unwrap();
        assert_eq!(trace.duration_steps(), 3);
        assert_eq!(trace.num_agents(), 2);
        assert_eq!(trace.duration_seconds(), 1.5);
    }

    #[test]
    fn allocation_rejects_capacity_overrun() {
        assert!(Allocation::new(vec![0.6, 0.5], 1.0).is_err());
        assert!(Allocation::new(vec![-0.1, 0.5], 1.0).is_err());
        assert!(Allocation::new(vec![0.5, 0.5], 1.0).is_ok());
        // Overshoot inside the tolerance is accepted.
        assert!(Allocation::new(vec![0.5, 0.5 + 0.5e-9], 1.0).is_ok());
    }

    #[test]
    fn usd_display_rounds_to_three_decimals() {
        assert_eq!(Usd::billing(0.72, 100.0).unwrap().to_string(), "$0.020");
        assert_eq!(Usd::billing(0.72, 3600.0).unwrap().to_string(), "$0.720");
        assert_eq!(Usd::from_dollars(1.2345).unwrap().to_string(), "$1.235");
        assert_eq!(Usd::from_dollars(0.0).unwrap().to_string(), "$0.000");
        assert_eq!(Usd::from_dollars(-0.25).unwrap().to_string(), "-$0.250");
    }

    #[test]
    fn usd_json_round_trip_is_exact() {
        let cost = Usd::billing(0.72, 100.0).unwrap();
        let json = serde_json::to_string(&cost).unwrap();
        assert_eq!(json, "0.02");
        let back: Usd = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cost);
    }
}
