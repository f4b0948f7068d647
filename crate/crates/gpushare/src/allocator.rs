//! Allocation policies: demand-proportional adaptive allocation with minimum
//! floors, plus static-equal and round-robin baselines.
//!
//! Every policy is a pure function from (agents, current arrival rates,
//! capacity) to an [`Allocation`]; round-robin additionally takes the step
//! index as its externally supplied rotation state. The adaptive policy works
//! in three phases:
//!
//! 1. demand: `d_i = rate_i * min_gpu_fraction_i / priority_i`
//! 2. proportional share with floors: `g_i = max(min_gpu_fraction_i, d_i / d_total * capacity)`
//! 3. normalization: if the floored shares oversubscribe the GPU, scale all
//!    of them by `capacity / sum` — floors apply before normalization only,
//!    which is what degrades latency gracefully instead of starving anyone.
//!
//! All phases are single passes over the agents, so one allocation costs
//! O(N) time.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{AgentSpec, Allocation};
use crate::error::{Error, Result};

/// Per-agent demand scores and their total.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandVector {
    demands: Vec<f64>,
    total: f64,
}

impl DemandVector {
    pub fn demands(&self) -> &[f64] {
        &self.demands
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Identifier of an allocation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyId {
    Adaptive,
    StaticEqual,
    RoundRobin,
}

impl PolicyId {
    pub const ALL: [PolicyId; 3] = [PolicyId::Adaptive, PolicyId::StaticEqual, PolicyId::RoundRobin];

    pub fn name(self) -> &'static str {
        match self {
            PolicyId::Adaptive => "adaptive",
            PolicyId::StaticEqual => "static_equal",
            PolicyId::RoundRobin => "round_robin",
        }
    }

    /// Dispatches to the policy implementation.
    pub fn allocate(
        self,
        agents: &[AgentSpec],
        rates: &[f64],
        capacity: f64,
        step_index: usize,
    ) -> Result<Allocation> {
        match self {
            PolicyId::Adaptive => allocate_adaptive(agents, rates, capacity),
            PolicyId::StaticEqual => allocate_static_equal(agents, rates, capacity),
            PolicyId::RoundRobin => allocate_round_robin(agents, rates, capacity, step_index),
        }
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "adaptive" => Ok(PolicyId::Adaptive),
            "static_equal" => Ok(PolicyId::StaticEqual),
            "round_robin" => Ok(PolicyId::RoundRobin),
            other => Err(format!(
                "unknown policy '{other}'; valid policies: adaptive, static_equal, round_robin"
            )),
        }
    }
}

fn check_inputs(agents: &[AgentSpec], rates: &[f64], capacity: f64) -> Result<()> {
    if agents.is_empty() {
        return Err(Error::EmptyAgents);
    }
    if rates.len() != agents.len() {
        return Err(Error::LengthMismatch {
            expected: agents.len(),
            got: rates.len(),
        });
    }
    for (index, &rate) in rates.iter().enumerate() {
        if !rate.is_finite() {
            return Err(Error::NonFinite {
                what: "arrival rate",
                value: rate,
            });
        }
        if rate < 0.0 {
            return Err(Error::NegativeRate { index, value: rate });
        }
    }
    if !(capacity.is_finite() && capacity > 0.0) {
        return Err(Error::InvalidCapacity(capacity));
    }
    Ok(())
}

/// Computes the demand score of every agent: `d_i = rate_i * min_gpu_fraction_i / priority_i`.
///
/// A zero arrival rate yields zero demand regardless of floor and priority.
pub fn compute_demands(agents: &[AgentSpec], rates: &[f64]) -> Result<DemandVector> {
    check_inputs(agents, rates, 1.0)?;
    let demands: Vec<f64> = agents
        .iter()
        .zip(rates)
        .map(|(agent, &rate)| rate * agent.min_gpu_fraction / f64::from(agent.priority))
        .collect();
    let total = demands.iter().sum();
    Ok(DemandVector { demands, total })
}

/// Adaptive allocation: demand-proportional shares with per-agent floors,
/// normalized back to capacity when the floors oversubscribe it.
///
/// With zero total demand every agent gets exactly zero.
pub fn allocate_adaptive(agents: &[AgentSpec], rates: &[f64], capacity: f64) -> Result<Allocation> {
    check_inputs(agents, rates, capacity)?;
    let demand = compute_demands(agents, rates)?;

    if demand.total() == 0.0 {
        return Allocation::new(vec![0.0; agents.len()], capacity);
    }

    let mut fractions: Vec<f64> = agents
        .iter()
        .zip(demand.demands())
        .map(|(agent, &d)| {
            let proportional = d / demand.total() * capacity;
            agent.min_gpu_fraction.max(proportional)
        })
        .collect();

    let allocated: f64 = fractions.iter().sum();
    if allocated > capacity {
        for g in &mut fractions {
            *g = *g / allocated * capacity;
        }
    }

    Allocation::new(fractions, capacity)
}

/// Static-equal baseline: each of the N agents gets `capacity / N`,
/// independent of arrival rates.
pub fn allocate_static_equal(
    agents: &[AgentSpec],
    rates: &[f64],
    capacity: f64,
) -> Result<Allocation> {
    check_inputs(agents, rates, capacity)?;
    let share = capacity / agents.len() as f64;
    Allocation::new(vec![share; agents.len()], capacity)
}

/// Round-robin baseline: the agent at `step_index mod N` gets the whole
/// GPU for this timestep; everyone else gets zero. Agents take turns in
/// config order.
pub fn allocate_round_robin(
    agents: &[AgentSpec],
    rates: &[f64],
    capacity: f64,
    step_index: usize,
) -> Result<Allocation> {
    check_inputs(agents, rates, capacity)?;
    let mut fractions = vec![0.0; agents.len()];
    fractions[step_index % agents.len()] = capacity;
    Allocation::new(fractions, capacity)
}

/// Requests/second an agent sustains at fraction `g`: throughput scales
/// proportionally with the allocated GPU share.
pub fn effective_service_rate(agent: &AgentSpec, g: f64) -> Result<f64> {
    if !g.is_finite() || !(0.0..=1.0).contains(&g) {
        return Err(Error::FractionOutOfRange(g));
    }
    Ok(g * agent.base_throughput_rps)
}
