//! Discrete-time simulation loop: arrivals, allocation, proportional
//! service, queue update, metric sampling.
//!
//! Queues are fluid (fractional requests). Each timestep runs, per agent:
//!
//! 1. queue += rate * dt                       (arrivals)
//! 2. g = policy(agents, rates, capacity, step)
//! 3. served = min(queue, g * base_rps * dt)   (proportional service)
//! 4. queue -= served
//! 5. latency = queue / (max(g, floor) * base_rps)
//!
//! The latency sample is the time the post-service backlog would take to
//! drain at the instantaneous service rate. The measurement floor keeps the
//! sample finite on zero-allocation steps (round-robin's idle turns); service
//! itself is still zero there.
//!
//! A run is strictly sequential (step t+1 depends on t) and owns no shared
//! state, so distinct runs can execute in parallel, and identical configs
//! produce bit-identical records.

use serde::{Deserialize, Serialize};

use crate::allocator::PolicyId;
use crate::domain::{
    validate_system, AgentSpec, GpuSpec, ObjectiveWeights, Usd, WorkloadTrace,
};
use crate::error::{Error, Result};

/// Default measurement floor: latency samples on zero-allocation steps are
/// taken as if the agent held 3% of the GPU.
pub const DEFAULT_LATENCY_FLOOR: f64 = 0.03;

/// Everything one simulation run needs.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub agents: Vec<AgentSpec>,
    pub gpu: GpuSpec,
    pub trace: WorkloadTrace,
    pub policy: PolicyId,
    /// Minimum fraction used only in the latency denominator, in (0, 1].
    pub latency_floor_fraction: f64,
    /// Seed that produced the trace (stochastic generators only); carried
    /// for provenance.
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        validate_system(&self.agents, &self.gpu).map_err(Error::InvalidSystem)?;
        if !(self.latency_floor_fraction > 0.0 && self.latency_floor_fraction <= 1.0) {
            return Err(Error::InvalidLatencyFloor(self.latency_floor_fraction));
        }
        if self.trace.num_agents() != self.agents.len() {
            return Err(Error::LengthMismatch {
                expected: self.agents.len(),
                got: self.trace.num_agents(),
            });
        }
        Ok(())
    }
}

/// Evolving per-agent queues (fractional requests).
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    queues: Vec<f64>,
}

impl SimState {
    /// Fresh state with empty queues.
    pub fn new(num_agents: usize) -> Self {
        Self {
            queues: vec![0.0; num_agents],
        }
    }

    pub fn queues(&self) -> &[f64] {
        &self.queues
    }
}

/// Everything measured in one timestep, vectors indexed by agent.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepRecord {
    pub step: usize,
    pub allocations: Vec<f64>,
    /// Requests arriving this step (`rate * dt`).
    pub arrivals: Vec<f64>,
    pub served: Vec<f64>,
    /// Queue lengths after service.
    pub queues: Vec<f64>,
    /// Queue-drain latency samples in seconds.
    pub latencies_s: Vec<f64>,
}

/// Aggregate metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: PolicyId,
    pub avg_latency_s: f64,
    pub per_agent_avg_latency_s: Vec<f64>,
    pub total_throughput_rps: f64,
    pub per_agent_throughput_rps: Vec<f64>,
    pub cost_usd: Usd,
    pub duration_s: f64,
    pub final_queues: Vec<f64>,
}

/// Advances the state by one timestep and records what happened.
///
/// `rates_t` are this step's arrival rates; `capacity` is the GPU's total;
/// `latency_floor` is the measurement floor for the latency denominator.
pub fn step(
    state: &mut SimState,
    agents: &[AgentSpec],
    rates_t: &[f64],
    policy: PolicyId,
    capacity: f64,
    step_index: usize,
    dt: f64,
    latency_floor: f64,
) -> Result<TimestepRecord> {
    let n = agents.len();

    let mut arrivals = Vec::with_capacity(n);
    for (i, &rate) in rates_t.iter().enumerate() {
        let arriving = rate * dt;
        state.queues[i] += arriving;
        arrivals.push(arriving);
    }

    let allocation = policy.allocate(agents, rates_t, capacity, step_index)?;

    let mut served = Vec::with_capacity(n);
    let mut latencies = Vec::with_capacity(n);
    for (i, agent) in agents.iter().enumerate() {
        let g = allocation.get(i);
        let service_capacity = g * agent.base_throughput_rps * dt;
        let done = state.queues[i].min(service_capacity);
        state.queues[i] -= done;

        let drain_rate = g.max(latency_floor) * agent.base_throughput_rps;
        let latency = state.queues[i] / drain_rate;

        if !(state.queues[i].is_finite() && latency.is_finite()) {
            return Err(Error::NonFinite {
                what: "queue state",
                value: state.queues[i],
            });
        }
        served.push(done);
        latencies.push(latency);
    }

    Ok(TimestepRecord {
        step: step_index,
        allocations: allocation.fractions().to_vec(),
        arrivals,
        served,
        queues: state.queues.clone(),
        latencies_s: latencies,
    })
}

/// Runs the whole trace and aggregates the summary.
///
/// Average latency is the mean over all (step, agent) samples; throughput is
/// total served requests divided by wall duration; cost is whole-GPU billing
/// (hourly price times duration), identical across policies.
pub fn run(config: &SimConfig) -> Result<(RunSummary, Vec<TimestepRecord>)> {
    config.validate()?;

    let n = config.agents.len();
    let steps = config.trace.duration_steps();
    let dt = config.trace.timestep_seconds();
    let capacity = config.gpu.total_capacity;

    let mut state = SimState::new(n);
    let mut records = Vec::with_capacity(steps);
    let mut latency_sums = vec![0.0; n];
    let mut served_sums = vec![0.0; n];

    for step_index in 0..steps {
        let record = step(
            &mut state,
            &config.agents,
            config.trace.rates_at(step_index),
            config.policy,
            capacity,
            step_index,
            dt,
            config.latency_floor_fraction,
        )?;
        for i in 0..n {
            latency_sums[i] += record.latencies_s[i];
            served_sums[i] += record.served[i];
        }
        records.push(record);
    }

    let duration_s = config.trace.duration_seconds();
    let per_agent_avg_latency_s: Vec<f64> =
        latency_sums.iter().map(|&s| s / steps as f64).collect();
    let avg_latency_s = latency_sums.iter().sum::<f64>() / (steps * n) as f64;
    let per_agent_throughput_rps: Vec<f64> =
        served_sums.iter().map(|&s| s / duration_s).collect();
    let total_throughput_rps = per_agent_throughput_rps.iter().sum();

    let summary = RunSummary {
        policy: config.policy,
        avg_latency_s,
        per_agent_avg_latency_s,
        total_throughput_rps,
        per_agent_throughput_rps,
        cost_usd: Usd::billing(config.gpu.price_per_hour_usd, duration_s)?,
        duration_s,
        final_queues: state.queues().to_vec(),
    };
    Ok((summary, records))
}

/// Scalar score of a run: `alpha * avg_latency + beta * cost - gamma * throughput`.
/// Lower is better. Weights must be non-negative.
pub fn objective_score(summary: &RunSummary, weights: &ObjectiveWeights) -> Result<f64> {
    for (which, value) in [
        ("alpha", weights.alpha),
        ("beta", weights.beta),
        ("gamma", weights.gamma),
    ] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::NegativeWeight { which, value });
        }
    }
    Ok(weights.alpha * summary.avg_latency_s + weights.beta * summary.cost_usd.as_dollars()
        - weights.gamma * summary.total_throughput_rps)
}
