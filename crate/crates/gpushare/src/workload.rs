//! Workload generators: constant rates, spikes/overload, skewed load, and a
//! seeded Poisson mode, plus CSV (de)serialization of traces.
//!
//! The stochastic generator is reproducible across platforms and languages:
//! the PRNG is ChaCha20 (RFC 8439 test vectors) keyed from the 64-bit seed
//! via SplitMix64 expansion (`rand_core::SeedableRng::seed_from_u64`).
//! Uniform doubles take the top 53 bits of `next_u64`; Poisson counts come
//! from summing unit exponentials until the mean is exceeded. Cells are
//! drawn in row-major order (step, then agent) from a single stream.

use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::domain::WorkloadTrace;
use crate::error::{Error, Result};

/// Which agents a spike applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeTarget {
    All,
    Agent(usize),
}

fn check_rates(rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        return Err(Error::EmptyInput("rate vector"));
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
    Ok(())
}

/// Every timestep carries the same rate vector.
pub fn constant_trace(
    rates: &[f64],
    duration_steps: usize,
    timestep_seconds: f64,
) -> Result<WorkloadTrace> {
    check_rates(rates)?;
    WorkloadTrace::new(vec![rates.to_vec(); duration_steps], timestep_seconds)
}

/// Base rates multiplied by `factor` for the targeted agent(s) inside
/// `window` (half-open, in steps); base everywhere else.
///
/// `factor` 3 over the full window is the sustained-overload scenario;
/// `factor` 10 over a short window is the burst-spike scenario.
pub fn spike_trace(
    base_rates: &[f64],
    duration_steps: usize,
    timestep_seconds: f64,
    target: SpikeTarget,
    factor: f64,
    window: Range<usize>,
) -> Result<WorkloadTrace> {
    check_rates(base_rates)?;
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidTrace(format!(
            "spike factor must be finite and positive, got {factor}"
        )));
    }
    if window.is_empty() || window.end > duration_steps {
        return Err(Error::InvalidTrace(format!(
            "spike window {}..{} is empty or outside 0..{duration_steps}",
            window.start, window.end
        )));
    }
    if let SpikeTarget::Agent(agent) = target {
        if agent >= base_rates.len() {
            return Err(Error::InvalidTrace(format!(
                "spike agent {agent} out of range for {} agents",
                base_rates.len()
            )));
        }
    }

    let rows = (0..duration_steps)
        .map(|step| {
            let mut row = base_rates.to_vec();
            if window.contains(&step) {
                match target {
                    SpikeTarget::All => row.iter_mut().for_each(|r| *r *= factor),
                    SpikeTarget::Agent(agent) => row[agent] *= factor,
                }
            }
            row
        })
        .collect();
    WorkloadTrace::new(rows, timestep_seconds)
}

/// One agent dominates `dominant_share` of a fixed aggregate rate; the
/// remainder is split equally among the others.
pub fn skew_trace(
    total_rate: f64,
    dominant_agent: usize,
    dominant_share: f64,
    num_agents: usize,
    duration_steps: usize,
    timestep_seconds: f64,
) -> Result<WorkloadTrace> {
    if !(total_rate.is_finite() && total_rate >= 0.0) {
        return Err(Error::InvalidTrace(format!(
            "total rate must be finite and >= 0, got {total_rate}"
        )));
    }
    if !(0.0..=1.0).contains(&dominant_share) {
        return Err(Error::InvalidTrace(format!(
            "dominant share {dominant_share} outside [0, 1]"
        )));
    }
    if dominant_agent >= num_agents {
        return Err(Error::InvalidTrace(format!(
            "dominant agent {dominant_agent} out of range for {num_agents} agents"
        )));
    }
    if dominant_share < 1.0 && num_agents < 2 {
        return Err(Error::InvalidTrace(
            "a share below 1.0 needs at least 2 agents to split the remainder".into(),
        ));
    }

    let mut row = vec![0.0; num_agents];
    row[dominant_agent] = dominant_share * total_rate;
    if num_agents > 1 {
        let rest = (1.0 - dominant_share) * total_rate / (num_agents - 1) as f64;
        for (i, rate) in row.iter_mut().enumerate() {
            if i != dominant_agent {
                *rate = rest;
            }
        }
    }
    WorkloadTrace::new(vec![row; duration_steps], timestep_seconds)
}

/// Independent Poisson arrivals: each cell is `Poisson(mean * dt) / dt`,
/// so a trace cell is again a rate in requests/second. Identical seeds give
/// identical traces.
pub fn poisson_trace(
    mean_rates: &[f64],
    duration_steps: usize,
    timestep_seconds: f64,
    seed: u64,
) -> Result<WorkloadTrace> {
    check_rates(mean_rates)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let rows = (0..duration_steps)
        .map(|_| {
            mean_rates
                .iter()
                .map(|&mean| {
                    sample_poisson(&mut rng, mean * timestep_seconds) as f64 / timestep_seconds
                })
                .collect()
        })
        .collect();
    WorkloadTrace::new(rows, timestep_seconds)
}

/// Uniform in [0, 1) from the top 53 bits of one `next_u64` draw.
fn uniform_unit(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Poisson(mean) by counting unit exponentials until their sum exceeds the
/// mean. Exact for any finite mean and free of the `exp(-mean)` underflow
/// that limits the classic product-of-uniforms form.
fn sample_poisson(rng: &mut ChaCha20Rng, mean: f64) -> u64 {
    let mut count = 0u64;
    let mut acc = 0.0;
    loop {
        // -ln(1 - u) with u in [0, 1) keeps the argument strictly positive.
        acc += -(1.0 - uniform_unit(rng)).ln();
        if acc >= mean {
            return count;
        }
        count += 1;
    }
}

/// Writes a trace as CSV with header `step,agent_id,rate_rps`, one row per
/// (step, agent), ordered by step then agent. Rates print in shortest
/// round-trip form, so reading the file back reproduces the trace exactly.
pub fn write_trace_csv<W: Write>(trace: &WorkloadTrace, mut writer: W) -> Result<()> {
    writeln!(writer, "step,agent_id,rate_rps")?;
    for (step, row) in trace.rows().iter().enumerate() {
        for (agent, rate) in row.iter().enumerate() {
            writeln!(writer, "{step},{agent},{rate}")?;
        }
    }
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. The CSV carries no timestep
/// length, so the caller supplies it.
pub fn read_trace_csv<R: Read>(reader: R, timestep_seconds: f64) -> Result<WorkloadTrace> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let bad = |line: usize, msg: String| Error::InvalidTrace(format!("CSV line {line}: {msg}"));

    for (number, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if number == 0 {
            if line.trim() != "step,agent_id,rate_rps" {
                return Err(bad(1, format!("unexpected header '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(number + 1, format!("expected 3 fields, got {}", fields.len())));
        }
        let step: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| bad(number + 1, format!("step: {e}")))?;
        let agent: usize = fields[1]
            .trim()
            .parse()
            .map_err(|e| bad(number + 1, format!("agent_id: {e}")))?;
        let rate: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| bad(number + 1, format!("rate_rps: {e}")))?;
        if step != rows.len() && step != rows.len().saturating_sub(1) {
            return Err(bad(number + 1, format!("step {step} out of order")));
        }
        if step == rows.len() {
            rows.push(Vec::new());
        }
        if agent != rows[step].len() {
            return Err(bad(number + 1, format!("agent_id {agent} out of order")));
        }
        rows[step].push(rate);
    }
    WorkloadTrace::new(rows, timestep_seconds)
}

/// [`write_trace_csv`] to a filesystem path.
pub fn export_trace_csv(trace: &WorkloadTrace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trace_csv(trace, std::io::BufWriter::new(file))
}
