//! Experiment runner: JSON config binding, the `run`/`compare`/`scenario`/
//! `bench` commands, and the argument surface behind the `gpushare` binary.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 runtime failure.

use std::ffi::OsString;
use std::fmt;
use std::hint::black_box;
use std::io::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::allocator::{allocate_adaptive, PolicyId};
use crate::domain::{validate_system, AgentSpec, GpuSpec, WorkloadTrace};
use crate::engine::{run, RunSummary, SimConfig, TimestepRecord, DEFAULT_LATENCY_FLOOR};
use crate::error::Result;
use crate::report;
use crate::workload;

/// Errors surfaced by the commands, already split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Usage or config problem; exit code 1.
    #[error("{0}")]
    Config(String),
    /// Failure while executing a valid request; exit code 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

/// Stdout rendering of command results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

/// The experiment config document.
///
/// One JSON file captures agents, GPU, workload, policy and simulation
/// length; `configs/paper.json` in this crate is the bundled four-agent
/// reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub duration_steps: usize,
    #[serde(default = "default_timestep")]
    pub timestep_seconds: f64,
    pub gpu: GpuSpec,
    pub agents: Vec<AgentSpec>,
    pub workload: WorkloadSpec,
    pub policy: PolicyId,
    #[serde(default = "default_latency_floor")]
    pub latency_floor_fraction: f64,
}

fn default_timestep() -> f64 {
    1.0
}

fn default_latency_floor() -> f64 {
    DEFAULT_LATENCY_FLOOR
}

/// Workload generator selection inside a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    /// Base (or mean) arrival rates, one per agent.
    pub rates_rps: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spike: Option<SpikeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skew: Option<SkewSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    Constant,
    Spike,
    Skew,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeSpec {
    pub factor: f64,
    /// Targeted agent index; all agents when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<usize>,
    /// Half-open `[start, end)` step window; defaults to the 40%..50% slice
    /// of the run when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkewSpec {
    pub dominant_share: f64,
    /// Defaults to the last agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominant_agent: Option<usize>,
    /// Defaults to the sum of `rates_rps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_rate_rps: Option<f64>,
}

fn default_spike_window(duration_steps: usize) -> Range<usize> {
    duration_steps * 2 / 5..duration_steps / 2
}

impl ExperimentConfig {
    /// Loads and validates a config file. Parse errors keep serde's
    /// line/column diagnostics; system violations list every offending
    /// agent.
    pub fn load(path: &Path) -> std::result::Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        config.validate(path)?;
        Ok(config)
    }

    fn validate(&self, path: &Path) -> std::result::Result<(), CliError> {
        if let Err(violations) = validate_system(&self.agents, &self.gpu) {
            let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(CliError::Config(format!(
                "config {}: {}",
                path.display(),
                list.join("; ")
            )));
        }
        if self.workload.rates_rps.len() != self.agents.len() {
            return Err(CliError::Config(format!(
                "config {}: workload.rates_rps has {} entries for {} agents",
                path.display(),
                self.workload.rates_rps.len(),
                self.agents.len()
            )));
        }
        if self.duration_steps == 0 {
            return Err(CliError::Config(format!(
                "config {}: duration_steps must be >= 1",
                path.display()
            )));
        }
        Ok(())
    }

    /// Expands the workload spec into a concrete trace.
    pub fn build_trace(&self, seed_override: Option<u64>) -> Result<WorkloadTrace> {
        let spec = &self.workload;
        let seed = seed_override.unwrap_or(spec.seed);
        match spec.kind {
            WorkloadKind::Constant => {
                workload::constant_trace(&spec.rates_rps, self.duration_steps, self.timestep_seconds)
            }
            WorkloadKind::Spike => {
                let spike = spec.spike.clone().ok_or_else(|| {
                    crate::error::Error::InvalidTrace(
                        "workload.spike is required for kind 'spike'".into(),
                    )
                })?;
                let target = match spike.agent {
                    Some(agent) => workload::SpikeTarget::Agent(agent),
                    None => workload::SpikeTarget::All,
                };
                let window = match spike.window {
                    Some([start, end]) => start..end,
                    None => default_spike_window(self.duration_steps),
                };
                workload::spike_trace(
                    &spec.rates_rps,
                    self.duration_steps,
                    self.timestep_seconds,
                    target,
                    spike.factor,
                    window,
                )
            }
            WorkloadKind::Skew => {
                let skew = spec.skew.clone().ok_or_else(|| {
                    crate::error::Error::InvalidTrace(
                        "workload.skew is required for kind 'skew'".into(),
                    )
                })?;
                let total = skew
                    .total_rate_rps
                    .unwrap_or_else(|| spec.rates_rps.iter().sum());
                let dominant = skew.dominant_agent.unwrap_or(self.agents.len() - 1);
                workload::skew_trace(
                    total,
                    dominant,
                    skew.dominant_share,
                    self.agents.len(),
                    self.duration_steps,
                    self.timestep_seconds,
                )
            }
            WorkloadKind::Poisson => workload::poisson_trace(
                &spec.rates_rps,
                self.duration_steps,
                self.timestep_seconds,
                seed,
            ),
        }
    }

    /// Lowers the document into an engine config.
    pub fn sim_config(
        &self,
        policy_override: Option<PolicyId>,
        seed_override: Option<u64>,
    ) -> Result<SimConfig> {
        Ok(SimConfig {
            agents: self.agents.clone(),
            gpu: self.gpu.clone(),
            trace: self.build_trace(seed_override)?,
            policy: policy_override.unwrap_or(self.policy),
            latency_floor_fraction: self.latency_floor_fraction,
            seed: seed_override.unwrap_or(self.workload.seed),
        })
    }
}

fn ensure_out_dir(out_dir: &Path) -> std::result::Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))
}

fn write_artifacts(
    out_dir: &Path,
    stem: &str,
    summary: &RunSummary,
    records: &[TimestepRecord],
) -> std::result::Result<(), CliError> {
    let csv = out_dir.join(format!("{stem}_timeseries.csv"));
    report::export_timeseries(records, &csv)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", csv.display())))?;
    let json = out_dir.join(format!("{stem}_summary.json"));
    report::export_summary_json(summary, &json)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", json.display())))?;
    Ok(())
}

fn summary_line(summary: &RunSummary) -> String {
    format!(
        "{}: avg latency {:.1} s, throughput {:.1} rps, cost {}",
        summary.policy, summary.avg_latency_s, summary.total_throughput_rps, summary.cost_usd
    )
}

fn summary_csv(summary: &RunSummary) -> String {
    format!(
        "policy,avg_latency_s,total_throughput_rps,cost_usd\n{},{:.6},{:.6},{:.3}\n",
        summary.policy,
        summary.avg_latency_s,
        summary.total_throughput_rps,
        summary.cost_usd.as_dollars()
    )
}

/// Runs one policy on a config and writes `<policy>_timeseries.csv` and
/// `<policy>_summary.json` into `out_dir`.
pub fn cmd_run(
    config_path: &Path,
    policy_override: Option<PolicyId>,
    seed_override: Option<u64>,
    out_dir: &Path,
    format: OutputFormat,
) -> std::result::Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let sim = config
        .sim_config(policy_override, seed_override)
        .map_err(|e| CliError::Config(format!("config {}: {e}", config_path.display())))?;
    let (summary, records) =
        run(&sim).map_err(|e| CliError::Runtime(format!("simulation failed: {e}")))?;

    ensure_out_dir(out_dir)?;
    write_artifacts(out_dir, sim.policy.name(), &summary, &records)?;

    match format {
        OutputFormat::Text => println!("{}", summary_line(&summary)),
        OutputFormat::Csv => print!("{}", summary_csv(&summary)),
        OutputFormat::Json => {
            let mut stdout = std::io::stdout().lock();
            report::write_summary_json(&summary, &mut stdout)
                .map_err(|e| CliError::Runtime(format!("writing summary: {e}")))?;
        }
    }
    Ok(())
}

/// Runs several policies on the identical trace and emits the comparison
/// table (text and CSV) plus per-policy artifacts.
pub fn cmd_compare(
    config_path: &Path,
    policies: &[PolicyId],
    seed_override: Option<u64>,
    out_dir: &Path,
    format: OutputFormat,
) -> std::result::Result<(), CliError> {
    if policies.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least 2 policies".into(),
        ));
    }
    for (i, policy) in policies.iter().enumerate() {
        if policies[..i].contains(policy) {
            return Err(CliError::Config(format!(
                "policy '{policy}' listed more than once"
            )));
        }
    }

    let config = ExperimentConfig::load(config_path)?;
    // One shared trace keeps the comparison apples-to-apples.
    let sim_base = config
        .sim_config(None, seed_override)
        .map_err(|e| CliError::Config(format!("config {}: {e}", config_path.display())))?;

    ensure_out_dir(out_dir)?;
    let mut summaries = Vec::with_capacity(policies.len());
    for &policy in policies {
        let sim = SimConfig {
            policy,
            ..sim_base.clone()
        };
        let (summary, records) =
            run(&sim).map_err(|e| CliError::Runtime(format!("simulation failed: {e}")))?;
        write_artifacts(out_dir, policy.name(), &summary, &records)?;
        summaries.push(summary);
    }

    let table = report::summarize_comparison(&summaries)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let text = table.to_text();
    let csv = table.to_csv();
    std::fs::write(out_dir.join("comparison.txt"), &text)
        .map_err(|e| CliError::Runtime(format!("writing comparison.txt: {e}")))?;
    std::fs::write(out_dir.join("comparison.csv"), &csv)
        .map_err(|e| CliError::Runtime(format!("writing comparison.csv: {e}")))?;

    match format {
        OutputFormat::Text => print!("{text}"),
        OutputFormat::Csv => print!("{csv}"),
        OutputFormat::Json => {
            let json = serde_json::to_string_pretty(&summaries)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{json}");
        }
    }
    Ok(())
}

/// Stress scenarios exercised with the adaptive policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Sustained demand at 3x the base rates over the whole run.
    Overload3x,
    /// 10x burst on all agents over the default mid-run window.
    Spike10x,
    /// One agent holds 90% of the aggregate arrival rate.
    Skew90,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Overload3x => "overload3x",
            Scenario::Spike10x => "spike10x",
            Scenario::Skew90 => "skew90",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "overload3x" => Ok(Scenario::Overload3x),
            "spike10x" => Ok(Scenario::Spike10x),
            "skew90" => Ok(Scenario::Skew90),
            other => Err(format!(
                "unknown scenario '{other}'; valid scenarios: overload3x, spike10x, skew90"
            )),
        }
    }
}

/// Outcome of a stress scenario next to its constant-rate baseline.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub base: RunSummary,
    pub outcome: RunSummary,
    pub latency_degradation_pct: f64,
    /// Smallest per-agent allocation seen at any step (starvation check).
    pub min_allocation: f64,
    pub min_allocation_agent: usize,
    /// Largest post-service queue seen at any step.
    pub max_queue: f64,
    pub max_queue_agent: usize,
    pub records: Vec<TimestepRecord>,
}

/// Builds the scenario trace from the config's base rates.
pub fn scenario_trace(config: &ExperimentConfig, scenario: Scenario) -> Result<WorkloadTrace> {
    let rates = &config.workload.rates_rps;
    let steps = config.duration_steps;
    let dt = config.timestep_seconds;
    match scenario {
        Scenario::Overload3x => workload::spike_trace(
            rates,
            steps,
            dt,
            workload::SpikeTarget::All,
            3.0,
            0..steps,
        ),
        Scenario::Spike10x => workload::spike_trace(
            rates,
            steps,
            dt,
            workload::SpikeTarget::All,
            10.0,
            default_spike_window(steps),
        ),
        Scenario::Skew90 => workload::skew_trace(
            rates.iter().sum(),
            config.agents.len() - 1,
            0.9,
            config.agents.len(),
            steps,
            dt,
        ),
    }
}

/// Runs a scenario and its constant-rate baseline, both under the adaptive
/// policy, and aggregates the robustness indicators.
pub fn run_scenario(
    config: &ExperimentConfig,
    scenario: Scenario,
    seed_override: Option<u64>,
) -> Result<ScenarioReport> {
    let base_sim = SimConfig {
        agents: config.agents.clone(),
        gpu: config.gpu.clone(),
        trace: workload::constant_trace(
            &config.workload.rates_rps,
            config.duration_steps,
            config.timestep_seconds,
        )?,
        policy: PolicyId::Adaptive,
        latency_floor_fraction: config.latency_floor_fraction,
        seed: seed_override.unwrap_or(config.workload.seed),
    };
    let (base, _) = run(&base_sim)?;

    let sim = SimConfig {
        trace: scenario_trace(config, scenario)?,
        ..base_sim
    };
    let (outcome, records) = run(&sim)?;

    let mut min_allocation = f64::INFINITY;
    let mut min_allocation_agent = 0;
    let mut max_queue = f64::NEG_INFINITY;
    let mut max_queue_agent = 0;
    for record in &records {
        for (agent, &g) in record.allocations.iter().enumerate() {
            if g < min_allocation {
                min_allocation = g;
                min_allocation_agent = agent;
            }
        }
        for (agent, &q) in record.queues.iter().enumerate() {
            if q > max_queue {
                max_queue = q;
                max_queue_agent = agent;
            }
        }
    }

    let latency_degradation_pct =
        (outcome.avg_latency_s - base.avg_latency_s) / base.avg_latency_s * 100.0;

    Ok(ScenarioReport {
        scenario,
        base,
        outcome,
        latency_degradation_pct,
        min_allocation,
        min_allocation_agent,
        max_queue,
        max_queue_agent,
        records,
    })
}

/// Executes a named stress scenario and writes its artifacts.
pub fn cmd_scenario(
    scenario: Scenario,
    config_path: &Path,
    seed_override: Option<u64>,
    out_dir: &Path,
    format: OutputFormat,
) -> std::result::Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let report = run_scenario(&config, scenario, seed_override)
        .map_err(|e| CliError::Runtime(format!("scenario {scenario}: {e}")))?;

    ensure_out_dir(out_dir)?;
    let stem = format!("scenario_{scenario}");
    write_artifacts(out_dir, &stem, &report.outcome, &report.records)?;

    match format {
        OutputFormat::Text => {
            println!("scenario {} (adaptive policy)", report.scenario);
            println!(
                "  avg latency: {:.1} s (baseline {:.1} s, degradation {:+.1}%)",
                report.outcome.avg_latency_s, report.base.avg_latency_s,
                report.latency_degradation_pct
            );
            println!(
                "  min allocation over run: {:.4} (agent {})",
                report.min_allocation, report.min_allocation_agent
            );
            println!(
                "  max queue over run: {:.1} requests (agent {})",
                report.max_queue, report.max_queue_agent
            );
        }
        OutputFormat::Csv => {
            println!("scenario,avg_latency_s,base_latency_s,degradation_pct,min_allocation,max_queue");
            println!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                report.scenario,
                report.outcome.avg_latency_s,
                report.base.avg_latency_s,
                report.latency_degradation_pct,
                report.min_allocation,
                report.max_queue
            );
        }
        OutputFormat::Json => {
            let value = serde_json::json!({
                "scenario": report.scenario.name(),
                "summary": report.outcome,
                "base_summary": report.base,
                "latency_degradation_pct": report.latency_degradation_pct,
                "min_allocation": report.min_allocation,
                "min_allocation_agent": report.min_allocation_agent,
                "max_queue": report.max_queue,
                "max_queue_agent": report.max_queue_agent,
            });
            println!("{}", serde_json::to_string_pretty(&value).unwrap());
        }
    }
    Ok(())
}

/// One timing sample set of `allocate_adaptive` at a given agent count.
#[derive(Debug, Clone, Copy)]
pub struct BenchPoint {
    pub agent_count: usize,
    pub median: Duration,
    pub p99: Duration,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub points: Vec<BenchPoint>,
    /// Log-log regression slope of median time against agent count;
    /// `None` with fewer than two distinct counts.
    pub loglog_slope: Option<f64>,
}

fn synthetic_agents(n: usize, rng: &mut ChaCha20Rng) -> Vec<AgentSpec> {
    (0..n)
        .map(|i| AgentSpec {
            id: i as u32,
            name: format!("synthetic-{i}"),
            model_size_mb: 100.0 + (rng.next_u64() % 4000) as f64,
            base_throughput_rps: 1.0 + (rng.next_u64() % 200) as f64,
            min_gpu_fraction: ((rng.next_u64() % 1000) as f64 + 1.0) / 1001.0,
            priority: (rng.next_u64() % 3) as u8 + 1,
        })
        .collect()
}

fn synthetic_rates(n: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    (0..n).map(|_| (rng.next_u64() % 10_000) as f64 / 100.0).collect()
}

/// Times `allocate_adaptive` on synthetic agent sets.
pub fn bench_allocator(agent_counts: &[usize], repetitions: usize, seed: u64) -> Result<BenchReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let reps = repetitions.max(1);
    let mut points = Vec::with_capacity(agent_counts.len());

    for &n in agent_counts {
        let agents = synthetic_agents(n.max(1), &mut rng);
        let rates = synthetic_rates(n.max(1), &mut rng);

        // Warm-up, also surfaces input errors before the timed loop.
        black_box(allocate_adaptive(&agents, &rates, 1.0)?);

        let mut samples: Vec<Duration> = (0..reps)
            .map(|_| {
                let start = Instant::now();
                let allocation = allocate_adaptive(black_box(&agents), black_box(&rates), 1.0);
                let elapsed = start.elapsed();
                black_box(allocation).ok();
                elapsed
            })
            .collect();
        samples.sort_unstable();

        points.push(BenchPoint {
            agent_count: n.max(1),
            median: samples[reps / 2],
            p99: samples[((reps as f64 * 0.99).ceil() as usize).clamp(1, reps) - 1],
        });
    }

    Ok(BenchReport {
        loglog_slope: loglog_slope(&points),
        points,
    })
}

fn loglog_slope(points: &[BenchPoint]) -> Option<f64> {
    let xs: Vec<f64> = points.iter().map(|p| (p.agent_count as f64).ln()).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| (p.median.as_nanos().max(1) as f64).ln())
        .collect();
    let distinct = {
        let mut counts: Vec<usize> = points.iter().map(|p| p.agent_count).collect();
        counts.sort_unstable();
        counts.dedup();
        counts.len()
    };
    if distinct < 2 {
        return None;
    }
    let x_mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let covariance: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let variance: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    Some(covariance / variance)
}

/// Benchmarks allocator scaling and prints per-count medians plus the fitted
/// log-log slope.
pub fn cmd_bench(agent_counts: &[usize], repetitions: usize) -> std::result::Result<(), CliError> {
    if agent_counts.is_empty() {
        return Err(CliError::Config("bench needs at least one agent count".into()));
    }
    if agent_counts.contains(&0) {
        return Err(CliError::Config("agent counts must be >= 1".into()));
    }
    let report = bench_allocator(agent_counts, repetitions, 42)
        .map_err(|e| CliError::Runtime(format!("bench failed: {e}")))?;

    println!("allocate_adaptive timing ({repetitions} repetitions per count)");
    for point in &report.points {
        println!(
            "N={:<8} median={:<12?} p99={:?}",
            point.agent_count, point.median, point.p99
        );
    }
    if let Some(slope) = report.loglog_slope {
        println!("log-log slope: {slope:.3}");
    }
    Ok(())
}

// --- argument parsing ---

#[derive(Parser)]
#[command(
    name = "gpushare",
    version,
    about = "Discrete-time simulator for fractional GPU sharing across model-serving agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy on a config and export timeseries + summary
    Run {
        /// Path to the experiment config (JSON)
        config: PathBuf,
        /// Override the config's policy (adaptive, static_equal, round_robin)
        #[arg(long)]
        policy: Option<String>,
        /// Output directory for artifacts
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the workload seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Run several policies on the identical trace and compare them
    Compare {
        config: PathBuf,
        /// Comma-separated policies to compare
        #[arg(long, value_delimiter = ',', default_value = "adaptive,static_equal,round_robin")]
        policies: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Run a stress scenario (overload3x, spike10x, skew90) under adaptive
    Scenario {
        /// Scenario name
        name: String,
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Time the adaptive allocator across agent counts
    Bench {
        /// Comma-separated agent counts
        #[arg(long = "agents", value_delimiter = ',', default_value = "100,1000,10000,100000")]
        agent_counts: Vec<usize>,
        /// Timing repetitions per count
        #[arg(long, default_value_t = 30)]
        reps: usize,
    },
}

fn parse_policy(s: &str) -> std::result::Result<PolicyId, CliError> {
    PolicyId::from_str(s).map_err(CliError::Config)
}

fn dispatch(cli: Cli) -> std::result::Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            policy,
            out,
            seed,
            format,
        } => {
            let policy = policy.as_deref().map(parse_policy).transpose()?;
            cmd_run(&config, policy, seed, &out, format)
        }
        Command::Compare {
            config,
            policies,
            out,
            seed,
            format,
        } => {
            let policies = policies
                .iter()
                .map(|p| parse_policy(p))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            cmd_compare(&config, &policies, seed, &out, format)
        }
        Command::Scenario {
            name,
            config,
            out,
            seed,
            format,
        } => {
            let scenario = Scenario::from_str(&name).map_err(CliError::Config)?;
            cmd_scenario(scenario, &config, seed, &out, format)
        }
        Command::Bench { agent_counts, reps } => cmd_bench(&agent_counts, reps),
    }
}

/// Full CLI entry point; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let _ = write!(std::io::stderr(), "{e}");
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundled_config() -> PathBuf {
        PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper.json"))
    }

    #[test]
    fn bundled_config_loads_and_matches_reference_values() {
        let config = ExperimentConfig::load(&bundled_config()).unwrap();
        assert_eq!(config.duration_steps, 100);
        assert_eq!(config.timestep_seconds, 1.0);
        assert_eq!(config.gpu.price_per_hour_usd, 0.72);
        assert_eq!(config.gpu.memory_mb, 16384.0);
        assert_eq!(config.agents.len(), 4);
        assert_eq!(config.workload.rates_rps, vec![80.0, 40.0, 45.0, 25.0]);
        assert_eq!(config.policy, PolicyId::Adaptive);
        assert_eq!(config.latency_floor_fraction, 0.03);

        let coordinator = &config.agents[0];
        assert_eq!(coordinator.model_size_mb, 500.0);
        assert_eq!(coordinator.base_throughput_rps, 100.0);
        assert_eq!(coordinator.min_gpu_fraction, 0.10);
        assert_eq!(coordinator.priority, 1);
    }

    #[test]
    fn config_round_trips_bit_identically() {
        let config = ExperimentConfig::load(&bundled_config()).unwrap();
        let saved = serde_json::to_string_pretty(&config).unwrap();
        let reloaded: ExperimentConfig = serde_json::from_str(&saved).unwrap();
        assert_eq!(reloaded, config);
        for (a, b) in config.agents.iter().zip(&reloaded.agents) {
            assert_eq!(a.min_gpu_fraction.to_bits(), b.min_gpu_fraction.to_bits());
            assert_eq!(a.model_size_mb.to_bits(), b.model_size_mb.to_bits());
            assert_eq!(a.base_throughput_rps.to_bits(), b.base_throughput_rps.to_bits());
        }
    }

    #[test]
    fn unknown_config_fields_are_rejected_with_position() {
        let err = serde_json::from_str::<ExperimentConfig>(
            r#"{"duration_steps": 1, "oops": true}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("oops"));
        assert!(err.column() > 0);
    }

    #[test]
    fn missing_config_file_names_the_path() {
        let err = ExperimentConfig::load(Path::new("/no/such/config.json")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("/no/such/config.json"));
    }

    #[test]
    fn trace_builders_cover_all_kinds() {
        let mut config = ExperimentConfig::load(&bundled_config()).unwrap();

        let trace = config.build_trace(None).unwrap();
        assert_eq!(trace.duration_steps(), 100);
        assert_eq!(trace.rates_at(0), &[80.0, 40.0, 45.0, 25.0]);

        config.workload.kind = WorkloadKind::Spike;
        assert!(config.build_trace(None).is_err(), "spike without spec");
        config.workload.spike = Some(SpikeSpec {
            factor: 10.0,
            agent: None,
            window: None,
        });
        let trace = config.build_trace(None).unwrap();
        assert_eq!(trace.rates_at(39)[0], 80.0);
        assert_eq!(trace.rates_at(40)[0], 800.0);
        assert_eq!(trace.rates_at(49)[0], 800.0);
        assert_eq!(trace.rates_at(50)[0], 80.0);

        config.workload.kind = WorkloadKind::Skew;
        config.workload.skew = Some(SkewSpec {
            dominant_share: 0.9,
            dominant_agent: None,
            total_rate_rps: None,
        });
        let trace = config.build_trace(None).unwrap();
        assert!((trace.rates_at(0)[3] - 171.0).abs() < 1e-9);

        config.workload.kind = WorkloadKind::Poisson;
        let a = config.build_trace(None).unwrap();
        let b = config.build_trace(None).unwrap();
        assert_eq!(a, b);
        let c = config.build_trace(Some(7)).unwrap();
        assert_ne!(a, c, "seed override changes the trace");
    }

    #[test]
    fn scenario_names_parse() {
        assert_eq!("overload3x".parse::<Scenario>().unwrap(), Scenario::Overload3x);
        assert_eq!("spike10x".parse::<Scenario>().unwrap(), Scenario::Spike10x);
        assert_eq!("skew90".parse::<Scenario>().unwrap(), Scenario::Skew90);
        let err = "meltdown".parse::<Scenario>().unwrap_err();
        assert!(err.contains("overload3x"));
    }

    #[test]
    fn bench_reports_points_and_slope() {
        let report = bench_allocator(&[8, 64], 5, 1).unwrap();
        assert_eq!(report.points.len(), 2);
        assert!(report.points[0].median.as_nanos() > 0);
        assert!(report.loglog_slope.is_some());
        // A single count cannot give a slope.
        let report = bench_allocator(&[16], 5, 1).unwrap();
        assert!(report.loglog_slope.is_none());
    }

    #[test]
    fn synthetic_agent_sets_are_valid_systems() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let agents = synthetic_agents(50, &mut rng);
        let gpu = GpuSpec {
            total_capacity: 1.0,
            memory_mb: f64::MAX,
            price_per_hour_usd: 0.0,
        };
        assert!(validate_system(&agents, &gpu).is_ok());
    }
}
