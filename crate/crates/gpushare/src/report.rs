//! Exports and comparison tables: per-timestep CSV, run-summary JSON, and
//! the multi-policy metrics table.
//!
//! Exports are byte-deterministic for a fixed run (LF line endings, fixed
//! number formatting). Stored values keep full precision; rounding happens
//! only when a table is rendered.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::engine::{RunSummary, TimestepRecord};
use crate::error::{Error, Result};

/// Writes per-timestep records as CSV with header
/// `step,agent_id,allocation,arrivals,served,queue,latency_s`, one row per
/// (step, agent) ordered by step then agent, all values with fixed
/// 6-decimal formatting.
pub fn write_timeseries_csv<W: Write>(records: &[TimestepRecord], mut writer: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyInput("timestep records"));
    }
    writeln!(writer, "step,agent_id,allocation,arrivals,served,queue,latency_s")?;
    for record in records {
        for agent in 0..record.allocations.len() {
            writeln!(
                writer,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                record.step,
                agent,
                record.allocations[agent],
                record.arrivals[agent],
                record.served[agent],
                record.queues[agent],
                record.latencies_s[agent],
            )?;
        }
    }
    Ok(())
}

/// [`write_timeseries_csv`] to a path. Nothing is created on empty input.
pub fn export_timeseries(records: &[TimestepRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyInput("timestep records"));
    }
    let file = std::fs::File::create(path)?;
    write_timeseries_csv(records, std::io::BufWriter::new(file))
}

/// Serializes a run summary as pretty JSON with the struct's field order and
/// full-precision numbers. Loading the file back reproduces the summary
/// exactly.
pub fn write_summary_json<W: Write>(summary: &RunSummary, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, summary)?;
    writeln!(writer)?;
    Ok(())
}

/// [`write_summary_json`] to a path.
pub fn export_summary_json(summary: &RunSummary, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_summary_json(summary, std::io::BufWriter::new(file))
}

/// Latency improvement of `candidate` over `baseline`, in percent.
pub fn latency_reduction_pct(baseline_s: f64, candidate_s: f64) -> f64 {
    (baseline_s - candidate_s) / baseline_s * 100.0
}

/// Population standard deviation across per-agent average latencies.
///
/// This is the definition this crate reports as "latency std dev": spread of
/// the per-agent means, not of per-step samples.
pub fn latency_std_dev_s(per_agent_avg_latency_s: &[f64]) -> f64 {
    let n = per_agent_avg_latency_s.len() as f64;
    let mean = per_agent_avg_latency_s.iter().sum::<f64>() / n;
    let variance = per_agent_avg_latency_s
        .iter()
        .map(|&x| (x - mean).powi(2))
        .sum::<f64>()
        / n;
    variance.sqrt()
}

/// Metrics-by-policy table; columns keep the input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    columns: Vec<RunSummary>,
}

const METRIC_LABELS: [&str; 4] = [
    "Avg Latency (s)",
    "Total Throughput (rps)",
    "Cost (USD)",
    "Latency Std Dev (s)",
];

impl ComparisonTable {
    pub fn policies(&self) -> Vec<crate::allocator::PolicyId> {
        self.columns.iter().map(|s| s.policy).collect()
    }

    pub fn columns(&self) -> &[RunSummary] {
        &self.columns
    }

    fn cell(&self, metric: usize, summary: &RunSummary) -> String {
        match metric {
            0 => format!("{:.1}", summary.avg_latency_s),
            1 => format!("{:.1}", summary.total_throughput_rps),
            2 => format!("{:.3}", summary.cost_usd.as_dollars()),
            _ => format!("{:.1}", latency_std_dev_s(&summary.per_agent_avg_latency_s)),
        }
    }

    /// Latency improvement of adaptive over round-robin, when both columns
    /// are present.
    pub fn adaptive_reduction_vs_round_robin(&self) -> Option<f64> {
        let adaptive = self
            .columns
            .iter()
            .find(|s| s.policy == crate::allocator::PolicyId::Adaptive)?;
        let round_robin = self
            .columns
            .iter()
            .find(|s| s.policy == crate::allocator::PolicyId::RoundRobin)?;
        Some(latency_reduction_pct(
            round_robin.avg_latency_s,
            adaptive.avg_latency_s,
        ))
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let label_width = METRIC_LABELS.iter().map(|l| l.len()).max().unwrap();
        let mut widths: Vec<usize> = self.columns.iter().map(|s| s.policy.name().len()).collect();
        for (metric, _) in METRIC_LABELS.iter().enumerate() {
            for (col, summary) in self.columns.iter().enumerate() {
                widths[col] = widths[col].max(self.cell(metric, summary).len());
            }
        }

        let mut out = String::new();
        let _ = write!(out, "{:<label_width$}", "Metric");
        for (col, summary) in self.columns.iter().enumerate() {
            let _ = write!(out, "  {:>width$}", summary.policy.name(), width = widths[col]);
        }
        out.push('\n');
        for (metric, label) in METRIC_LABELS.iter().enumerate() {
            let _ = write!(out, "{label:<label_width$}");
            for (col, summary) in self.columns.iter().enumerate() {
                let _ = write!(out, "  {:>width$}", self.cell(metric, summary), width = widths[col]);
            }
            out.push('\n');
        }
        if let Some(reduction) = self.adaptive_reduction_vs_round_robin() {
            let _ = write!(
                out,
                "latency reduction, adaptive vs round_robin: {reduction:.1}%\n"
            );
        }
        out
    }

    /// CSV rendering: `metric,<policy>,...` header plus one row per metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for summary in &self.columns {
            let _ = write!(out, ",{}", summary.policy.name());
        }
        out.push('\n');
        for (metric, label) in METRIC_LABELS.iter().enumerate() {
            let _ = write!(out, "{label}");
            for summary in &self.columns {
                let _ = write!(out, ",{}", self.cell(metric, summary));
            }
            out.push('\n');
        }
        out
    }
}

/// Builds the comparison table. Policy columns must be unique.
pub fn summarize_comparison(summaries: &[RunSummary]) -> Result<ComparisonTable> {
    if summaries.is_empty() {
        return Err(Error::EmptyInput("run summaries"));
    }
    for (i, summary) in summaries.iter().enumerate() {
        if summaries[..i].iter().any(|s| s.policy == summary.policy) {
            return Err(Error::DuplicatePolicy(summary.policy.name().to_string()));
        }
    }
    Ok(ComparisonTable {
        columns: summaries.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::PolicyId;
    use crate::engine::{run, SimConfig, DEFAULT_LATENCY_FLOOR};
    use crate::test_util::{
        reference_agents, reference_gpu, reference_rates, EXPECTED_ADAPTIVE_ALLOCATION,
    };
    use crate::workload::constant_trace;

    fn reference_run(policy: PolicyId) -> (RunSummary, Vec<TimestepRecord>) {
        let config = SimConfig {
            agents: reference_agents(),
            gpu: reference_gpu(),
            trace: constant_trace(&reference_rates(), 100, 1.0).unwrap(),
            policy,
            latency_floor_fraction: DEFAULT_LATENCY_FLOOR,
            seed: 42,
        };
        run(&config).unwrap()
    }

    #[test]
    fn timeseries_has_one_row_per_step_and_agent() {
        let (_, records) = reference_run(PolicyId::StaticEqual);
        let mut buffer = Vec::new();
        write_timeseries_csv(&records, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text.lines().count(), 1 + 100 * 4);
        assert!(text.starts_with("step,agent_id,allocation,arrivals,served,queue,latency_s\n"));
    }

    #[test]
    fn adaptive_allocation_column_is_constant_over_time() {
        // Constant rates make the adaptive allocation time-invariant.
        let (_, records) = reference_run(PolicyId::Adaptive);
        let mut buffer = Vec::new();
        write_timeseries_csv(&records, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let expected: Vec<String> = EXPECTED_ADAPTIVE_ALLOCATION
            .iter()
            .map(|g| format!("{g:.6}"))
            .collect();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            let agent: usize = fields[1].parse().unwrap();
            assert_eq!(fields[2], expected[agent], "line: {line}");
        }
    }

    #[test]
    fn empty_records_error_and_write_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        assert!(matches!(
            export_timeseries(&[], &path),
            Err(Error::EmptyInput(_))
        ));
        assert!(!path.exists());
    }

    #[test]
    fn summary_json_round_trips_exactly() {
        let (summary, _) = reference_run(PolicyId::StaticEqual);
        let mut buffer = Vec::new();
        write_summary_json(&summary, &mut buffer).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        // Full precision in the file; rounding is a rendering concern.
        assert!(text.contains("\"avg_latency_s\": 110.25833333333"), "{text}");
        let back: RunSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, summary);
    }

    #[test]
    fn zero_workload_summary_fields() {
        let config = SimConfig {
            agents: reference_agents(),
            gpu: reference_gpu(),
            trace: constant_trace(&[0.0; 4], 100, 1.0).unwrap(),
            policy: PolicyId::Adaptive,
            latency_floor_fraction: DEFAULT_LATENCY_FLOOR,
            seed: 42,
        };
        let (summary, _) = run(&config).unwrap();
        let mut buffer = Vec::new();
        write_summary_json(&summary, &mut buffer).unwrap();
        let json: serde_json::Value = serde_json::from_slice(&buffer).unwrap();
        assert_eq!(json["avg_latency_s"], 0.0);
        assert_eq!(json["total_throughput_rps"], 0.0);
        assert_eq!(json["cost_usd"], 0.02);
    }

    #[test]
    fn comparison_table_renders_rounded_metrics() {
        let summaries: Vec<RunSummary> = [
            PolicyId::StaticEqual,
            PolicyId::RoundRobin,
            PolicyId::Adaptive,
        ]
        .iter()
        .map(|&p| reference_run(p).0)
        .collect();
        let table = summarize_comparison(&summaries).unwrap();

        let text = table.to_text();
        assert!(text.contains("110.3"), "{text}");
        assert!(text.contains("111.9"), "{text}");
        assert!(text.contains("58.1"), "{text}");
        assert!(text.contains("60.0"), "{text}");
        assert!(text.contains("0.020"), "{text}");
        assert!(text.contains("latency reduction, adaptive vs round_robin:"), "{text}");

        let csv = table.to_csv();
        assert!(csv.starts_with("metric,static_equal,round_robin,adaptive\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn single_summary_table_has_one_column_and_no_reduction_line() {
        let (summary, _) = reference_run(PolicyId::Adaptive);
        let table = summarize_comparison(&[summary]).unwrap();
        assert_eq!(table.policies(), vec![PolicyId::Adaptive]);
        assert!(table.adaptive_reduction_vs_round_robin().is_none());
        assert!(!table.to_text().contains("latency reduction"));
    }

    #[test]
    fn duplicate_policy_columns_are_rejected() {
        let (summary, _) = reference_run(PolicyId::Adaptive);
        assert!(matches!(
            summarize_comparison(&[summary.clone(), summary]),
            Err(Error::DuplicatePolicy(_))
        ));
    }

    #[test]
    fn reduction_formula_on_published_aggregates() {
        // (756.1 - 111.9) / 756.1 = 85.2%.
        let reduction = latency_reduction_pct(756.1, 111.9);
        assert_eq!(format!("{reduction:.1}%"), "85.2%");
    }

    #[test]
    fn std_dev_across_agents_is_population_std() {
        assert_eq!(latency_std_dev_s(&[3.0, 3.0, 3.0]), 0.0);
        // Two points symmetric around the mean: std = half the spread.
        assert_eq!(latency_std_dev_s(&[1.0, 3.0]), 1.0);
        let (summary, _) = reference_run(PolicyId::StaticEqual);
        let std = latency_std_dev_s(&summary.per_agent_avg_latency_s);
        assert!((std - 6.0107).abs() < 1e-3, "got {std}");
    }
}
