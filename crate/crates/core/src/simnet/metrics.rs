use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use super::workload::PpSetKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub id: String,
    pub role: String,
    pub tuples_in: u64,
    pub tuples_out: u64,
    pub processing_us: f64,
}

/// Outcome of one simulation run. Timing fields are wall-clock and vary
/// between runs; everything else is a function of scenario and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub run_id: String,
    pub scenario: String,
    pub graph: String,
    pub enforcement: bool,
    pub seed: u64,
    pub pp_set: PpSetKind,
    pub sensing_so_count: usize,
    /// Per output tuple: processing time along its slowest path, consumer included.
    pub latency_us_p50: f64,
    pub latency_us_p95: f64,
    /// Processing time summed over all operator and consumer invocations.
    pub processing_us: f64,
    /// Mean canonical meta-data size of tuples reaching the consumer.
    pub extra_bits_per_tuple: f64,
    pub selectivity: f64,
    pub bandwidth_kbit_h: f64,
    pub tuples_in: u64,
    pub tuples_out: u64,
    pub attributes_released: u64,
    pub attributes_dropped: u64,
    pub failed_checks: BTreeMap<String, u64>,
    pub nodes: Vec<NodeMetrics>,
}

pub const CSV_COLUMNS: [&str; 10] = [
    "run_id",
    "graph",
    "enforcement",
    "latency_us_p50",
    "latency_us_p95",
    "extra_bits_per_tuple",
    "selectivity",
    "bandwidth_kbit_h",
    "tuples_in",
    "tuples_out",
];

/// Columns of [`CSV_COLUMNS`] that hold wall-clock measurements.
pub const TIMING_COLUMNS: [&str; 2] = ["latency_us_p50", "latency_us_p95"];

impl MetricsReport {
    /// Copy with every wall-clock field zeroed, for determinism checks.
    pub fn without_timing(&self) -> MetricsReport {
        let mut r = self.clone();
        r.latency_us_p50 = 0.0;
        r.latency_us_p95 = 0.0;
        r.processing_us = 0.0;
        for n in &mut r.nodes {
            n.processing_us = 0.0;
        }
        r
    }

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.run_id.clone(),
            self.graph.clone(),
            if self.enforcement { "on" } else { "off" }.to_string(),
            format!("{:.3}", self.latency_us_p50),
            format!("{:.3}", self.latency_us_p95),
            format!("{:.3}", self.extra_bits_per_tuple),
            format!("{:.6}", self.selectivity),
            format!("{:.3}", self.bandwidth_kbit_h),
            self.tuples_in.to_string(),
            self.tuples_out.to_string(),
        ]
    }
}

pub fn write_csv<'a, W, I>(out: W, reports: I) -> io::Result<()>
where
    W: io::Write,
    I: IntoIterator<Item = &'a MetricsReport>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        w.write_record(r.csv_row())?;
    }
    w.flush()
}

/// Off and on runs of the same workload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub off: MetricsReport,
    pub on: MetricsReport,
    /// `(on - off) / off` of total processing time, in percent.
    pub overhead_percent: f64,
}

pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => 0.0,
        n if n % 2 == 1 => v[n / 2],
        n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}
