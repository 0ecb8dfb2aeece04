//! Smart-object network simulator: query graphs, workload generators,
//! canonical meta-data encoding and overhead metrics.

pub mod encoding;
pub mod graph;
pub mod metrics;
mod run;
pub mod workload;

use thiserror::Error;

use crate::engine::EngineError;
use crate::peas::PeasError;
use crate::preferences::PreferenceError;

pub use encoding::{decode_metadata, encode_metadata, encode_tuple, DecodeError, Encoded, Interner};
pub use graph::{
    validate_graph, NodeRole, NodeSpec, QueryGraph, SensingAttribute, SensingConfig, Smartness, ValueGen, Violation,
};
pub use metrics::{median, write_csv, MetricsReport, NodeMetrics, OverheadReport, CSV_COLUMNS, TIMING_COLUMNS};
pub use run::{measure_overhead, run_simulation, run_with_deliveries, Delivery, ExecMode, RunOutput, Simulation};
pub use workload::{
    generate_pp_set, generate_query_family, generate_taxonomy, PpSetKind, WorkloadSpec, CONSUMER_POOL, KEY_DOMAIN,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid graph: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidGraph(Vec<Violation>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("node `{node}` references undeclared preference `{reference}`")]
    MissingPreference { node: String, reference: String },
    #[error("node `{node}`: {source}")]
    Engine { node: String, source: EngineError },
    #[error("consumer `{node}`: {source}")]
    Compliance { node: String, source: PreferenceError },
    #[error(transparent)]
    Peas(PeasError),
    #[error("a node worker panicked")]
    WorkerPanicked,
}
