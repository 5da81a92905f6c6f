//! Ranking and popularity-bias metrics, and the cross-validated protocols.

mod metrics;
mod protocol;
mod report;

pub use metrics::{coverage_at_k, epc_at_k, popularity_ranking, precision_recall_at_k, random_baseline, EpcMode};
pub use protocol::{run_protocol, score_lists, EvalCase, EvalConfig, FoldMetrics, FoldResult, MetricsReport, Protocol};
pub use report::{parse_kv, write_kv, write_table};
