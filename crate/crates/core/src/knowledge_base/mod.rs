//! Benchmark records, rankings, property confidence and the self-evaluation bank.

mod bank;
mod confidence;
mod rank;
mod table;

pub use bank::{upsert_self_eval, BankEntry, Observation, SelfEvalBank};
pub use confidence::{build_confidence, hit_rate, select_top, ConfidenceTable, HitDetail, HitRate};
pub use rank::{empirical_ranking, kendall_tau, statistical_ranking, transfer_performance, ErMode, Ranked};
pub use table::{exclude_dataset, BenchmarkTable, PerfRecord};
