//! Retrieval protocol: full-ranking scores in both directions, R@K, median
//! rank, the uniform-random baseline and the 10-image pool task.

mod baseline;
mod metrics;
mod pool;
mod report;

pub use baseline::{random_baseline, uniform_score, RandomBaseline};
pub use metrics::{
    evaluate, median_rank, rank_queries, recall_at_k, score_all, Direction, EvalReport,
    ScoreMatrix, RECALL_KS,
};
pub use pool::{pool_eval, PoolLevel, PoolReport, PoolTask, TypeTally};
pub use report::{write_report_csv, format_table, ReportRow};
