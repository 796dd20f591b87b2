//! Closed-loop episode runner and benchmark metrics.

mod benchmark;
mod episode;
mod metrics;
mod world;

pub use benchmark::{
    report, run_benchmark, run_records, BenchmarkError, BenchmarkOptions, BenchmarkReport,
    RecordSet,
};
pub use episode::{
    run_episode, BoxError, EpisodeError, EpisodeOptions, EpisodeRecord, Invocation, PlacementError,
};
pub use metrics::{
    report_metrics, survival_curve, write_survival_csv, ErrorStats, FailureCount, GroupMetrics,
    MetricsError, MetricsTable, Stat, SurvivalCurve, SurvivalPoint,
};
pub use world::{BoxState, Grasp, WorldState};
