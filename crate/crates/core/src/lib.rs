//! Task-level humanoid Tower of Hanoi benchmark.
//!
//! Seeded instance generation, symbolic planning, stochastic skill models, a
//! closed-loop episode runner with survival and precision metrics, the reward
//! component registry, and reference-set bookkeeping for coverage expansion.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod calibrate;
pub mod coverage;
pub mod geometry;
pub mod instance;
pub mod planner;
pub mod rewards;
pub mod rng;
pub mod schema;
pub mod simulator;
pub mod skills;
pub mod symbolic;

pub use geometry::{quat_distance, wrap_angle, BoxDims, Pose2, Pose3, Quat};
pub use instance::{sample_dynamics, sample_instance, InstanceConfig, WorkspaceInstance};
pub use planner::{compile_move, plan_hanoi, plan_rearrangement, CompileConfig, SkillPlan};
pub use simulator::{
    report_metrics, run_benchmark, run_episode, survival_curve, EpisodeRecord, MetricsTable,
    SurvivalCurve, WorldState,
};
pub use skills::{FailureMode, Method, SkillCommand, SkillKind, SkillModelConfig, SkillOutcome};
pub use symbolic::{apply_move, is_goal, legal_moves, BoxId, Goal, Move, SymbolicState};
