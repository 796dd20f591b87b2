use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    report_metrics, run_episode, survival_curve, EpisodeError, EpisodeOptions, EpisodeRecord,
    MetricsTable, SurvivalCurve,
};
use crate::instance::{sample_instance, InstanceConfig, InstanceError, TOWER_COUNT};
use crate::planner::{plan_hanoi, PlanError};
use crate::rng::mix_seed;
use crate::schema;
use crate::skills::{Method, SkillModelConfig};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkOptions {
    pub instance: InstanceConfig,
    pub episode: EpisodeOptions,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: String,
    pub preset: String,
    pub method: Method,
    pub dr: bool,
    pub seed: u64,
    pub episodes: usize,
    pub metrics: MetricsTable,
    pub survival: SurvivalCurve,
}

/// Saved per-episode records, the input of the `report` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSet {
    pub schema: String,
    pub preset: String,
    pub method: Method,
    pub dr: bool,
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
}

impl RecordSet {
    pub fn new(cfg: &SkillModelConfig, seed: u64, records: Vec<EpisodeRecord>) -> Self {
        Self {
            schema: schema::RECORDS.to_string(),
            preset: cfg.name.clone(),
            method: cfg.method,
            dr: cfg.dr,
            seed,
            records,
        }
    }

    /// Same report `run_benchmark` produced for these records.
    pub fn report(&self) -> Result<BenchmarkReport, BenchmarkError> {
        build_report(&self.preset, self.method, self.dr, self.seed, &self.records)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchmarkError {
    #[error("episode count must be at least 1")]
    NoEpisodes,
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn one_episode(
    i: usize,
    seed: u64,
    cfg: &SkillModelConfig,
    opts: &BenchmarkOptions,
    inst_cfg: &InstanceConfig,
) -> Result<EpisodeRecord, BenchmarkError> {
    let s = mix_seed(seed, i as u64);
    let inst = sample_instance(s, inst_cfg)?;
    let plan = plan_hanoi(inst.n_boxes(), 0, 1, TOWER_COUNT - 1)?;
    Ok(run_episode(&inst, &plan, cfg, s, opts.episode)?)
}

/// `n` independent episodes, episode `i` seeded with `mix_seed(seed, i)`. Records come
/// back in episode order whatever the thread count.
pub fn run_records(
    n: usize,
    cfg: &SkillModelConfig,
    seed: u64,
    opts: &BenchmarkOptions,
) -> Result<Vec<EpisodeRecord>, BenchmarkError> {
    if n == 0 {
        return Err(BenchmarkError::NoEpisodes);
    }
    let inst_cfg = opts.instance.clone().with_dr(cfg.dr);
    let run = || {
        (0..n)
            .into_par_iter()
            .map(|i| one_episode(i, seed, cfg, opts, &inst_cfg))
            .collect::<Result<Vec<_>, _>>()
    };
    match opts.jobs {
        None => run(),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| BenchmarkError::Pool(e.to_string()))?
            .install(run),
    }
}

pub fn report(
    cfg: &SkillModelConfig,
    seed: u64,
    records: &[EpisodeRecord],
) -> Result<BenchmarkReport, BenchmarkError> {
    build_report(&cfg.name, cfg.method, cfg.dr, seed, records)
}

fn build_report(
    preset: &str,
    method: Method,
    dr: bool,
    seed: u64,
    records: &[EpisodeRecord],
) -> Result<BenchmarkReport, BenchmarkError> {
    let metrics = report_metrics(records).map_err(|_| BenchmarkError::NoEpisodes)?;
    let survival = survival_curve(records).map_err(|_| BenchmarkError::NoEpisodes)?;
    Ok(BenchmarkReport {
        schema: schema::REPORT.to_string(),
        preset: preset.to_string(),
        method,
        dr,
        seed,
        episodes: records.len(),
        metrics,
        survival,
    })
}

pub fn run_benchmark(
    n: usize,
    cfg: &SkillModelConfig,
    seed: u64,
    opts: &BenchmarkOptions,
) -> Result<BenchmarkReport, BenchmarkError> {
    let records = run_records(n, cfg, seed, opts)?;
    report(cfg, seed, &records)
}
