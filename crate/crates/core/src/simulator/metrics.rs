use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EpisodeRecord;
use crate::skills::{FailureMode, SkillKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no records")]
    Empty,
    #[error("records disagree on skill count ({0} vs {1})")]
    MixedLengths(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub k: usize,
    pub skill_kind: SkillKind,
    pub move_index: usize,
    pub survival_fraction: f64,
    /// Last skill of a move.
    pub move_end: bool,
}

/// Fraction of trials that succeeded through each skill invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub n_trials: usize,
    pub points: Vec<SurvivalPoint>,
}

impl SurvivalCurve {
    pub fn at(&self, k: usize) -> Option<f64> {
        k.checked_sub(1)
            .and_then(|i| self.points.get(i))
            .map(|p| p.survival_fraction)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].survival_fraction <= w[0].survival_fraction)
    }
}

fn common_length(records: &[EpisodeRecord]) -> Result<usize, MetricsError> {
    let first = records.first().ok_or(MetricsError::Empty)?.total_skills;
    match records.iter().find(|r| r.total_skills != first) {
        Some(r) => Err(MetricsError::MixedLengths(first, r.total_skills)),
        None => Ok(first),
    }
}

pub fn survival_curve(records: &[EpisodeRecord]) -> Result<SurvivalCurve, MetricsError> {
    let total = common_length(records)?;
    let n = records.len();
    // reached[j] = number of records with exactly j leading successes.
    let mut reached = vec![0usize; total + 1];
    for r in records {
        reached[r.leading_successes().min(total)] += 1;
    }
    let mut at_least = n;
    let mut points = Vec::with_capacity(total);
    for k in 1..=total {
        at_least -= reached[k - 1];
        points.push(SurvivalPoint {
            k,
            skill_kind: SkillKind::ALL[(k - 1) % 4],
            move_index: (k - 1) / 4 + 1,
            survival_fraction: at_least as f64 / n as f64,
            move_end: k % 4 == 0,
        });
    }
    Ok(SurvivalCurve {
        n_trials: n,
        points,
    })
}

/// One row per invocation: `k,skill_kind,move_index,survival_fraction`.
pub fn write_survival_csv(curve: &SurvivalCurve, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "k,skill_kind,move_index,survival_fraction")?;
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{}",
            p.k, p.skill_kind, p.move_index, p.survival_fraction
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for fewer than two values.
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() < 2 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

/// Absolute errors over successful trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub n: usize,
    pub x_cm: Stat,
    pub y_cm: Stat,
    pub yaw_deg: Stat,
}

impl ErrorStats {
    fn of<'a>(errs: impl Iterator<Item = &'a [f64; 3]> + Clone) -> Self {
        Self {
            n: errs.clone().count(),
            x_cm: Stat::of(errs.clone().map(|e| e[0].abs())),
            y_cm: Stat::of(errs.clone().map(|e| e[1].abs())),
            yaw_deg: Stat::of(errs.map(|e| e[2].abs())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCount {
    pub skill: SkillKind,
    pub mode: FailureMode,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: String,
    pub n_trials: usize,
    pub n_success: usize,
    pub success_rate: f64,
    pub avg_completed_moves: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub n_trials: usize,
    pub n_success: usize,
    pub success_rate: f64,
    pub avg_completed_moves: f64,
    /// Each placement against its Place target.
    pub placement: ErrorStats,
    /// Each placement against the ideal tower pose at its level.
    pub placement_vs_ideal: ErrorStats,
    /// Final box poses against the ideal final tower.
    pub final_xy_cm: Stat,
    pub final_yaw_deg: Stat,
    /// First failure of every failed trial, by (skill, mode).
    pub failures: Vec<FailureCount>,
    /// Every failed invocation; differs from `failures` only with continue-on-failure.
    pub all_failures: Vec<FailureCount>,
    pub groups: Vec<GroupMetrics>,
}

fn histogram<'a>(it: impl Iterator<Item = &'a super::Invocation>) -> Vec<FailureCount> {
    let mut h: BTreeMap<(SkillKind, FailureMode), usize> = BTreeMap::new();
    for inv in it {
        if let Some(mode) = inv.failure_mode {
            *h.entry((inv.kind, mode)).or_default() += 1;
        }
    }
    h.into_iter()
        .map(|((skill, mode), count)| FailureCount { skill, mode, count })
        .collect()
}

fn ratio(a: usize, b: usize) -> f64 {
    a as f64 / b as f64
}

pub fn report_metrics(records: &[EpisodeRecord]) -> Result<MetricsTable, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = records.len();
    let n_success = records.iter().filter(|r| r.success).count();
    let moves: usize = records.iter().map(|r| r.completed_moves).sum();
    let ok = || records.iter().filter(|r| r.success);

    let mut groups: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for r in records {
        let g = groups.entry(r.group.as_deref().unwrap_or("")).or_default();
        g.0 += 1;
        g.1 += r.success as usize;
        g.2 += r.completed_moves;
    }

    Ok(MetricsTable {
        n_trials: n,
        n_success,
        success_rate: ratio(n_success, n),
        avg_completed_moves: ratio(moves, n),
        placement: ErrorStats::of(ok().flat_map(|r| r.placements.iter().map(|p| &p.target))),
        placement_vs_ideal: ErrorStats::of(
            ok().flat_map(|r| r.placements.iter().map(|p| &p.ideal)),
        ),
        final_xy_cm: Stat::of(ok().flat_map(|r| r.final_errors.iter().map(|e| e.xy_cm))),
        final_yaw_deg: Stat::of(ok().flat_map(|r| r.final_errors.iter().map(|e| e.yaw_deg))),
        failures: histogram(
            records
                .iter()
                .filter(|r| !r.success)
                .filter_map(|r| r.first_failure()),
        ),
        all_failures: histogram(records.iter().flat_map(|r| r.invocations.iter())),
        groups: groups
            .into_iter()
            .map(|(g, (t, s, m))| GroupMetrics {
                group: g.to_string(),
                n_trials: t,
                n_success: s,
                success_rate: ratio(s, t),
                avg_completed_moves: ratio(m, t),
            })
            .collect(),
    })
}
