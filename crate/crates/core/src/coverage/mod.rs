//! Reference-trajectory bookkeeping for shared-controller coverage expansion.
//!
//! A reference set grows by union with newly recorded skill rollouts, one
//! generation per aggregation. Directives for controller training are drawn from
//! it by picking a trajectory, a frame, a mask and randomized command targets.

mod io;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    content_hash, read_trajectory, write_trajectory, Manifest, ManifestEntry, TrajectoryHeader,
};

use crate::instance::Range;
use crate::schema::{self, SchemaMismatch};

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("reference set is empty")]
    EmptySet,
    #[error("trajectory {0:?} has no frames")]
    NoFrames(String),
    #[error("trajectory {id:?} frame {frame}: {msg}")]
    BadFrame {
        id: String,
        frame: usize,
        msg: String,
    },
    #[error("id {0:?} already present with different content")]
    Collision(String),
    #[error("trajectory {0:?} is not a pickup or place rollout")]
    NotReversible(String),
    #[error("trajectory {id:?} frame {frame} has no phase label")]
    MissingPhase { id: String, frame: usize },
    #[error("box height {0} m gives a non-positive approach phase")]
    BoxHeight(f64),
    #[error("mask distribution has no template with positive weight")]
    NoMaskTemplate,
    #[error(transparent)]
    Schema(#[from] SchemaMismatch),
    #[error("malformed trajectory data: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Motion-capture data in the initial set.
    Mocap,
    /// Trajectory-optimization output in the initial set.
    TrajOpt,
    PickupRollout,
    PlaceRollout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    RootPosition,
    RootOrientation,
    RootVelocity,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub kind: ComponentKind,
}

impl Component {
    pub fn new(name: &str, kind: ComponentKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach,
    Contact,
    Lift,
    Stand,
    Place,
}

impl Phase {
    /// Pickup/place relabeling under time reversal.
    pub fn reversed(self) -> Phase {
        match self {
            Phase::Lift => Phase::Approach,
            Phase::Approach => Phase::Lift,
            Phase::Stand => Phase::Place,
            Phase::Place => Phase::Stand,
            Phase::Contact => Phase::Contact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub values: Vec<f64>,
    /// 1 where the component is an active constraint.
    pub mask: Vec<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub phase: Option<Phase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub id: String,
    pub source: Source,
    /// Whether the rollout was recorded under domain randomization.
    #[serde(default)]
    pub recorded_with_dr: bool,
    pub components: Vec<Component>,
    pub frames: Vec<Frame>,
}

const REVERSED_SUFFIX: &str = "~reversed";

impl ReferenceTrajectory {
    pub fn validate(&self) -> Result<(), CoverageError> {
        if self.frames.is_empty() {
            return Err(CoverageError::NoFrames(self.id.clone()));
        }
        let n = self.components.len();
        for (i, f) in self.frames.iter().enumerate() {
            let bad = |msg: String| CoverageError::BadFrame {
                id: self.id.clone(),
                frame: i,
                msg,
            };
            if f.values.len() != n || f.mask.len() != n {
                return Err(bad(format!(
                    "{} values and {} mask entries for {n} components",
                    f.values.len(),
                    f.mask.len()
                )));
            }
            if f.mask.iter().any(|m| *m > 1) {
                return Err(bad("mask is not binary".into()));
            }
            if f.values.iter().any(|v| !v.is_finite()) {
                return Err(bad("non-finite value".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Time-reverse a pickup rollout into a place reference (and back).
///
/// Frames are reversed, root velocities negated, phases relabeled and masks kept.
pub fn reverse_pickup_to_place(
    t: &ReferenceTrajectory,
) -> Result<ReferenceTrajectory, CoverageError> {
    let source = match t.source {
        Source::PickupRollout => Source::PlaceRollout,
        Source::PlaceRollout => Source::PickupRollout,
        _ => return Err(CoverageError::NotReversible(t.id.clone())),
    };
    t.validate()?;
    let negate: Vec<bool> = t
        .components
        .iter()
        .map(|c| c.kind == ComponentKind::RootVelocity)
        .collect();
    let frames = t
        .frames
        .iter()
        .enumerate()
        .rev()
        .map(|(i, f)| {
            let phase = f.phase.ok_or_else(|| CoverageError::MissingPhase {
                id: t.id.clone(),
                frame: i,
            })?;
            Ok(Frame {
                values: f
                    .values
                    .iter()
                    .zip(&negate)
                    .map(|(v, n)| if *n { -v } else { *v })
                    .collect(),
                mask: f.mask.clone(),
                phase: Some(phase.reversed()),
            })
        })
        .collect::<Result<Vec<_>, CoverageError>>()?;
    let id = match t.id.strip_suffix(REVERSED_SUFFIX) {
        Some(base) => base.to_string(),
        None => format!("{}{REVERSED_SUFFIX}", t.id),
    };
    Ok(ReferenceTrajectory {
        id,
        source,
        recorded_with_dr: t.recorded_with_dr,
        components: t.components.clone(),
        frames,
    })
}

fn default_schema() -> String {
    schema::REFERENCE_SET.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub generation: u64,
    pub trajectories: BTreeMap<String, ReferenceTrajectory>,
}

impl Default for ReferenceSet {
    fn default() -> Self {
        Self {
            schema: default_schema(),
            generation: 0,
            trajectories: BTreeMap::new(),
        }
    }
}

impl ReferenceSet {
    /// Initial set from base trajectories.
    pub fn initial(
        ts: impl IntoIterator<Item = ReferenceTrajectory>,
    ) -> Result<Self, CoverageError> {
        aggregate(&ReferenceSet::default(), ts).map(|mut s| {
            s.generation = 0;
            s
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn frame_count(&self) -> usize {
        self.trajectories.values().map(|t| t.frames.len()).sum()
    }

    pub fn from_json(text: &str) -> Result<Self, CoverageError> {
        let s: ReferenceSet =
            serde_json::from_str(text).map_err(|e| CoverageError::Malformed(e.to_string()))?;
        schema::check(schema::REFERENCE_SET, &s.schema)?;
        for (k, t) in &s.trajectories {
            if *k != t.id {
                return Err(CoverageError::Malformed(format!(
                    "key {k:?} holds id {:?}",
                    t.id
                )));
            }
            t.validate()?;
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reference set serializes")
    }
}

/// `prev ∪ new` by id, one generation later. Re-adding an identical trajectory is a
/// no-op; the same id with other content is an error.
pub fn aggregate(
    prev: &ReferenceSet,
    new: impl IntoIterator<Item = ReferenceTrajectory>,
) -> Result<ReferenceSet, CoverageError> {
    let mut out = prev.clone();
    for t in new {
        t.validate()?;
        match out.trajectories.get(&t.id) {
            Some(existing) if *existing != t => return Err(CoverageError::Collision(t.id)),
            Some(_) => {}
            None => {
                out.trajectories.insert(t.id.clone(), t);
            }
        }
    }
    out.generation = prev.generation + 1;
    Ok(out)
}

/// Per-kind activation probabilities of one mask template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskTemplate {
    pub name: String,
    pub weight: f64,
    pub root_position: f64,
    pub root_orientation: f64,
    pub root_velocity: f64,
    pub joint: f64,
}

impl MaskTemplate {
    fn p(&self, kind: ComponentKind) -> f64 {
        match kind {
            ComponentKind::RootPosition => self.root_position,
            ComponentKind::RootOrientation => self.root_orientation,
            ComponentKind::RootVelocity => self.root_velocity,
            ComponentKind::Joint => self.joint,
        }
    }
}

/// Mask templates and command-target ranges for directive sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandDistConfig {
    pub masks: Vec<MaskTemplate>,
    pub commands: BTreeMap<String, Range>,
}

impl Default for CommandDistConfig {
    fn default() -> Self {
        let t = |name: &str, weight, rp, ro, rv, j| MaskTemplate {
            name: name.into(),
            weight,
            root_position: rp,
            root_orientation: ro,
            root_velocity: rv,
            joint: j,
        };
        Self {
            masks: vec![
                t("locomotion", 0.4, 0.0, 0.5, 1.0, 0.0),
                t("manipulation", 0.4, 0.5, 1.0, 0.5, 1.0),
                t("full", 0.2, 1.0, 1.0, 1.0, 1.0),
            ],
            commands: BTreeMap::from([
                ("base_height".into(), Range::new(0.6, 1.0)),
                ("base_pitch".into(), Range::new(-0.2, 0.5)),
                ("vx".into(), Range::new(-0.5, 0.5)),
                ("vy".into(), Range::new(-0.3, 0.3)),
                ("yaw_rate".into(), Range::new(-0.6, 0.6)),
            ]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub trajectory_id: String,
    pub time_index: usize,
    pub mask: Vec<u8>,
    pub commands: BTreeMap<String, f64>,
}

pub fn sample_directive(
    r: &ReferenceSet,
    cfg: &CommandDistConfig,
    rng: &mut impl Rng,
) -> Result<Directive, CoverageError> {
    if r.is_empty() {
        return Err(CoverageError::EmptySet);
    }
    let total: f64 = cfg.masks.iter().map(|m| m.weight.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(CoverageError::NoMaskTemplate);
    }
    let i = rng.random_range(0..r.len());
    let t = r.trajectories.values().nth(i).expect("index in range");
    let time_index = rng.random_range(0..t.frames.len());

    let mut u = rng.random::<f64>() * total;
    let template = cfg
        .masks
        .iter()
        .filter(|m| m.weight > 0.0)
        .find(|m| {
            u -= m.weight;
            u < 0.0
        })
        .or_else(|| cfg.masks.iter().rev().find(|m| m.weight > 0.0))
        .expect("positive total weight");
    let mask = t
        .components
        .iter()
        .map(|c| u8::from(rng.random::<f64>() < template.p(c.kind)))
        .collect();
    let commands = cfg
        .commands
        .iter()
        .map(|(k, range)| (k.clone(), range.sample(rng)))
        .collect();
    Ok(Directive {
        trajectory_id: t.id.clone(),
        time_index,
        mask,
        commands,
    })
}

/// Step counts of the scripted pickup phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub approach: u32,
    pub contact: u32,
    pub lift: u32,
    /// Table is removed this many steps after contact starts.
    pub table_removal_offset: u32,
    pub terminal_stand: u32,
}

/// Approach length before rounding: `100 * (0.9 - h) + 30` steps.
pub fn approach_steps(box_height: f64) -> f64 {
    100.0 * (0.9 - box_height) + 30.0
}

pub fn pickup_phase_schedule(box_height: f64) -> Result<PhaseSchedule, CoverageError> {
    let a = approach_steps(box_height);
    if !(box_height > 0.0) || !(a >= 1.0) {
        return Err(CoverageError::BoxHeight(box_height));
    }
    Ok(PhaseSchedule {
        approach: a.round() as u32,
        contact: 25,
        lift: 35,
        table_removal_offset: 45,
        terminal_stand: 120,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub command: String,
    pub range: Range,
    /// Counts per equal-width bin over `range`.
    pub bins: Vec<usize>,
    pub outside: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub generation: u64,
    pub trajectories: usize,
    pub frames: usize,
    pub frames_by_source: BTreeMap<Source, usize>,
    /// Fraction of frames carrying each component in which it is active.
    pub activation: BTreeMap<String, f64>,
    /// Frame values of components named like a command, binned over its range.
    pub occupancy: Vec<Occupancy>,
}

pub const OCCUPANCY_BINS: usize = 10;

pub fn coverage_stats(
    r: &ReferenceSet,
    cmd: &CommandDistConfig,
) -> Result<CoverageReport, CoverageError> {
    if r.is_empty() {
        return Err(CoverageError::EmptySet);
    }
    let mut by_source: BTreeMap<Source, usize> = BTreeMap::new();
    let mut active: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut occupancy: Vec<Occupancy> = cmd
        .commands
        .iter()
        .map(|(k, range)| Occupancy {
            command: k.clone(),
            range: *range,
            bins: vec![0; OCCUPANCY_BINS],
            outside: 0,
        })
        .collect();
    for t in r.trajectories.values() {
        *by_source.entry(t.source).or_default() += t.frames.len();
        for (ci, c) in t.components.iter().enumerate() {
            let e = active.entry(c.name.clone()).or_default();
            for f in &t.frames {
                e.0 += f.mask[ci] as usize;
                e.1 += 1;
            }
            if let Some(o) = occupancy.iter_mut().find(|o| o.command == c.name) {
                for f in &t.frames {
                    let v = f.values[ci];
                    let (lo, hi) = (o.range.lo, o.range.hi);
                    if v < lo || v > hi {
                        o.outside += 1;
                    } else {
                        let w = (hi - lo) / OCCUPANCY_BINS as f64;
                        let b = if w > 0.0 { ((v - lo) / w) as usize } else { 0 };
                        o.bins[b.min(OCCUPANCY_BINS - 1)] += 1;
                    }
                }
            }
        }
    }
    Ok(CoverageReport {
        generation: r.generation,
        trajectories: r.len(),
        frames: r.frame_count(),
        frames_by_source: by_source,
        activation: active
            .into_iter()
            .map(|(k, (a, n))| (k, a as f64 / n as f64))
            .collect(),
        occupancy,
    })
}
