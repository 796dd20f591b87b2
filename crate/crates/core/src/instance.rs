//! Benchmark instance and domain-randomization sampling.
//!
//! Each episode draws a workspace radius, three outward-facing towers on the circle
//! and one box per size category. The robot starts at the circle center (the origin)
//! facing the first tower, with every box stacked on that tower.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoxDims, Pose2, Pose3};
use crate::rng;
use crate::schema::{self, SchemaMismatch};
use crate::symbolic::{BoxId, Goal, SymbolicState};

pub const TOWER_COUNT: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("range {name} is inverted or non-finite: [{lo}, {hi}]")]
    InvertedRange { name: String, lo: f64, hi: f64 },
    #[error(
        "could not place {towers} towers with pairwise separation >= {min_separation} m on a circle of radius {radius} m after {attempts} attempts"
    )]
    SeparationInfeasible {
        towers: usize,
        min_separation: f64,
        radius: f64,
        attempts: u32,
    },
    #[error("instance needs at least one box")]
    NoBoxes,
    #[error(transparent)]
    Schema(#[from] SchemaMismatch),
    #[error("malformed instance: {0}")]
    Malformed(String),
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn validate(&self, name: &str) -> Result<(), InstanceError> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi {
            Ok(())
        } else {
            Err(InstanceError::InvertedRange {
                name: name.to_string(),
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// Uniform draw; a degenerate range returns `lo` exactly.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * rng.random::<f64>()
        }
    }
}

impl From<[f64; 2]> for Range {
    fn from(v: [f64; 2]) -> Self {
        Range::new(v[0], v[1])
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.lo, r.hi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxCategory {
    Small,
    Medium,
    Large,
}

impl BoxCategory {
    pub fn size_range(self) -> Range {
        match self {
            BoxCategory::Small => Range::new(0.26, 0.29),
            BoxCategory::Medium => Range::new(0.29, 0.32),
            BoxCategory::Large => Range::new(0.32, 0.35),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeBand {
    pub category: BoxCategory,
    pub size: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub id: BoxId,
    pub category: BoxCategory,
    pub dims: BoxDims,
    /// Total mass (kg).
    pub mass: f64,
    /// Point mass attached at the bottom center (kg); included in `mass`.
    pub point_mass: f64,
    pub sliding_friction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceConfig {
    pub radius: Range,
    pub min_separation: f64,
    pub max_attempts: u32,
    /// One entry per box, smallest (id 0) first.
    pub size_bands: Vec<SizeBand>,
    pub mass: Range,
    pub point_mass: f64,
    pub sliding_friction: Range,
    /// Whether robot dynamics randomization is applied.
    pub dynamics_randomization: bool,
    pub dr_ranges: DrRanges,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            radius: Range::new(1.5, 2.5),
            min_separation: 0.9,
            max_attempts: 10_000,
            size_bands: [BoxCategory::Small, BoxCategory::Medium, BoxCategory::Large]
                .into_iter()
                .map(|category| SizeBand {
                    category,
                    size: category.size_range(),
                })
                .collect(),
            mass: Range::new(0.5, 3.0),
            point_mass: 0.3,
            sliding_friction: Range::new(0.5, 0.7),
            dynamics_randomization: false,
            dr_ranges: DrRanges::default(),
        }
    }
}

impl InstanceConfig {
    pub fn with_dr(mut self, on: bool) -> Self {
        self.dynamics_randomization = on;
        self
    }

    fn validate(&self) -> Result<(), InstanceError> {
        self.radius.validate("radius")?;
        self.mass.validate("mass")?;
        self.sliding_friction.validate("sliding_friction")?;
        for (i, band) in self.size_bands.iter().enumerate() {
            band.size.validate(&format!("size_bands[{i}]"))?;
        }
        if self.size_bands.is_empty() {
            return Err(InstanceError::NoBoxes);
        }
        Ok(())
    }
}

/// Domain-randomization ranges. Robot dynamics entries are multipliers on nominal
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrRanges {
    pub body_mass: Range,
    pub joint_damping: Range,
    pub com_position: Range,
    pub friction: Range,
    pub box_mass: Range,
    pub box_size: Range,
    pub box_x_displacement: Range,
    pub box_y_displacement: Range,
    pub box_z_displacement: Range,
    /// Degrees.
    pub box_yaw: Range,
    pub box_sliding_friction: Range,
    pub box_rolling_friction: Range,
    pub box_spinning_friction: Range,
    /// Milliseconds.
    pub comm_delay: Range,
}

impl Default for DrRanges {
    fn default() -> Self {
        Self {
            body_mass: Range::new(0.75, 1.25),
            joint_damping: Range::new(0.5, 3.5),
            com_position: Range::new(0.95, 1.05),
            friction: Range::new(0.8, 1.2),
            box_mass: Range::new(0.0, 3.5),
            box_size: Range::new(0.15, 0.5),
            box_x_displacement: Range::new(0.3, 0.6),
            box_y_displacement: Range::new(-0.1, 0.1),
            box_z_displacement: Range::new(0.085, 0.95),
            box_yaw: Range::new(-18.0, 18.0),
            box_sliding_friction: Range::new(0.1, 1.0),
            box_rolling_friction: Range::new(0.01, 0.1),
            box_spinning_friction: Range::new(0.001, 0.005),
            comm_delay: Range::new(2.0, 4.0),
        }
    }
}

impl DrRanges {
    fn named(&self) -> [(&'static str, Range); 14] {
        [
            ("body_mass", self.body_mass),
            ("joint_damping", self.joint_damping),
            ("com_position", self.com_position),
            ("friction", self.friction),
            ("box_mass", self.box_mass),
            ("box_size", self.box_size),
            ("box_x_displacement", self.box_x_displacement),
            ("box_y_displacement", self.box_y_displacement),
            ("box_z_displacement", self.box_z_displacement),
            ("box_yaw", self.box_yaw),
            ("box_sliding_friction", self.box_sliding_friction),
            ("box_rolling_friction", self.box_rolling_friction),
            ("box_spinning_friction", self.box_spinning_friction),
            ("comm_delay", self.comm_delay),
        ]
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        self.named()
            .iter()
            .try_for_each(|(name, r)| r.validate(name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRandomization {
    pub mass: f64,
    pub size: [f64; 3],
    pub x_displacement: f64,
    pub y_displacement: f64,
    pub z_displacement: f64,
    pub yaw_deg: f64,
    pub sliding_friction: f64,
    pub rolling_friction: f64,
    pub spinning_friction: f64,
}

/// Per-episode dynamics draw. Carried as episode metadata; the skill models are
/// parameterized by the DR flag, not by individual draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub enabled: bool,
    pub body_mass_scale: f64,
    pub joint_damping_scale: f64,
    pub com_position_scale: f64,
    pub friction_scale: f64,
    pub comm_delay_ms: f64,
    #[serde(rename = "box")]
    pub box_draw: BoxRandomization,
}

const DYNAMICS_STREAM: u64 = 1;
const INSTANCE_STREAM: u64 = 0;

/// Sample a dynamics configuration. With `enabled == false` every multiplier is 1
/// and every other draw sits at its range midpoint.
pub fn sample_dynamics(
    seed: u64,
    ranges: &DrRanges,
    enabled: bool,
) -> Result<DynamicsConfig, InstanceError> {
    ranges.validate()?;
    let mut rng = rng::stream(seed, DYNAMICS_STREAM);
    let mut draw = |r: Range| {
        if enabled {
            r.sample(&mut rng)
        } else {
            r.midpoint()
        }
    };
    let body = draw(ranges.body_mass);
    let damping = draw(ranges.joint_damping);
    let com = draw(ranges.com_position);
    let friction = draw(ranges.friction);
    let box_draw = BoxRandomization {
        mass: draw(ranges.box_mass),
        size: [
            draw(ranges.box_size),
            draw(ranges.box_size),
            draw(ranges.box_size),
        ],
        x_displacement: draw(ranges.box_x_displacement),
        y_displacement: draw(ranges.box_y_displacement),
        z_displacement: draw(ranges.box_z_displacement),
        yaw_deg: draw(ranges.box_yaw),
        sliding_friction: draw(ranges.box_sliding_friction),
        rolling_friction: draw(ranges.box_rolling_friction),
        spinning_friction: draw(ranges.box_spinning_friction),
    };
    let delay = draw(ranges.comm_delay);
    Ok(if enabled {
        DynamicsConfig {
            enabled,
            body_mass_scale: body,
            joint_damping_scale: damping,
            com_position_scale: com,
            friction_scale: friction,
            comm_delay_ms: delay,
            box_draw,
        }
    } else {
        DynamicsConfig {
            enabled,
            body_mass_scale: 1.0,
            joint_damping_scale: 1.0,
            com_position_scale: 1.0,
            friction_scale: 1.0,
            comm_delay_ms: delay,
            box_draw,
        }
    })
}

fn default_schema() -> String {
    schema::INSTANCE.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceInstance {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub seed: u64,
    pub radius: f64,
    /// Circle center; towers face away from it.
    pub center: [f64; 2],
    pub towers: Vec<Pose2>,
    pub boxes: Vec<BoxSpec>,
    pub robot_start: Pose2,
    pub dynamics: DynamicsConfig,
}

impl WorkspaceInstance {
    pub fn n_boxes(&self) -> u32 {
        self.boxes.len() as u32
    }

    pub fn box_spec(&self, id: BoxId) -> Option<&BoxSpec> {
        self.boxes.get(id.0 as usize).filter(|b| b.id == id)
    }

    /// Every box on the first tower, largest at the bottom.
    pub fn start_state(&self) -> SymbolicState {
        SymbolicState::stacked(self.towers.len(), self.n_boxes(), 0)
    }

    /// Every box on the last tower.
    pub fn goal(&self) -> Goal {
        Goal::stacked(self.towers.len(), self.n_boxes(), self.towers.len() - 1)
    }

    /// Nominal pose of the box at `level` on `tower` for the stack `ids` (bottom first):
    /// centered on the tower and aligned with its yaw.
    pub fn ideal_stack_pose(&self, tower: usize, ids: &[BoxId], level: usize) -> Pose3 {
        let t = self.towers[tower];
        let below: f64 = ids[..level]
            .iter()
            .map(|id| self.boxes[id.0 as usize].dims.lz())
            .sum();
        let lz = self.boxes[ids[level].0 as usize].dims.lz();
        Pose3::upright(t.x, t.y, below + lz / 2.0, t.yaw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let inst: WorkspaceInstance =
            serde_json::from_str(text).map_err(|e| InstanceError::Malformed(e.to_string()))?;
        schema::check(schema::INSTANCE, &inst.schema)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.boxes.is_empty() {
            return Err(InstanceError::NoBoxes);
        }
        if self.towers.len() != TOWER_COUNT {
            return Err(InstanceError::Malformed(format!(
                "expected {TOWER_COUNT} towers, found {}",
                self.towers.len()
            )));
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if b.id.0 as usize != i {
                return Err(InstanceError::Malformed(format!(
                    "box at index {i} has id {}",
                    b.id
                )));
            }
        }
        Ok(())
    }
}

fn sample_towers(
    rng: &mut ChaCha8Rng,
    radius: f64,
    min_separation: f64,
    max_attempts: u32,
) -> Result<Vec<Pose2>, InstanceError> {
    for _ in 0..max_attempts {
        let pts: Vec<[f64; 2]> = (0..TOWER_COUNT)
            .map(|_| {
                let a = rng.random_range(-PI..PI);
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        let separated = (0..TOWER_COUNT).all(|i| {
            (i + 1..TOWER_COUNT)
                .all(|j| (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]) >= min_separation)
        });
        if separated {
            // Center is the origin, so the outward heading is atan2(y, x).
            return Ok(pts
                .into_iter()
                .map(|[x, y]| Pose2::new(x, y, y.atan2(x)))
                .collect());
        }
    }
    Err(InstanceError::SeparationInfeasible {
        towers: TOWER_COUNT,
        min_separation,
        radius,
        attempts: max_attempts,
    })
}

/// Sample one benchmark instance. Deterministic in `seed`.
pub fn sample_instance(
    seed: u64,
    config: &InstanceConfig,
) -> Result<WorkspaceInstance, InstanceError> {
    config.validate()?;
    let mut rng = rng::stream(seed, INSTANCE_STREAM);
    let radius = config.radius.sample(&mut rng);
    let towers = sample_towers(&mut rng, radius, config.min_separation, config.max_attempts)?;
    let boxes = config
        .size_bands
        .iter()
        .enumerate()
        .map(|(i, band)| {
            let dims = BoxDims::new(
                band.size.sample(&mut rng),
                band.size.sample(&mut rng),
                band.size.sample(&mut rng),
            )
            .map_err(|e| InstanceError::Malformed(e.to_string()))?;
            Ok(BoxSpec {
                id: BoxId(i as u32),
                category: band.category,
                dims,
                mass: config.mass.sample(&mut rng),
                point_mass: config.point_mass,
                sliding_friction: config.sliding_friction.sample(&mut rng),
            })
        })
        .collect::<Result<Vec<_>, InstanceError>>()?;
    let dynamics = sample_dynamics(seed, &config.dr_ranges, config.dynamics_randomization)?;
    Ok(WorkspaceInstance {
        schema: schema::INSTANCE.to_string(),
        seed,
        radius,
        center: [0.0, 0.0],
        robot_start: Pose2::new(0.0, 0.0, towers[0].yaw),
        towers,
        boxes,
        dynamics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_42_default() {
        let inst = sample_instance(42, &InstanceConfig::default()).unwrap();
        assert!((1.5..=2.5).contains(&inst.radius));
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(inst.towers[i].distance(&inst.towers[j]) >= 0.9);
            }
        }
        assert_eq!(inst.boxes[0].category, BoxCategory::Small);
        assert_eq!(inst.boxes[2].category, BoxCategory::Large);
    }

    #[test]
    fn degenerate_radius() {
        let cfg = InstanceConfig {
            radius: Range::new(2.0, 2.0),
            ..Default::default()
        };
        assert_eq!(sample_instance(1, &cfg).unwrap().radius, 2.0);
    }

    #[test]
    fn infeasible_separation() {
        let cfg = InstanceConfig {
            min_separation: 10.0,
            ..Default::default()
        };
        match sample_instance(1, &cfg) {
            Err(InstanceError::SeparationInfeasible { attempts, .. }) => {
                assert_eq!(attempts, 10_000)
            }
            other => panic!("expected separation error, got {other:?}"),
        }
    }

    #[test]
    fn towers_face_outward() {
        for seed in 0..200 {
            let inst = sample_instance(seed, &InstanceConfig::default()).unwrap();
            for t in &inst.towers {
                assert_eq!(t.yaw, t.y.atan2(t.x));
            }
        }
    }

    #[test]
    fn dynamics_defaults_and_nominal() {
        let d = sample_dynamics(9, &DrRanges::default(), true).unwrap();
        assert!((0.75..=1.25).contains(&d.body_mass_scale));
        assert!((2.0..=4.0).contains(&d.comm_delay_ms));
        let nominal = sample_dynamics(9, &DrRanges::default(), false).unwrap();
        assert_eq!(nominal.body_mass_scale, 1.0);
        assert_eq!(nominal.joint_damping_scale, 1.0);
        assert_eq!(nominal.com_position_scale, 1.0);
        assert_eq!(nominal.friction_scale, 1.0);
        assert_eq!(nominal.comm_delay_ms, 3.0);
    }

    #[test]
    fn inverted_range_rejected() {
        let ranges = DrRanges {
            joint_damping: Range::new(3.5, 0.5),
            ..Default::default()
        };
        assert!(matches!(
            sample_dynamics(0, &ranges, true),
            Err(InstanceError::InvertedRange { ref name, .. }) if name == "joint_damping"
        ));
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = InstanceConfig::default().with_dr(true);
        let a = sample_instance(77, &cfg).unwrap().to_json();
        let b = sample_instance(77, &cfg).unwrap().to_json();
        assert_eq!(a, b);
        let back = WorkspaceInstance::from_json(&a).unwrap();
        assert_eq!(back.to_json(), a);
    }

    #[test]
    fn schema_checked() {
        let mut inst = sample_instance(1, &InstanceConfig::default()).unwrap();
        inst.schema = "hanoi-instance/0".into();
        assert!(matches!(
            WorkspaceInstance::from_json(&inst.to_json()),
            Err(InstanceError::Schema(_))
        ));
    }
}
