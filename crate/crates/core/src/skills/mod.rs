//! Stochastic skill models.
//!
//! Each skill maps (world, command, calibration, random streams) to an outcome. A
//! skill first draws its Bernoulli success from the calibrated table, then the
//! geometric checks (handoff, stack stability, departure sweep) can still turn a
//! drawn success into a failure.

pub(crate) mod config;

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    BandRates, ConfigError, FailureMix, HeightBand, Method, NoiseConfig, SkillModelConfig,
    SuccessTable, Thresholds,
};

use crate::geometry::{point_segment_distance, wrap_angle, Pose2, Pose3};
use crate::rng::SkillRng;
use crate::simulator::{Grasp, WorldState};
use crate::symbolic::{BoxId, Rule, SymbolicError};

/// Base height and pitch held while carrying a box.
pub const TRANSPORT_BASE_HEIGHT: f64 = 0.85;
pub const TRANSPORT_BASE_PITCH: f64 = 0.0;

/// Floating-point slack on handoff threshold comparisons.
const HANDOFF_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    GoTo,
    Pickup,
    GoToWithBox,
    Place,
}

impl SkillKind {
    /// Order of the skills inside one move.
    pub const ALL: [SkillKind; 4] = [
        SkillKind::GoTo,
        SkillKind::Pickup,
        SkillKind::GoToWithBox,
        SkillKind::Place,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SkillKind::GoTo => "goto",
            SkillKind::Pickup => "pickup",
            SkillKind::GoToWithBox => "goto_with_box",
            SkillKind::Place => "place",
        }
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    PlacePitchFlip,
    RecoveryStepDisturbance,
    DepartureStackCollision,
    OffCenterGraspDrop,
    LocalizationHandoffError,
    YawMisalignment,
    FallInstability,
    BoxDropTransport,
    Timeout,
}

impl FailureMode {
    pub const ALL: [FailureMode; 9] = [
        FailureMode::PlacePitchFlip,
        FailureMode::RecoveryStepDisturbance,
        FailureMode::DepartureStackCollision,
        FailureMode::OffCenterGraspDrop,
        FailureMode::LocalizationHandoffError,
        FailureMode::YawMisalignment,
        FailureMode::FallInstability,
        FailureMode::BoxDropTransport,
        FailureMode::Timeout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureMode::PlacePitchFlip => "place_pitch_flip",
            FailureMode::RecoveryStepDisturbance => "recovery_step_disturbance",
            FailureMode::DepartureStackCollision => "departure_stack_collision",
            FailureMode::OffCenterGraspDrop => "off_center_grasp_drop",
            FailureMode::LocalizationHandoffError => "localization_handoff_error",
            FailureMode::YawMisalignment => "yaw_misalignment",
            FailureMode::FallInstability => "fall_instability",
            FailureMode::BoxDropTransport => "box_drop_transport",
            FailureMode::Timeout => "timeout",
        }
    }
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportPosture {
    pub base_height: f64,
    pub base_pitch: f64,
}

impl Default for TransportPosture {
    fn default() -> Self {
        Self {
            base_height: TRANSPORT_BASE_HEIGHT,
            base_pitch: TRANSPORT_BASE_PITCH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillTarget {
    /// SE(2) stance for the locomotion skills.
    Base(Pose2),
    /// Box pose to grasp or placement pose.
    Box(Pose3),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillCommand {
    pub kind: SkillKind,
    pub target: SkillTarget,
    pub box_id: Option<BoxId>,
    /// Tower the skill acts on: source for GoTo/Pickup, destination otherwise.
    pub tower: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posture: Option<TransportPosture>,
}

impl SkillCommand {
    pub fn goto(stance: Pose2, tower: usize) -> Self {
        Self {
            kind: SkillKind::GoTo,
            target: SkillTarget::Base(stance),
            box_id: None,
            tower,
            posture: None,
        }
    }

    pub fn pickup(box_pose: Pose3, box_id: BoxId, tower: usize) -> Self {
        Self {
            kind: SkillKind::Pickup,
            target: SkillTarget::Box(box_pose),
            box_id: Some(box_id),
            tower,
            posture: None,
        }
    }

    pub fn goto_with_box(stance: Pose2, box_id: BoxId, tower: usize) -> Self {
        Self {
            kind: SkillKind::GoToWithBox,
            target: SkillTarget::Base(stance),
            box_id: Some(box_id),
            tower,
            posture: Some(TransportPosture::default()),
        }
    }

    pub fn place(target: Pose3, box_id: BoxId, tower: usize) -> Self {
        Self {
            kind: SkillKind::Place,
            target: SkillTarget::Box(target),
            box_id: Some(box_id),
            tower,
            posture: None,
        }
    }

    pub fn base_target(&self) -> Option<Pose2> {
        match self.target {
            SkillTarget::Base(p) => Some(p),
            SkillTarget::Box(_) => None,
        }
    }

    pub fn box_target(&self) -> Option<Pose3> {
        match self.target {
            SkillTarget::Box(p) => Some(p),
            SkillTarget::Base(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillOutcome {
    pub success: bool,
    pub failure_mode: Option<FailureMode>,
    pub world: WorldState,
    /// GoTo: final base pose in the target frame. Pickup: in-gripper offset.
    /// Place: placed box pose in the placement-target frame.
    pub residual: Pose2,
}

impl SkillOutcome {
    fn ok(world: WorldState, residual: Pose2) -> Self {
        Self {
            success: true,
            failure_mode: None,
            world,
            residual,
        }
    }

    fn fail(mode: FailureMode, world: WorldState, residual: Pose2) -> Self {
        Self {
            success: false,
            failure_mode: Some(mode),
            world,
            residual,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkillError {
    #[error("{executor} cannot execute a {kind} command")]
    WrongKind {
        executor: &'static str,
        kind: SkillKind,
    },
    #[error("command is missing its {0}")]
    MissingField(&'static str),
    #[error("box {0} is not on top of a stack")]
    NotTopBox(BoxId),
    #[error("hand state does not match command: {0}")]
    Hand(String),
    #[error("tower {0} out of range")]
    UnknownTower(usize),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

fn bounded_gaussian_2d(sigma: f64, bound: f64, rng: &mut impl Rng) -> [f64; 2] {
    if sigma <= 0.0 {
        return [0.0, 0.0];
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    loop {
        let v = [n.sample(rng), n.sample(rng)];
        if v[0].hypot(v[1]) <= bound {
            return v;
        }
    }
}

fn bounded_gaussian(sigma: f64, bound: f64, rng: &mut impl Rng) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let n = Normal::new(0.0, sigma).expect("finite sigma");
    loop {
        let v = n.sample(rng);
        if v.abs() <= bound {
            return v;
        }
    }
}

fn gaussian(sigma: f64, rng: &mut impl Rng) -> f64 {
    if sigma <= 0.0 {
        0.0
    } else {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    }
}

/// Fixed outcome draws: success, failure-mode choice and (Place) recovery.
struct Draws {
    success: f64,
    mode: f64,
    recovery: f64,
}

impl Draws {
    fn take(rng: &mut SkillRng) -> Self {
        Self {
            success: rng.outcome.random(),
            mode: rng.outcome.random(),
            recovery: rng.outcome.random(),
        }
    }
}

fn band_for(height: f64, cfg: &SkillModelConfig) -> HeightBand {
    if height < cfg.thresholds.low_height {
        HeightBand::Low
    } else {
        HeightBand::Normal
    }
}

/// Stance in front of a support point, facing along the tower's outward heading.
pub fn stance_for(support_xy: [f64; 2], tower: &Pose2, reach: f64) -> Pose2 {
    let (s, c) = tower.yaw.sin_cos();
    Pose2::new(
        support_xy[0] - reach * c,
        support_xy[1] - reach * s,
        tower.yaw,
    )
}

/// Nominal held-box pose in the robot frame, before grasp error.
fn hold_pose(reach: f64, z: f64, grasp: &Pose2) -> (Pose2, f64) {
    (Pose2::new(reach, 0.0, 0.0).compose(grasp), z)
}

fn carry_box(world: &mut WorldState, cfg: &SkillModelConfig) {
    if let Some(g) = world.in_hand {
        let robot = world.robot;
        let b = world.box_state_mut(g.box_id);
        let reach = cfg.compile.standoff + b.dims.lx() / 2.0;
        let (rel, z) = hold_pose(reach, b.actual.position[2], &g.offset);
        let p = robot.compose(&rel);
        b.actual = Pose3::upright(p.x, p.y, z, p.yaw);
    }
}

/// Checks the robot's actual pose against the ideal stance implied by the actual
/// support point. Only perception error can push it past the thresholds.
fn handoff_failure(
    world: &WorldState,
    support_xy: [f64; 2],
    reach: f64,
    tower: usize,
    cfg: &SkillModelConfig,
) -> Option<FailureMode> {
    if !cfg.geometric_failures {
        return None;
    }
    let ideal = stance_for(support_xy, &world.towers[tower], reach);
    let t = &cfg.thresholds;
    if world.robot.distance(&ideal) > t.handoff_distance + HANDOFF_EPS {
        Some(FailureMode::LocalizationHandoffError)
    } else if world.robot.yaw_error(&ideal).abs() > t.handoff_yaw + HANDOFF_EPS {
        Some(FailureMode::YawMisalignment)
    } else {
        None
    }
}

/// GoTo and GoTo-with-box. On success the robot stops within the handoff distance and
/// yaw tolerance of the target; a carried box moves rigidly with the base.
pub fn execute_goto(
    world: &WorldState,
    cmd: &SkillCommand,
    cfg: &SkillModelConfig,
    rng: &mut SkillRng,
) -> Result<SkillOutcome, SkillError> {
    if !matches!(cmd.kind, SkillKind::GoTo | SkillKind::GoToWithBox) {
        return Err(SkillError::WrongKind {
            executor: "goto",
            kind: cmd.kind,
        });
    }
    let target = cmd
        .base_target()
        .ok_or(SkillError::MissingField("base target"))?;
    let carrying = world.in_hand.map(|g| g.box_id);
    match (cmd.kind, carrying) {
        (SkillKind::GoTo, Some(b)) => {
            return Err(SkillError::Hand(format!("GoTo issued while holding {b}")))
        }
        (SkillKind::GoToWithBox, None) => {
            return Err(SkillError::Hand(
                "GoTo-with-box issued with empty hand".into(),
            ))
        }
        _ => {}
    }

    let draws = Draws::take(rng);
    let t = &cfg.thresholds;
    let [ex, ey] = bounded_gaussian_2d(
        cfg.noise.goto_position_sigma,
        t.handoff_distance,
        &mut rng.noise,
    );
    let eyaw = bounded_gaussian(cfg.noise.goto_yaw_sigma, t.handoff_yaw, &mut rng.noise);
    let residual = Pose2::new(ex, ey, eyaw);

    let mut next = world.clone();
    let p = cfg.success.get(cmd.kind, HeightBand::Normal);
    if draws.success >= p {
        let mode = cfg.failure_mix.choose(cmd.kind, draws.mode);
        if let Some(b) = carrying {
            next.knock_loose(b);
        }
        return Ok(SkillOutcome::fail(mode, next, residual));
    }
    next.robot = target.compose(&residual);
    carry_box(&mut next, cfg);
    Ok(SkillOutcome::ok(next, residual))
}

/// True iff the robot disc, swept along the straight path from `from` to `to`, moves
/// strictly inside some stacked box's footprint disc inflated by the clearance.
///
/// Only closing in counts: a robot that starts inside the inflated disc (it stood
/// close to place) and walks away from the box does not collide. The stack at the
/// tower nearest `to` is the one being approached and is exempt.
pub fn check_departure_collision(
    world: &WorldState,
    from: &Pose2,
    to: &Pose2,
    cfg: &SkillModelConfig,
) -> bool {
    departure_clearances(world, from, to, cfg).any(|(_, slack)| slack < 0.0)
}

/// Per stacked box: how far the path stays outside its inflated footprint, or how
/// far it intrudes beyond the starting distance (negative).
pub(crate) fn departure_clearances<'a>(
    world: &'a WorldState,
    from: &'a Pose2,
    to: &'a Pose2,
    cfg: &'a SkillModelConfig,
) -> impl Iterator<Item = (BoxId, f64)> + 'a {
    let t = &cfg.thresholds;
    let approached = world
        .towers
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distance(to).total_cmp(&b.1.distance(to)))
        .map(|(i, _)| i);
    let stacks = world
        .stacks
        .iter()
        .enumerate()
        .filter(move |(i, _)| Some(*i) != approached)
        .flat_map(|(_, s)| s);
    stacks.map(move |id| {
        let b = world.box_state(*id);
        let c = [b.actual.position[0], b.actual.position[1]];
        let d = point_segment_distance(c, from.translation(), to.translation());
        let start = (c[0] - from.x).hypot(c[1] - from.y);
        let limit = t.robot_radius + b.dims.footprint_radius() + t.departure_clearance;
        let slack = if d < start {
            d - limit
        } else {
            (d - limit).max(0.0)
        };
        (*id, slack)
    })
}

pub fn execute_pickup(
    world: &WorldState,
    cmd: &SkillCommand,
    cfg: &SkillModelConfig,
    rng: &mut SkillRng,
) -> Result<SkillOutcome, SkillError> {
    if cmd.kind != SkillKind::Pickup {
        return Err(SkillError::WrongKind {
            executor: "pickup",
            kind: cmd.kind,
        });
    }
    let id = cmd.box_id.ok_or(SkillError::MissingField("box id"))?;
    if world.in_hand.is_some() {
        return Err(SkillError::Hand("pickup with a box already in hand".into()));
    }
    let tower = world.tower_of(id).ok_or(SkillError::NotTopBox(id))?;
    if world.top(tower) != Some(id) {
        return Err(SkillError::NotTopBox(id));
    }

    let draws = Draws::take(rng);
    let n = &cfg.noise;
    let grasp = Pose2::new(
        gaussian(n.grasp_xy_sigma, &mut rng.noise),
        gaussian(n.grasp_xy_sigma, &mut rng.noise),
        gaussian(n.grasp_yaw_sigma, &mut rng.noise),
    );

    let b = world.box_state(id);
    let reach = cfg.compile.standoff + b.dims.lx() / 2.0;
    let bottom = b.actual.position[2] - b.dims.lz() / 2.0;
    let xy = [b.actual.position[0], b.actual.position[1]];

    let mut next = world.clone();
    if let Some(mode) = handoff_failure(world, xy, reach, tower, cfg) {
        return Ok(SkillOutcome::fail(mode, next, grasp));
    }
    let p = cfg.success.get(SkillKind::Pickup, band_for(bottom, cfg));
    if draws.success >= p {
        let mode = cfg.failure_mix.choose(SkillKind::Pickup, draws.mode);
        if mode != FailureMode::Timeout {
            next.knock_loose(id);
        }
        return Ok(SkillOutcome::fail(mode, next, grasp));
    }
    next.stacks[tower].pop();
    next.in_hand = Some(Grasp {
        box_id: id,
        offset: grasp,
    });
    carry_box(&mut next, cfg);
    Ok(SkillOutcome::ok(next, grasp))
}

/// Place the held box. The final pose is the target plus in-gripper offset plus
/// placement noise; on a stack the box stays up only if its center lies inside the
/// support footprint shrunk by the support margin.
pub fn execute_place(
    world: &WorldState,
    cmd: &SkillCommand,
    cfg: &SkillModelConfig,
    rng: &mut SkillRng,
) -> Result<SkillOutcome, SkillError> {
    if cmd.kind != SkillKind::Place {
        return Err(SkillError::WrongKind {
            executor: "place",
            kind: cmd.kind,
        });
    }
    let target = cmd
        .box_target()
        .ok_or(SkillError::MissingField("placement target"))?;
    let grasp = world
        .in_hand
        .ok_or_else(|| SkillError::Hand("place with an empty hand".into()))?;
    if cmd.box_id.is_some_and(|b| b != grasp.box_id) {
        return Err(SkillError::Hand(format!(
            "command places {:?} but hand holds {}",
            cmd.box_id, grasp.box_id
        )));
    }
    let tower = cmd.tower;
    if tower >= world.stacks.len() {
        return Err(SkillError::UnknownTower(tower));
    }
    let support = world.top(tower);
    if support.is_some_and(|s| grasp.box_id >= s) {
        return Err(SymbolicError::ConstraintViolation {
            rule: Rule::LargerOnSmaller,
        }
        .into());
    }

    let draws = Draws::take(rng);
    let n = &cfg.noise;
    let noise = Pose2::new(
        gaussian(n.place_x_sigma, &mut rng.noise),
        gaussian(n.place_y_sigma, &mut rng.noise),
        gaussian(n.place_yaw_sigma, &mut rng.noise),
    );

    let held = world.box_state(grasp.box_id);
    let dims = held.dims;
    let reach = cfg.compile.standoff + dims.lx() / 2.0;
    let (support_xy, support_top) = world.support(tower, false);

    // Target expressed as a planar frame; grasp offset rotates with the base.
    let target2 = target.planar();
    let g = world.robot.rotate([grasp.offset.x, grasp.offset.y]);
    let nz = target2.rotate([noise.x, noise.y]);
    let placed = Pose2::new(
        target2.x + g[0] + nz[0],
        target2.y + g[1] + nz[1],
        target2.yaw + grasp.offset.yaw + noise.yaw,
    );
    let residual = placed.in_frame(&target2);

    let mut next = world.clone();
    if let Some(mode) = handoff_failure(world, support_xy, reach, tower, cfg) {
        return Ok(SkillOutcome::fail(mode, next, residual));
    }
    let p = cfg
        .success
        .get(SkillKind::Place, band_for(support_top, cfg));
    if draws.success >= p {
        let mode = cfg.failure_mix.choose(SkillKind::Place, draws.mode);
        next.knock_loose(grasp.box_id);
        return Ok(SkillOutcome::fail(mode, next, residual));
    }

    let b = next.box_state_mut(grasp.box_id);
    b.actual = Pose3::upright(
        placed.x,
        placed.y,
        support_top + dims.lz() / 2.0,
        placed.yaw,
    );
    next.in_hand = None;
    next.stacks[tower].push(grasp.box_id);

    if cfg.geometric_failures {
        if let Some(s) = support {
            if !supported(&placed, world, s, cfg.thresholds.support_margin) {
                next.knock_loose(grasp.box_id);
                return Ok(SkillOutcome::fail(
                    FailureMode::PlacePitchFlip,
                    next,
                    residual,
                ));
            }
        }
    }
    if draws.recovery < cfg.recovery_disturbance {
        return Ok(SkillOutcome::fail(
            FailureMode::RecoveryStepDisturbance,
            next,
            residual,
        ));
    }
    Ok(SkillOutcome::ok(next, residual))
}

/// Whether a box centered at `placed` rests on support box `s`.
pub fn supported(placed: &Pose2, world: &WorldState, s: BoxId, margin: f64) -> bool {
    let sb = world.box_state(s);
    let rel = placed.in_frame(&sb.actual.planar());
    rel.x.abs() <= margin * sb.dims.lx() / 2.0 && rel.y.abs() <= margin * sb.dims.ly() / 2.0
}

/// Dispatch on the command kind.
pub fn execute(
    world: &WorldState,
    cmd: &SkillCommand,
    cfg: &SkillModelConfig,
    rng: &mut SkillRng,
) -> Result<SkillOutcome, SkillError> {
    match cmd.kind {
        SkillKind::GoTo | SkillKind::GoToWithBox => execute_goto(world, cmd, cfg, rng),
        SkillKind::Pickup => execute_pickup(world, cmd, cfg, rng),
        SkillKind::Place => execute_place(world, cmd, cfg, rng),
    }
}

/// Signed planar error of `actual` relative to `reference`, in the reference frame:
/// (x m, y m, yaw rad).
pub fn planar_error(actual: &Pose3, reference: &Pose3) -> Pose2 {
    let a = actual.planar();
    let r = reference.planar();
    let rel = a.in_frame(&r);
    Pose2::new(rel.x, rel.y, wrap_angle(a.yaw - r.yaw))
}
