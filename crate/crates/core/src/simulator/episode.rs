use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::WorldState;
use crate::geometry::Pose2;
use crate::instance::WorkspaceInstance;
use crate::planner::{compile_move, replay, PlanError};
use crate::rng::{self, SkillRng};
use crate::skills::{
    check_departure_collision, departure_clearances, execute, planar_error, FailureMode,
    SkillCommand, SkillError, SkillKind, SkillModelConfig, SkillOutcome,
};
use crate::symbolic::{is_goal, BoxId, Move};

const PERCEPTION_STREAM: u64 = 13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error("plan does not fit the instance: {0}")]
    Plan(#[from] PlanError),
    #[error("skill execution error at invocation {k}: {source}")]
    Skill { k: usize, source: SkillError },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOptions {
    /// Replay a failed skill nominally and keep going instead of terminating.
    pub continue_on_failure: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invocation {
    /// 1-based position in the episode's skill sequence.
    pub k: usize,
    /// 1-based move number.
    pub move_index: usize,
    pub kind: SkillKind,
    pub success: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure_mode: Option<FailureMode>,
}

/// Error of one successful placement: against the Place target (the skill's own
/// error) and against the ideal tower pose for that stack level. Signed; cm and deg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementError {
    pub move_index: usize,
    #[serde(rename = "box")]
    pub box_id: BoxId,
    pub level: usize,
    pub target: [f64; 3],
    pub ideal: [f64; 3],
}

/// Final pose error of one box against the ideal final tower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxError {
    #[serde(rename = "box")]
    pub box_id: BoxId,
    pub xy_cm: f64,
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub group: Option<String>,
    pub total_skills: usize,
    pub invocations: Vec<Invocation>,
    pub completed_moves: usize,
    pub placements: Vec<PlacementError>,
    pub final_errors: Vec<BoxError>,
    pub success: bool,
}

impl EpisodeRecord {
    /// Invocations that succeeded before the first failure.
    pub fn leading_successes(&self) -> usize {
        self.invocations.iter().take_while(|i| i.success).count()
    }

    pub fn first_failure(&self) -> Option<&Invocation> {
        self.invocations.iter().find(|i| !i.success)
    }
}

fn to_cm_deg(e: &Pose2) -> [f64; 3] {
    [e.x * 100.0, e.y * 100.0, e.yaw.to_degrees()]
}

/// Run `plan` on `inst` with per-episode seed `seed`.
///
/// Each move's four commands are compiled from the perceived world at the start of
/// the move. The Place to GoTo transition additionally sweeps the departure path
/// against every stacked box.
pub fn run_episode(
    inst: &WorkspaceInstance,
    plan: &[Move],
    cfg: &SkillModelConfig,
    seed: u64,
    opts: EpisodeOptions,
) -> Result<EpisodeRecord, EpisodeError> {
    let start = inst.start_state();
    replay(&start, plan)?;

    let mut world = WorldState::from_instance(inst);
    let mut rng = SkillRng::from_seed(seed);
    let mut perception = rng::stream(seed, PERCEPTION_STREAM);
    let nominal = cfg.nominal();

    let total_skills = 4 * plan.len();
    let mut invocations = Vec::with_capacity(total_skills);
    let mut placements = Vec::new();
    let mut completed_moves = 0;
    let mut terminated = false;

    'moves: for (mi, m) in plan.iter().enumerate() {
        let (xy, yaw) = (
            cfg.noise.perception_xy_sigma,
            cfg.noise.perception_yaw_sigma,
        );
        if xy > 0.0 || yaw > 0.0 {
            world.perceive(xy, yaw, &mut perception);
        } else {
            for b in &mut world.boxes {
                b.perceived = b.actual;
            }
        }
        let cmds = compile_move(m, &world, &cfg.compile)?;
        let mut move_ok = true;
        for (si, cmd) in cmds.iter().enumerate() {
            let k = 4 * mi + si + 1;
            let departure = cfg.geometric_failures
                && cmd.kind == SkillKind::GoTo
                && mi > 0
                && cmd
                    .base_target()
                    .is_some_and(|to| check_departure_collision(&world, &world.robot, &to, cfg));
            let outcome = if departure {
                let mut w = world.clone();
                // The robot walks into the stack: the top box of the nearest stack
                // it clipped is the one that comes down.
                if let Some(b) = clipped_top(&w, cmd, cfg) {
                    w.knock_loose(b);
                }
                SkillOutcome {
                    success: false,
                    failure_mode: Some(FailureMode::DepartureStackCollision),
                    world: w,
                    residual: Pose2::identity(),
                }
            } else {
                execute(&world, cmd, cfg, &mut rng)
                    .map_err(|source| EpisodeError::Skill { k, source })?
            };
            invocations.push(Invocation {
                k,
                move_index: mi + 1,
                kind: cmd.kind,
                success: outcome.success,
                failure_mode: outcome.failure_mode,
            });
            let outcome = if outcome.success {
                outcome
            } else {
                move_ok = false;
                if !opts.continue_on_failure {
                    world = outcome.world;
                    terminated = true;
                    break 'moves;
                }
                execute(&world, cmd, &nominal, &mut rng)
                    .map_err(|source| EpisodeError::Skill { k, source })?
            };
            world = outcome.world;
            if cmd.kind == SkillKind::Place && invocations.last().is_some_and(|i| i.success) {
                let stack = &world.stacks[m.to];
                let level = stack.len() - 1;
                let actual = world.box_state(m.box_id).actual;
                let ideal = inst.ideal_stack_pose(m.to, stack, level);
                placements.push(PlacementError {
                    move_index: mi + 1,
                    box_id: m.box_id,
                    level,
                    target: to_cm_deg(&outcome.residual),
                    ideal: to_cm_deg(&planar_error(&actual, &ideal)),
                });
            }
        }
        if move_ok {
            completed_moves += 1;
        }
    }

    let all_ok = !terminated && invocations.iter().all(|i| i.success);
    let at_goal = world
        .symbolic()
        .map(|s| is_goal(&s, &inst.goal()))
        .unwrap_or(false);
    let success = all_ok && invocations.len() == total_skills && at_goal;
    let final_errors = if at_goal {
        final_errors(inst, &world)
    } else {
        Vec::new()
    };

    Ok(EpisodeRecord {
        seed,
        group: None,
        total_skills,
        invocations,
        completed_moves,
        placements,
        final_errors,
        success,
    })
}

fn clipped_top(world: &WorldState, cmd: &SkillCommand, cfg: &SkillModelConfig) -> Option<BoxId> {
    let to = cmd.base_target()?;
    let (hit, _) = departure_clearances(world, &world.robot, &to, cfg)
        .filter(|(_, slack)| *slack < 0.0)
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    world.top(world.tower_of(hit)?)
}

fn final_errors(inst: &WorkspaceInstance, world: &WorldState) -> Vec<BoxError> {
    let mut out = Vec::new();
    for (tower, stack) in world.stacks.iter().enumerate() {
        for (level, id) in stack.iter().enumerate() {
            let ideal = inst.ideal_stack_pose(tower, stack, level);
            let e = planar_error(&world.box_state(*id).actual, &ideal);
            out.push(BoxError {
                box_id: *id,
                xy_cm: e.x.hypot(e.y) * 100.0,
                yaw_deg: e.yaw.to_degrees().abs(),
            });
        }
    }
    out.sort_by_key(|e| e.box_id);
    out
}
