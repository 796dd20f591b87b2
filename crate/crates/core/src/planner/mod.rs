//! Symbolic move planning and compilation of moves into skill commands.

mod pddl;

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pddl::{domain_pddl, problem_pddl, write_pddl};

use crate::geometry::{Pose2, Pose3};
use crate::instance::WorkspaceInstance;
use crate::simulator::WorldState;
use crate::skills::{stance_for, SkillCommand, SkillKind};
use crate::symbolic::{apply_move, is_goal, legal_moves, Goal, Move, SymbolicError, SymbolicState};

/// Largest disk count `plan_hanoi` accepts (2^24 - 1 moves).
pub const MAX_HANOI_BOXES: u32 = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("tower indices must be distinct, got ({src}, {aux}, {dst})")]
    DuplicateTowers { src: usize, aux: usize, dst: usize },
    #[error("{0} boxes exceeds the supported maximum of {MAX_HANOI_BOXES}")]
    TooManyBoxes(u32),
    #[error("goal is unreachable: {0}")]
    Unreachable(String),
    #[error("stack on tower {tower} is {height:.3} m high, above the reachable {max:.3} m")]
    PlacementTooHigh { tower: usize, height: f64, max: f64 },
    #[error("move {step} ({mv}) is illegal: {source}")]
    IllegalMove {
        step: usize,
        mv: Move,
        source: SymbolicError,
    },
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

/// Geometry used when turning a move into skill targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileConfig {
    /// Base-to-box-face distance at a stance (m).
    pub standoff: f64,
    /// Highest support surface a placement may target (m).
    pub max_place_height: f64,
}

impl Default for CompileConfig {
    fn default() -> Self {
        Self {
            standoff: 0.45,
            max_place_height: 0.95,
        }
    }
}

/// Standard recursive solution moving boxes `0..n` from `src` to `dst`.
pub fn plan_hanoi(n: u32, src: usize, aux: usize, dst: usize) -> Result<Vec<Move>, PlanError> {
    if src == aux || aux == dst || src == dst {
        return Err(PlanError::DuplicateTowers { src, aux, dst });
    }
    if n > MAX_HANOI_BOXES {
        return Err(PlanError::TooManyBoxes(n));
    }
    fn rec(k: u32, src: usize, aux: usize, dst: usize, out: &mut Vec<Move>) {
        if k == 0 {
            return;
        }
        rec(k - 1, src, dst, aux, out);
        out.push(Move::new(crate::symbolic::BoxId(k - 1), src, dst));
        rec(k - 1, aux, src, dst, out);
    }
    let mut out = Vec::with_capacity((1usize << n) - 1);
    rec(n, src, aux, dst, &mut out);
    Ok(out)
}

/// Shortest move sequence from `start` to `goal` by breadth-first search.
///
/// Successors are expanded in `legal_moves` order, so ties resolve to the
/// lexicographically smallest (box, destination) sequence.
pub fn plan_rearrangement(start: &SymbolicState, goal: &Goal) -> Result<Vec<Move>, PlanError> {
    start.validate()?;
    if start.in_hand.is_some() {
        return Err(PlanError::Unreachable("start state holds a box".into()));
    }
    let target = goal.as_state();
    target.validate()?;
    if start.towers.len() != goal.towers.len() {
        return Err(PlanError::Unreachable(format!(
            "start has {} towers, goal has {}",
            start.towers.len(),
            goal.towers.len()
        )));
    }
    if start.boxes() != target.boxes() {
        return Err(PlanError::Unreachable(
            "start and goal hold different boxes".into(),
        ));
    }
    if is_goal(start, goal) {
        return Ok(Vec::new());
    }

    let mut parent: HashMap<SymbolicState, (SymbolicState, Move)> = HashMap::new();
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(s) = queue.pop_front() {
        for m in legal_moves(&s)? {
            let next = apply_move(&s, &m)?;
            if &next == start || parent.contains_key(&next) {
                continue;
            }
            parent.insert(next.clone(), (s.clone(), m));
            if is_goal(&next, goal) {
                let mut moves = vec![m];
                let mut cur = s.clone();
                while &cur != start {
                    let (p, pm) = &parent[&cur];
                    moves.push(*pm);
                    cur = p.clone();
                }
                moves.reverse();
                return Ok(moves);
            }
            queue.push_back(next);
        }
    }
    Err(PlanError::Unreachable("search space exhausted".into()))
}

/// Replay `moves` from `start`, reporting the first illegal one.
pub fn replay(start: &SymbolicState, moves: &[Move]) -> Result<SymbolicState, PlanError> {
    let mut s = start.clone();
    for (step, m) in moves.iter().enumerate() {
        s = apply_move(&s, m).map_err(|source| PlanError::IllegalMove {
            step,
            mv: *m,
            source,
        })?;
    }
    Ok(s)
}

/// The four skill commands for `m`, with targets taken from perceived poses.
pub fn compile_move(
    m: &Move,
    world: &WorldState,
    cfg: &CompileConfig,
) -> Result<[SkillCommand; 4], PlanError> {
    let sym = world.symbolic()?;
    apply_move(&sym, m).map_err(|source| PlanError::IllegalMove {
        step: 0,
        mv: *m,
        source,
    })?;

    let b = world.box_state(m.box_id);
    let reach = cfg.standoff + b.dims.lx() / 2.0;
    let src_tower = world.towers[m.from];
    let dst_tower = world.towers[m.to];

    let box_pose = b.perceived;
    let pick_xy = [box_pose.position[0], box_pose.position[1]];
    let goto = stance_for(pick_xy, &src_tower, reach);

    let (support_xy, support_top) = world.support(m.to, true);
    if support_top > cfg.max_place_height {
        return Err(PlanError::PlacementTooHigh {
            tower: m.to,
            height: support_top,
            max: cfg.max_place_height,
        });
    }
    let carry = stance_for(support_xy, &dst_tower, reach);
    let target = Pose3::upright(
        support_xy[0],
        support_xy[1],
        support_top + b.dims.lz() / 2.0,
        dst_tower.yaw,
    );

    Ok([
        SkillCommand::goto(goto, m.from),
        SkillCommand::pickup(box_pose, m.box_id, m.from),
        SkillCommand::goto_with_box(carry, m.box_id, m.to),
        SkillCommand::place(target, m.box_id, m.to),
    ])
}

/// Compiled skill sequence with move boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillPlan {
    pub commands: Vec<SkillCommand>,
    /// Index of the first command of each move.
    pub move_boundaries: Vec<usize>,
}

impl SkillPlan {
    pub fn n_moves(&self) -> usize {
        self.move_boundaries.len()
    }

    /// Every move group is GoTo, Pickup, GoToWithBox, Place.
    pub fn is_well_formed(&self) -> bool {
        self.commands.len() == 4 * self.move_boundaries.len()
            && self
                .move_boundaries
                .iter()
                .enumerate()
                .all(|(i, &s)| s == 4 * i)
            && self
                .commands
                .chunks(4)
                .all(|c| c.iter().map(|c| c.kind).eq(SkillKind::ALL))
    }
}

/// Compile a whole plan against the nominal rollout: every skill lands exactly on
/// its target and perception is exact.
pub fn compile_plan(
    inst: &WorkspaceInstance,
    moves: &[Move],
    cfg: &CompileConfig,
) -> Result<SkillPlan, PlanError> {
    replay(&inst.start_state(), moves)?;
    let mut world = WorldState::from_instance(inst);
    let mut commands = Vec::with_capacity(4 * moves.len());
    let mut move_boundaries = Vec::with_capacity(moves.len());
    for m in moves {
        let cmds = compile_move(m, &world, cfg)?;
        move_boundaries.push(commands.len());
        nominal_apply(&mut world, m, &cmds);
        commands.extend(cmds);
    }
    Ok(SkillPlan {
        commands,
        move_boundaries,
    })
}

fn nominal_apply(world: &mut WorldState, m: &Move, cmds: &[SkillCommand; 4]) {
    world.stacks[m.from].pop();
    world.stacks[m.to].push(m.box_id);
    if let Some(p) = cmds[3].box_target() {
        let b = world.box_state_mut(m.box_id);
        b.actual = p;
        b.perceived = p;
    }
    world.robot = cmds[2].base_target().unwrap_or(Pose2::identity());
}

#[cfg(test)]
mod tests;
