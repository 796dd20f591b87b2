use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{BoxDims, Pose2, Pose3, Quat};
use crate::instance::WorkspaceInstance;
use crate::symbolic::{BoxId, SymbolicError, SymbolicState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxState {
    pub id: BoxId,
    pub dims: BoxDims,
    pub actual: Pose3,
    pub perceived: Pose3,
}

/// A held box together with its in-gripper pose error (robot frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub box_id: BoxId,
    pub offset: Pose2,
}

/// Geometric world used by the skill models.
///
/// `stacks` lists box ids bottom to top per tower; together with `in_hand` and
/// `loose` (boxes knocked off or dropped) it accounts for every box exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: Pose2,
    pub towers: Vec<Pose2>,
    pub boxes: Vec<BoxState>,
    pub stacks: Vec<Vec<BoxId>>,
    pub in_hand: Option<Grasp>,
    pub loose: Vec<BoxId>,
}

impl WorldState {
    /// Boxes stacked on the instance's first tower at their nominal poses.
    pub fn from_instance(inst: &WorkspaceInstance) -> Self {
        let start = inst.start_state();
        let mut boxes: Vec<BoxState> = inst
            .boxes
            .iter()
            .map(|b| BoxState {
                id: b.id,
                dims: b.dims,
                actual: Pose3::default(),
                perceived: Pose3::default(),
            })
            .collect();
        for (tower, ids) in start.towers.iter().enumerate() {
            for (level, id) in ids.iter().enumerate() {
                let p = inst.ideal_stack_pose(tower, ids, level);
                let b = &mut boxes[id.0 as usize];
                b.actual = p;
                b.perceived = p;
            }
        }
        Self {
            robot: inst.robot_start,
            towers: inst.towers.clone(),
            boxes,
            stacks: start.towers,
            in_hand: None,
            loose: Vec::new(),
        }
    }

    pub fn box_state(&self, id: BoxId) -> &BoxState {
        &self.boxes[id.0 as usize]
    }

    pub fn box_state_mut(&mut self, id: BoxId) -> &mut BoxState {
        &mut self.boxes[id.0 as usize]
    }

    pub fn top(&self, tower: usize) -> Option<BoxId> {
        self.stacks.get(tower).and_then(|s| s.last().copied())
    }

    pub fn tower_of(&self, id: BoxId) -> Option<usize> {
        self.stacks.iter().position(|s| s.contains(&id))
    }

    /// Symbolic projection; fails once a box has been knocked loose.
    pub fn symbolic(&self) -> Result<SymbolicState, SymbolicError> {
        if let Some(b) = self.loose.first() {
            return Err(SymbolicError::InvalidState(format!("box {b} is loose")));
        }
        let s = SymbolicState {
            towers: self.stacks.clone(),
            in_hand: self.in_hand.map(|g| g.box_id),
        };
        s.validate()?;
        Ok(s)
    }

    /// Sorted ids of every box the world accounts for.
    pub fn box_ids(&self) -> Vec<BoxId> {
        let mut ids: Vec<BoxId> = self
            .stacks
            .iter()
            .flatten()
            .copied()
            .chain(self.in_hand.map(|g| g.box_id))
            .chain(self.loose.iter().copied())
            .collect();
        ids.sort();
        ids
    }

    /// Support surface of `tower`: planar center and top height, from perceived or
    /// actual poses.
    pub fn support(&self, tower: usize, perceived: bool) -> ([f64; 2], f64) {
        match self.top(tower) {
            None => {
                let t = self.towers[tower];
                ([t.x, t.y], 0.0)
            }
            Some(id) => {
                let b = self.box_state(id);
                let p = if perceived { b.perceived } else { b.actual };
                (
                    [p.position[0], p.position[1]],
                    p.position[2] + b.dims.lz() / 2.0,
                )
            }
        }
    }

    /// Redraw every perceived pose as actual pose plus planar Gaussian noise.
    pub fn perceive(&mut self, xy_sigma: f64, yaw_sigma: f64, rng: &mut impl Rng) {
        let xy = Normal::new(0.0, xy_sigma.max(0.0)).expect("finite sigma");
        let yaw = Normal::new(0.0, yaw_sigma.max(0.0)).expect("finite sigma");
        for b in &mut self.boxes {
            let (dx, dy, dyaw) = (xy.sample(rng), xy.sample(rng), yaw.sample(rng));
            let a = b.actual;
            b.perceived = Pose3::new(
                [a.position[0] + dx, a.position[1] + dy, a.position[2]],
                Quat::from_yaw(dyaw).mul(&a.orientation).normalized(),
            );
        }
    }

    /// Drop the held box (or a stacked one) where it is and mark it loose.
    pub fn knock_loose(&mut self, id: BoxId) {
        if self.in_hand.map(|g| g.box_id) == Some(id) {
            self.in_hand = None;
        }
        for s in &mut self.stacks {
            s.retain(|b| *b != id);
        }
        if !self.loose.contains(&id) {
            self.loose.push(id);
        }
    }
}
