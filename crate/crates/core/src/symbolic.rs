//! Tower-of-Hanoi symbolic state.
//!
//! Stacks are stored bottom to top. A smaller box id is higher-ordered and must sit
//! above every larger id on the same stack.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Box ordinal assigned by the instance generator; 0 is the smallest box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoxId(pub u32);

impl fmt::Display for BoxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

/// Which stacking rule a rejected operation broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Only the top box of a stack may be lifted.
    NotTopBox,
    /// A lower-ordered (larger id) box may not rest on a higher-ordered one.
    LargerOnSmaller,
    /// Source and destination tower coincide.
    SameTower,
    /// Only one box may be held at a time.
    HandOccupied,
    /// Nothing in hand to place.
    HandEmpty,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::NotTopBox => "only the top box of a stack may be moved",
            Rule::LargerOnSmaller => "higher-ordered boxes may not be placed on lower-ordered ones",
            Rule::SameTower => "source and destination tower must differ",
            Rule::HandOccupied => "only one box may be moved at a time",
            Rule::HandEmpty => "no box in hand",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("constraint violation: {rule}")]
    ConstraintViolation { rule: Rule },
    #[error("tower index {0} out of range")]
    UnknownTower(usize),
    #[error("box {0} is not in the state")]
    UnknownBox(BoxId),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

fn violation(rule: Rule) -> SymbolicError {
    SymbolicError::ConstraintViolation { rule }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Move {
    #[serde(rename = "box")]
    pub box_id: BoxId,
    pub from: usize,
    pub to: usize,
}

impl Move {
    pub fn new(box_id: BoxId, from: usize, to: usize) -> Self {
        Self { box_id, from, to }
    }

    pub fn reversed(&self) -> Move {
        Move::new(self.box_id, self.to, self.from)
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: T{} -> T{}", self.box_id, self.from + 1, self.to + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolicState {
    pub towers: Vec<Vec<BoxId>>,
    pub in_hand: Option<BoxId>,
}

impl SymbolicState {
    /// `n` boxes stacked on `tower` (largest at the bottom), other towers empty.
    pub fn stacked(n_towers: usize, n_boxes: u32, tower: usize) -> Self {
        let mut towers = vec![Vec::new(); n_towers];
        towers[tower] = (0..n_boxes).rev().map(BoxId).collect();
        Self {
            towers,
            in_hand: None,
        }
    }

    pub fn boxes(&self) -> Vec<BoxId> {
        let mut ids: Vec<BoxId> = self
            .towers
            .iter()
            .flatten()
            .copied()
            .chain(self.in_hand)
            .collect();
        ids.sort();
        ids
    }

    pub fn top(&self, tower: usize) -> Option<BoxId> {
        self.towers.get(tower).and_then(|t| t.last().copied())
    }

    pub fn tower_of(&self, b: BoxId) -> Option<usize> {
        self.towers.iter().position(|t| t.contains(&b))
    }

    /// Check every state invariant.
    pub fn validate(&self) -> Result<(), SymbolicError> {
        let ids = self.boxes();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SymbolicError::InvalidState("duplicate box id".into()));
        }
        for (i, t) in self.towers.iter().enumerate() {
            if t.windows(2).any(|w| w[0] <= w[1]) {
                return Err(SymbolicError::InvalidState(format!(
                    "tower {i} is not ordered (ids must strictly decrease toward the top)"
                )));
            }
        }
        Ok(())
    }

    fn check_tower(&self, t: usize) -> Result<(), SymbolicError> {
        if t < self.towers.len() {
            Ok(())
        } else {
            Err(SymbolicError::UnknownTower(t))
        }
    }

    fn can_rest_on(&self, b: BoxId, tower: usize) -> bool {
        self.top(tower).is_none_or(|top| b < top)
    }

    /// Lift the top box of `tower` into the hand.
    pub fn pick(&self, b: BoxId, tower: usize) -> Result<SymbolicState, SymbolicError> {
        self.check_tower(tower)?;
        if self.in_hand.is_some() {
            return Err(violation(Rule::HandOccupied));
        }
        if self.tower_of(b).is_none() {
            return Err(SymbolicError::UnknownBox(b));
        }
        if self.top(tower) != Some(b) {
            return Err(violation(Rule::NotTopBox));
        }
        let mut next = self.clone();
        next.towers[tower].pop();
        next.in_hand = Some(b);
        Ok(next)
    }

    /// Put the held box on `tower`.
    pub fn put(&self, tower: usize) -> Result<SymbolicState, SymbolicError> {
        self.check_tower(tower)?;
        let b = self.in_hand.ok_or(violation(Rule::HandEmpty))?;
        if !self.can_rest_on(b, tower) {
            return Err(violation(Rule::LargerOnSmaller));
        }
        let mut next = self.clone();
        next.towers[tower].push(b);
        next.in_hand = None;
        Ok(next)
    }
}

/// Required final configuration: exact stack contents per tower.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub towers: Vec<Vec<BoxId>>,
}

impl Goal {
    /// All `n` boxes stacked on `tower`.
    pub fn stacked(n_towers: usize, n_boxes: u32, tower: usize) -> Self {
        Goal {
            towers: SymbolicState::stacked(n_towers, n_boxes, tower).towers,
        }
    }

    pub fn as_state(&self) -> SymbolicState {
        SymbolicState {
            towers: self.towers.clone(),
            in_hand: None,
        }
    }
}

/// All moves that keep the state valid, ordered by (box, destination).
pub fn legal_moves(s: &SymbolicState) -> Result<Vec<Move>, SymbolicError> {
    s.validate()?;
    if s.in_hand.is_some() {
        return Err(SymbolicError::InvalidState(
            "legal moves are defined only with an empty hand".into(),
        ));
    }
    let mut moves = Vec::new();
    for (from, stack) in s.towers.iter().enumerate() {
        let Some(&b) = stack.last() else { continue };
        for to in 0..s.towers.len() {
            if to != from && s.can_rest_on(b, to) {
                moves.push(Move::new(b, from, to));
            }
        }
    }
    moves.sort_by_key(|m| (m.box_id, m.to));
    Ok(moves)
}

pub fn apply_move(s: &SymbolicState, m: &Move) -> Result<SymbolicState, SymbolicError> {
    s.check_tower(m.from)?;
    s.check_tower(m.to)?;
    if m.from == m.to {
        return Err(violation(Rule::SameTower));
    }
    s.pick(m.box_id, m.from)?.put(m.to)
}

pub fn is_goal(s: &SymbolicState, g: &Goal) -> bool {
    s.in_hand.is_none() && s.towers == g.towers
}
