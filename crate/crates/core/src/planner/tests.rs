use proptest::prelude::*;

use super::*;
use crate::geometry::Pose3;
use crate::instance::{sample_instance, InstanceConfig};
use crate::symbolic::BoxId;

#[test]
fn hanoi_move_counts() {
    assert!(plan_hanoi(0, 0, 1, 2).unwrap().is_empty());
    for n in 1..=8u32 {
        let moves = plan_hanoi(n, 0, 1, 2).unwrap();
        assert_eq!(moves.len(), (1usize << n) - 1);
        let end = replay(&SymbolicState::stacked(3, n, 0), &moves).unwrap();
        assert!(is_goal(&end, &Goal::stacked(3, n, 2)));
    }
    assert_eq!(
        plan_hanoi(1, 0, 1, 2).unwrap(),
        vec![Move::new(BoxId(0), 0, 2)]
    );
}

#[test]
fn hanoi_rejects_duplicate_towers_and_huge_n() {
    assert!(matches!(
        plan_hanoi(3, 0, 0, 2),
        Err(PlanError::DuplicateTowers { .. })
    ));
    assert!(matches!(
        plan_hanoi(3, 1, 2, 1),
        Err(PlanError::DuplicateTowers { .. })
    ));
    assert_eq!(plan_hanoi(25, 0, 1, 2), Err(PlanError::TooManyBoxes(25)));
}

#[test]
fn bfs_at_goal_is_empty() {
    let s = SymbolicState::stacked(3, 3, 2);
    assert!(plan_rearrangement(&s, &Goal::stacked(3, 3, 2))
        .unwrap()
        .is_empty());
}

#[test]
fn bfs_matches_hanoi_recursion() {
    for n in 1..=5u32 {
        let bfs =
            plan_rearrangement(&SymbolicState::stacked(3, n, 0), &Goal::stacked(3, n, 2)).unwrap();
        assert_eq!(bfs.len(), (1usize << n) - 1);
    }
    let bfs =
        plan_rearrangement(&SymbolicState::stacked(3, 3, 0), &Goal::stacked(3, 3, 2)).unwrap();
    assert_eq!(bfs, plan_hanoi(3, 0, 1, 2).unwrap());
}

#[test]
fn bfs_rejects_unknown_box() {
    let start = SymbolicState::stacked(3, 3, 0);
    let goal = Goal {
        towers: vec![vec![], vec![], vec![BoxId(3), BoxId(1), BoxId(0)]],
    };
    assert!(matches!(
        plan_rearrangement(&start, &goal),
        Err(PlanError::Unreachable(_))
    ));
}

#[test]
fn replay_reports_first_illegal_move() {
    let start = SymbolicState::stacked(3, 3, 0);
    let moves = [Move::new(BoxId(0), 0, 1), Move::new(BoxId(1), 0, 1)];
    match replay(&start, &moves) {
        Err(PlanError::IllegalMove { step, .. }) => assert_eq!(step, 1),
        other => panic!("{other:?}"),
    }
}

fn world(seed: u64) -> (crate::instance::WorkspaceInstance, WorldState) {
    let inst = sample_instance(seed, &InstanceConfig::default()).unwrap();
    let w = WorldState::from_instance(&inst);
    (inst, w)
}

#[test]
fn three_box_plan_compiles_to_28_skills() {
    let (inst, _) = world(3);
    let plan = compile_plan(
        &inst,
        &plan_hanoi(3, 0, 1, 2).unwrap(),
        &CompileConfig::default(),
    )
    .unwrap();
    assert_eq!(plan.commands.len(), 28);
    assert_eq!(plan.n_moves(), 7);
    assert!(plan.is_well_formed());
}

#[test]
fn floor_placement_height() {
    let (_, w) = world(4);
    let m = Move::new(BoxId(0), 0, 2);
    let cmds = compile_move(&m, &w, &CompileConfig::default()).unwrap();
    let t = cmds[3].box_target().unwrap();
    let lz = w.box_state(BoxId(0)).dims.lz();
    assert!((t.position[2] - lz / 2.0).abs() < 1e-12);
    assert!((t.position[0] - w.towers[2].x).abs() < 1e-12);
    assert!((t.position[1] - w.towers[2].y).abs() < 1e-12);
    assert!((t.yaw() - w.towers[2].yaw).abs() < 1e-12);
}

#[test]
fn placement_chains_off_perceived_top() {
    let (_, mut w) = world(5);
    // Move box 1 to tower 1 by hand, displaced from the tower center.
    w.stacks[0] = vec![BoxId(2), BoxId(0)];
    w.stacks[1] = vec![BoxId(1)];
    let t1 = w.towers[1];
    let lz1 = w.box_state(BoxId(1)).dims.lz();
    let displaced = Pose3::upright(t1.x + 0.03, t1.y - 0.02, lz1 / 2.0, t1.yaw + 0.05);
    let b1 = w.box_state_mut(BoxId(1));
    b1.actual = displaced;
    b1.perceived = displaced;

    let m = Move::new(BoxId(0), 0, 1);
    let cmds = compile_move(&m, &w, &CompileConfig::default()).unwrap();
    let t = cmds[3].box_target().unwrap();
    let lz0 = w.box_state(BoxId(0)).dims.lz();
    assert!((t.position[2] - (lz1 + lz0 / 2.0)).abs() < 1e-12);
    assert!((t.position[0] - displaced.position[0]).abs() < 1e-12);
    assert!((t.position[1] - displaced.position[1]).abs() < 1e-12);

    // GoTo-with-box stance faces the destination, standoff ahead of the box face.
    let stance = cmds[2].base_target().unwrap();
    let reach = 0.45 + w.box_state(BoxId(0)).dims.lx() / 2.0;
    let d = (stance.x - t.position[0]).hypot(stance.y - t.position[1]);
    assert!((d - reach).abs() < 1e-12);
    assert_eq!(stance.yaw, t1.yaw);
}

#[test]
fn compile_uses_perceived_source_pose() {
    let (_, mut w) = world(6);
    let b0 = w.box_state_mut(BoxId(0));
    b0.perceived.position[0] += 0.04;
    let perceived = b0.perceived;
    let cmds = compile_move(&Move::new(BoxId(0), 0, 2), &w, &CompileConfig::default()).unwrap();
    assert_eq!(cmds[1].box_target(), Some(perceived));
    assert_eq!(
        cmds.iter().map(|c| c.kind).collect::<Vec<_>>(),
        SkillKind::ALL.to_vec()
    );
}

#[test]
fn too_high_destination_is_rejected() {
    let (_, w) = world(7);
    let cfg = CompileConfig {
        max_place_height: 0.1,
        ..CompileConfig::default()
    };
    // Tower 0 holds all three boxes; move 0 there after lifting it elsewhere.
    let mut w2 = w.clone();
    w2.stacks[0] = vec![BoxId(2), BoxId(1)];
    w2.stacks[1] = vec![BoxId(0)];
    assert!(matches!(
        compile_move(&Move::new(BoxId(0), 1, 0), &w2, &cfg),
        Err(PlanError::PlacementTooHigh { tower: 0, .. })
    ));
}

#[test]
fn illegal_move_is_rejected_at_compile_time() {
    let (_, w) = world(8);
    assert!(matches!(
        compile_move(&Move::new(BoxId(1), 0, 2), &w, &CompileConfig::default()),
        Err(PlanError::IllegalMove { .. })
    ));
}

/// Independent optimal-length oracle: iterative-deepening DFS.
fn iddfs_len(start: &SymbolicState, goal: &Goal, cap: usize) -> Option<usize> {
    fn dfs(s: &SymbolicState, goal: &Goal, depth: usize) -> bool {
        if is_goal(s, goal) {
            return true;
        }
        if depth == 0 {
            return false;
        }
        legal_moves(s)
            .unwrap()
            .iter()
            .any(|m| dfs(&apply_move(s, m).unwrap(), goal, depth - 1))
    }
    (0..=cap).find(|d| dfs(start, goal, *d))
}

fn random_state(walk: &[usize]) -> SymbolicState {
    let mut s = SymbolicState::stacked(3, 3, 0);
    for w in walk {
        let moves = legal_moves(&s).unwrap();
        s = apply_move(&s, &moves[w % moves.len()]).unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bfs_is_shortest_and_replays(walk_a in prop::collection::vec(0usize..6, 0..12),
                                   walk_b in prop::collection::vec(0usize..6, 0..12)) {
        let start = random_state(&walk_a);
        let goal = Goal { towers: random_state(&walk_b).towers };
        let plan = plan_rearrangement(&start, &goal).unwrap();
        let end = replay(&start, &plan).unwrap();
        prop_assert!(is_goal(&end, &goal));
        prop_assert_eq!(Some(plan.len()), iddfs_len(&start, &goal, 8));
    }

    #[test]
    fn compiled_plans_are_well_formed(seed in 0u64..10_000) {
        let inst = sample_instance(seed, &InstanceConfig::default()).unwrap();
        let plan = compile_plan(&inst, &plan_hanoi(3, 0, 1, 2).unwrap(), &CompileConfig::default()).unwrap();
        prop_assert!(plan.is_well_formed());
        prop_assert_eq!(plan.commands.len(), 28);
    }
}
