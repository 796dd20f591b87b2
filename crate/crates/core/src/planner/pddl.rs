//! Write-only PDDL export for the three-tower stacking domain.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::symbolic::{Goal, SymbolicState};

/// STRIPS domain: boxes and tower bases are both `place`s a box can rest on.
pub fn domain_pddl() -> String {
    "(define (domain humanoid-hanoi)
  (:requirements :strips :typing)
  (:types place box - place)
  (:predicates
    (on ?b - box ?p - place)
    (clear ?p - place)
    (smaller ?b - box ?p - place))
  (:action move
    :parameters (?b - box ?from - place ?to - place)
    :precondition (and (on ?b ?from) (clear ?b) (clear ?to) (smaller ?b ?to))
    :effect (and (on ?b ?to) (clear ?from)
                 (not (on ?b ?from)) (not (clear ?to)))))
"
    .to_string()
}

fn stack_facts(towers: &[Vec<crate::symbolic::BoxId>], out: &mut String) {
    for (t, stack) in towers.iter().enumerate() {
        let mut below = format!("t{t}");
        for b in stack {
            let _ = writeln!(out, "    (on {b} {below})");
            below = b.to_string();
        }
        let _ = writeln!(out, "    (clear {below})");
    }
}

pub fn problem_pddl(name: &str, start: &SymbolicState, goal: &Goal) -> String {
    let boxes = start.boxes();
    let n_towers = start.towers.len();
    let mut s = String::new();
    let _ = writeln!(s, "(define (problem {name})");
    let _ = writeln!(s, "  (:domain humanoid-hanoi)");
    s.push_str("  (:objects");
    for t in 0..n_towers {
        let _ = write!(s, " t{t}");
    }
    s.push_str(" - place");
    for b in &boxes {
        let _ = write!(s, " {b}");
    }
    s.push_str(" - box)\n  (:init\n");
    for b in &boxes {
        for t in 0..n_towers {
            let _ = writeln!(s, "    (smaller {b} t{t})");
        }
        for o in boxes.iter().filter(|o| *o > b) {
            let _ = writeln!(s, "    (smaller {b} {o})");
        }
    }
    stack_facts(&start.towers, &mut s);
    s.push_str("  )\n  (:goal (and\n");
    let mut g = String::new();
    stack_facts(&goal.towers, &mut g);
    for line in g.lines().filter(|l| l.contains("(on ")) {
        let _ = writeln!(s, "  {line}");
    }
    s.push_str("  )))\n");
    s
}

/// Write the problem to `path` and the domain next to it as `<stem>.domain.pddl`.
/// Returns the domain path.
pub fn write_pddl(
    path: &Path,
    name: &str,
    start: &SymbolicState,
    goal: &Goal,
) -> io::Result<PathBuf> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problem".into());
    let domain = path.with_file_name(format!("{stem}.domain.pddl"));
    std::fs::write(path, problem_pddl(name, start, goal))?;
    std::fs::write(&domain, domain_pddl())?;
    Ok(domain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_lists_start_and_goal() {
        let start = SymbolicState::stacked(3, 3, 0);
        let goal = Goal::stacked(3, 3, 2);
        let p = problem_pddl("h3", &start, &goal);
        assert!(p.contains("(on b2 t0)"));
        assert!(p.contains("(on b0 b1)"));
        assert!(p.contains("(clear t1)"));
        assert!(p.contains("(smaller b0 b2)"));
        assert!(!p.contains("(smaller b2 b0)"));
        let goal_part = p.split(":goal").nth(1).unwrap();
        assert!(goal_part.contains("(on b2 t2)"));
        assert_eq!(p.matches('(').count(), p.matches(')').count());
        let d = domain_pddl();
        assert_eq!(d.matches('(').count(), d.matches(')').count());
    }
}
