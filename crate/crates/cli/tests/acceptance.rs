//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any fails. Run with `cargo test --release --test acceptance` for timings that
//! reflect an optimized build.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hanoi_core::coverage::{
    aggregate, pickup_phase_schedule, read_trajectory, reverse_pickup_to_place, sample_directive,
    CommandDistConfig, Component, ComponentKind, Frame, Phase, ReferenceSet, ReferenceTrajectory,
    Source,
};
use hanoi_core::instance::TOWER_COUNT;
use hanoi_core::planner::{compile_plan, replay};
use hanoi_core::rewards::StateRecord;
use hanoi_core::rewards::{
    constellation_cost, kernel, PerSkill, RewardRegistry, RewardSkill, Scope,
};
use hanoi_core::rng::stream;
use hanoi_core::simulator::{run_records, BenchmarkOptions, Invocation};
use hanoi_core::skills::SuccessTable;
use hanoi_core::{
    is_goal, plan_hanoi, report_metrics, sample_instance, survival_curve, CompileConfig,
    EpisodeRecord, FailureMode, InstanceConfig, Method, SkillKind, SkillModelConfig,
};
use rand::Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn c1_planner() -> Outcome {
    let start = Instant::now();
    for n in 1..=8u32 {
        let moves = plan_hanoi(n, 0, 1, 2).map_err(|e| e.to_string())?;
        ensure!(moves.len() == (1 << n) - 1, "n={n}: {} moves", moves.len());
        let s0 = hanoi_core::SymbolicState::stacked(3, n, 0);
        let end = replay(&s0, &moves).map_err(|e| format!("n={n}: {e}"))?;
        ensure!(
            is_goal(&end, &hanoi_core::Goal::stacked(3, n, 2)),
            "n={n}: goal not reached"
        );
    }
    let inst = sample_instance(0, &InstanceConfig::default()).map_err(|e| e.to_string())?;
    let moves = plan_hanoi(3, 0, 1, 2).unwrap();
    let plan = compile_plan(&inst, &moves, &CompileConfig::default()).map_err(|e| e.to_string())?;
    ensure!(moves.len() == 7, "{} moves", moves.len());
    ensure!(plan.commands.len() == 28, "{} skills", plan.commands.len());
    ensure!(plan.is_well_formed(), "compiled plan is not well formed");
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(1), "took {t:?}");
    Ok(format!("7 moves, 28 skills, 2^n-1 for n<=8, {t:.2?}"))
}

fn c2_instances() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for dr in [false, true] {
        let cfg = InstanceConfig::default().with_dr(dr);
        for seed in 0..5_000u64 {
            let inst = sample_instance(seed, &cfg).map_err(|e| e.to_string())?;
            ensure!(
                (1.5..=2.5).contains(&inst.radius),
                "seed {seed}: radius {}",
                inst.radius
            );
            ensure!(inst.towers.len() == TOWER_COUNT, "seed {seed}: tower count");
            for i in 0..TOWER_COUNT {
                for j in i + 1..TOWER_COUNT {
                    let d = inst.towers[i].distance(&inst.towers[j]);
                    ensure!(d >= 0.9, "seed {seed}: towers {i},{j} {d:.3} m apart");
                }
            }
            for b in &inst.boxes {
                let r = b.category.size_range();
                for d in [b.dims.lx(), b.dims.ly(), b.dims.lz()] {
                    ensure!(r.contains(d), "seed {seed}: box {} dim {d}", b.id);
                }
                ensure!(
                    (0.5..=0.7).contains(&b.sliding_friction),
                    "seed {seed}: friction"
                );
                ensure!(
                    (0.5..=3.0).contains(&b.mass),
                    "seed {seed}: mass {}",
                    b.mass
                );
            }
            checked += 1;
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(5), "took {t:?}");
    Ok(format!("{checked} instances, 0 violations, {t:.2?}"))
}

fn c3_c5_calibration() -> (Outcome, Outcome) {
    let start = Instant::now();
    let opts = BenchmarkOptions::default();
    let run = |dr| {
        let cfg = SkillModelConfig::preset(Method::Extended, dr);
        let records = run_records(10_000, &cfg, 7, &opts).map_err(|e| e.to_string())?;
        let m = report_metrics(&records).map_err(|e| e.to_string())?;
        let s = survival_curve(&records).map_err(|e| e.to_string())?;
        Ok::<_, String>((m, s))
    };
    let (nodr, dr) = match (run(false), run(true)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return (Err(e.clone()), Err(e)),
    };
    let t = start.elapsed();

    let c3 = (|| {
        let (a, b) = (nodr.0.success_rate, dr.0.success_rate);
        ensure!((a - 0.70).abs() <= 0.03, "no-DR success {a:.4}");
        ensure!((b - 0.49).abs() <= 0.03, "DR success {b:.4}");
        ensure!(
            nodr.1.is_non_increasing() && dr.1.is_non_increasing(),
            "survival increases"
        );
        ensure!(t < Duration::from_secs(60), "took {t:?}");
        Ok(format!("success {a:.4} (no DR), {b:.4} (DR), {t:.2?}"))
    })();

    let c5 = (|| {
        let p = &nodr.0.placement;
        let (x, yaw) = (p.x_cm.mean, p.yaw_deg.mean);
        ensure!(p.n >= 10_000, "only {} placements", p.n);
        ensure!((x - 5.47).abs() <= 0.3, "mean |x| {x:.3} cm");
        ensure!((yaw - 2.48).abs() <= 0.5, "mean |yaw| {yaw:.3} deg");
        Ok(format!(
            "{} placements, |x| {x:.3} cm, |yaw| {yaw:.3} deg",
            p.n
        ))
    })();
    (c3, c5)
}

fn c4_oracle() -> Outcome {
    let p: f64 = 0.99;
    let mut cfg = SkillModelConfig::ideal();
    cfg.success = SuccessTable::uniform(p);
    cfg.geometric_failures = false;
    let n = 10_000;
    let records =
        run_records(n, &cfg, 2024, &BenchmarkOptions::default()).map_err(|e| e.to_string())?;
    let curve = survival_curve(&records).map_err(|e| e.to_string())?;
    let emp = curve.at(28).ok_or("no 28th point")?;
    let expect = p.powi(28);
    let se = (expect * (1.0 - expect) / n as f64).sqrt();
    let z = (emp - expect) / se;
    ensure!(
        z.abs() <= 3.0,
        "survival {emp:.4} vs {expect:.4}, z = {z:.2}"
    );
    Ok(format!(
        "survival {emp:.4} vs p^28 = {expect:.4}, z = {z:.2}"
    ))
}

fn parse_per_skill(s: &str) -> Option<PerSkill> {
    if s.is_empty() {
        return None;
    }
    Some(match s.split_once('/') {
        Some((a, b)) => PerSkill::Split([a.parse().unwrap(), b.parse().unwrap()]),
        None => PerSkill::One(s.parse().unwrap()),
    })
}

fn c6_rewards() -> Outcome {
    let mut rng = stream(6, 0);
    for i in 0..100_000 {
        let w = rng.random_range(1e-3..2.0);
        let alpha = rng.random_range(1e-3..50.0);
        let c1 = rng.random_range(0.0..10.0);
        let c2 = c1 + rng.random_range(0.0..10.0);
        let k1 = kernel(w, alpha, c1).map_err(|e| e.to_string())?;
        let k2 = kernel(w, alpha, c2).map_err(|e| e.to_string())?;
        ensure!(
            (0.0..=w).contains(&k1) && k2 <= k1,
            "draw {i}: w={w} alpha={alpha} c={c1},{c2}"
        );
        ensure!(kernel(w, alpha, 0.0).unwrap() == w, "draw {i}: kernel at 0");
    }

    let reg = RewardRegistry::default();
    let bpr = reg
        .component(Scope::Pickup, "base pitch roll")
        .ok_or("no base pitch roll row")?;
    let s = StateRecord {
        base_theta: Some(0.0),
        base_phi: Some(-0.15),
        ..StateRecord::default()
    };
    let v = reg
        .eval_component(bpr, RewardSkill::Pickup, &s)
        .map_err(|e| e.to_string())?;
    ensure!(v == 0.2, "base pitch roll = {v}");

    let csv =
        std::fs::read_to_string(core_fixture("reward_rows.csv")).map_err(|e| e.to_string())?;
    let mut rows = 0;
    for line in csv.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let scope: Scope =
            serde_json::from_str(&format!("\"{}\"", f[0])).map_err(|e| e.to_string())?;
        let c = reg
            .component(scope, f[1])
            .ok_or(format!("missing row {line}"))?;
        ensure!(
            Some(c.weight) == parse_per_skill(f[2]),
            "weight mismatch: {line}"
        );
        ensure!(c.alpha == parse_per_skill(f[3]), "scale mismatch: {line}");
        rows += 1;
    }
    ensure!(
        rows == reg.components.len(),
        "{rows} manifest rows, {} registry rows",
        reg.components.len()
    );

    for _ in 0..10_000 {
        let pts = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<[f64; 3]> {
            (0..9)
                .map(|_| [0; 3].map(|_| rng.random_range(-2.0..2.0)))
                .collect()
        };
        let (a, b) = (pts(&mut rng), pts(&mut rng));
        let mut brute = 0.0;
        for i in 0..9 {
            let mut sq = 0.0;
            for d in 0..3 {
                sq += (a[i][d] - b[i][d]) * (a[i][d] - b[i][d]);
            }
            brute += f64::sqrt(sq);
        }
        let got = constellation_cost(&a, &b).map_err(|e| e.to_string())?;
        ensure!(
            (got - brute).abs() <= 1e-12 * brute.max(1.0),
            "constellation {got} vs {brute}"
        );
    }
    Ok(format!(
        "1e5 kernel draws, base pitch roll = 0.2, {rows} rows match, 1e4 constellations"
    ))
}

fn c7_schedule() -> Outcome {
    let a = pickup_phase_schedule(0.9).map_err(|e| e.to_string())?;
    let b = pickup_phase_schedule(0.3).map_err(|e| e.to_string())?;
    ensure!(
        a.approach == 30 && b.approach == 90,
        "approach {} / {}",
        a.approach,
        b.approach
    );
    for s in [a, b] {
        let c = (s.contact, s.lift, s.table_removal_offset, s.terminal_stand);
        ensure!(c == (25, 35, 45, 120), "constants {c:?}");
    }
    Ok("approach 30 @ 0.9, 90 @ 0.3; 25/35/45/120".into())
}

fn synthetic(id: &str, n: usize) -> ReferenceTrajectory {
    ReferenceTrajectory {
        id: id.into(),
        source: Source::Mocap,
        recorded_with_dr: false,
        components: vec![
            Component::new("base_height", ComponentKind::RootPosition),
            Component::new("base_pitch", ComponentKind::RootOrientation),
            Component::new("vx", ComponentKind::RootVelocity),
            Component::new("elbow", ComponentKind::Joint),
        ],
        frames: (0..n)
            .map(|i| Frame {
                values: vec![0.8, 0.0, 0.1 * i as f64, 0.3],
                mask: vec![1, 0, 1, 1],
                phase: None,
            })
            .collect(),
    }
}

fn c8_coverage() -> Outcome {
    let mut rng = stream(8, 0);
    for round in 0..1_000 {
        let ids = |rng: &mut rand_chacha::ChaCha8Rng| -> BTreeSet<u32> {
            (0..rng.random_range(0..20))
                .map(|_| rng.random_range(0..40))
                .collect()
        };
        let (a, b) = (ids(&mut rng), ids(&mut rng));
        let traj = |i: &u32| synthetic(&format!("t{i}"), 1 + *i as usize % 7);
        let prev = ReferenceSet::initial(a.iter().map(traj)).map_err(|e| e.to_string())?;
        let next = aggregate(&prev, b.iter().map(traj)).map_err(|e| e.to_string())?;
        ensure!(
            prev.trajectories
                .iter()
                .all(|(k, v)| next.trajectories.get(k) == Some(v)),
            "round {round}: lost a trajectory"
        );
        ensure!(
            next.len() == a.union(&b).count(),
            "round {round}: size {}",
            next.len()
        );
        ensure!(
            next.generation == prev.generation + 1,
            "round {round}: generation"
        );
    }

    let set = ReferenceSet::initial((0..12).map(|i| synthetic(&format!("d{i}"), 1 + 3 * i)))
        .map_err(|e| e.to_string())?;
    let cfg = CommandDistConfig::default();
    for draw in 0..1_000_000 {
        let d = sample_directive(&set, &cfg, &mut rng).map_err(|e| e.to_string())?;
        let t = &set.trajectories[&d.trajectory_id];
        ensure!(
            d.time_index < t.len(),
            "draw {draw}: time index {}",
            d.time_index
        );
        ensure!(
            d.mask.len() == t.components.len(),
            "draw {draw}: mask length"
        );
        ensure!(
            d.mask.iter().all(|m| *m <= 1),
            "draw {draw}: mask {:?}",
            d.mask
        );
        for (name, v) in &d.commands {
            let r = cfg
                .commands
                .get(name)
                .ok_or(format!("unknown command {name}"))?;
            ensure!(r.contains(*v), "draw {draw}: {name} = {v}");
        }
    }

    let file =
        std::fs::File::open(core_fixture("pickup_rollout.jsonl")).map_err(|e| e.to_string())?;
    let t = read_trajectory(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
    let r = reverse_pickup_to_place(&t).map_err(|e| e.to_string())?;
    ensure!(
        reverse_pickup_to_place(&r).map_err(|e| e.to_string())? == t,
        "not an involution"
    );
    let n = t.len();
    for (i, f) in t.frames.iter().enumerate() {
        let mapped = r.frames[n - 1 - i].phase;
        let want = match f.phase {
            Some(Phase::Lift) => Some(Phase::Approach),
            Some(Phase::Stand) => Some(Phase::Place),
            Some(Phase::Approach) => Some(Phase::Lift),
            Some(Phase::Place) => Some(Phase::Stand),
            p => p,
        };
        ensure!(mapped == want, "frame {i}: {:?} -> {mapped:?}", f.phase);
    }
    ensure!(
        r.frames[0].phase == Some(Phase::Place),
        "first reversed frame not place"
    );
    Ok(format!(
        "1e3 unions, 1e6 directives, involution on {n}-frame fixture"
    ))
}

fn record(group: &str, moves: usize, success: bool, k_fail: Option<usize>) -> EpisodeRecord {
    let upto = k_fail.unwrap_or(28);
    let invocations = (1..=upto)
        .map(|k| Invocation {
            k,
            move_index: (k - 1) / 4 + 1,
            kind: SkillKind::ALL[(k - 1) % 4],
            success: Some(k) != k_fail,
            failure_mode: (Some(k) == k_fail).then_some(FailureMode::Timeout),
        })
        .collect();
    EpisodeRecord {
        seed: 0,
        group: Some(group.into()),
        total_skills: 28,
        invocations,
        completed_moves: moves,
        placements: vec![],
        final_errors: vec![],
        success,
    }
}

fn c9_metrics() -> Outcome {
    // (successes, moves of the failed trials)
    let configs: [(&str, usize, &[usize]); 3] = [
        ("a", 3, &[1, 1]),
        ("b", 2, &[2, 2, 1]),
        ("c", 1, &[4, 4, 3, 3]),
    ];
    let mut records = Vec::new();
    for (g, ok, failed) in configs {
        records.extend((0..ok).map(|_| record(g, 7, true, None)));
        records.extend(failed.iter().map(|m| record(g, *m, false, Some(4 * m + 2))));
    }
    let m = report_metrics(&records).map_err(|e| e.to_string())?;
    ensure!(m.success_rate == 0.4, "success {}", m.success_rate);
    ensure!(
        m.avg_completed_moves == 4.2,
        "moves {}",
        m.avg_completed_moves
    );
    let per: Vec<(f64, f64)> = m
        .groups
        .iter()
        .map(|g| (g.success_rate, g.avg_completed_moves))
        .collect();
    ensure!(
        per == [(0.6, 4.6), (0.4, 3.8), (0.2, 4.2)],
        "groups {per:?}"
    );

    let mut rng = stream(9, 0);
    for set in 0..1_000 {
        let n = rng.random_range(1..60);
        let recs: Vec<_> = (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    record("", 7, true, None)
                } else {
                    let k = rng.random_range(1..=28);
                    record("", (k - 1) / 4, false, Some(k))
                }
            })
            .collect();
        let curve = survival_curve(&recs).map_err(|e| e.to_string())?;
        let rate = report_metrics(&recs)
            .map_err(|e| e.to_string())?
            .success_rate;
        ensure!(
            curve.at(28) == Some(rate),
            "set {set}: {:?} vs {rate}",
            curve.at(28)
        );
    }
    Ok("40% and 4.2 overall; survival[28] == success on 1e3 sets".into())
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |tag: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let (json, csv) = (
            dir.path().join(format!("{tag}.json")),
            dir.path().join(format!("{tag}.csv")),
        );
        let out = Command::new(env!("CARGO_BIN_EXE_hanoi"))
            .args([
                "simulate",
                "--episodes",
                "2000",
                "--seed",
                "31337",
                "--preset",
                "extended",
                "--dr",
                "on",
            ])
            .arg("--out")
            .arg(&json)
            .arg("--csv")
            .arg(&csv)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            out.status.success(),
            "exit {:?}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        );
        Ok((
            std::fs::read(json).map_err(|e| e.to_string())?,
            std::fs::read(csv).map_err(|e| e.to_string())?,
        ))
    };
    let a = run("a")?;
    let b = run("b")?;
    ensure!(a.0 == b.0, "report files differ");
    ensure!(a.1 == b.1, "survival CSVs differ");
    Ok(format!("{} report bytes identical across runs", a.0.len()))
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored.
    let (c3, c5) = c3_c5_calibration();
    let results = [
        ("planner", c1_planner()),
        ("instance generator", c2_instances()),
        ("calibration closure", c3),
        ("analytic survival oracle", c4_oracle()),
        ("placement precision", c5),
        ("reward suite", c6_rewards()),
        ("phase schedule", c7_schedule()),
        ("coverage bookkeeping", c8_coverage()),
        ("metrics engine", c9_metrics()),
        ("determinism", c10_determinism()),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(msg) => println!("criterion {:>2} {name}: PASS ({msg})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({msg})", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
