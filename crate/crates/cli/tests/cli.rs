use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hanoi_core::rewards::StateRecord;
use serde_json::Value;

fn hanoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hanoi"))
        .args(args)
        .env_remove("HANOI_BENCH_CONFIG")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| {
        panic!(
            "stderr is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

#[test]
fn gen_then_plan() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let plan = dir.path().join("plan.json");
    assert!(hanoi(&["gen", "--seed", "42", "--out", p(&inst)])
        .status
        .success());
    let out = hanoi(&["plan", "--instance", p(&inst), "--out", p(&plan)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_str(&fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(v["schema"], "hanoi-plan/1");
    assert_eq!(v["moves"].as_array().unwrap().len(), 7);
    assert_eq!(v["skills"]["commands"].as_array().unwrap().len(), 28);
}

#[test]
fn gen_many_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = hanoi(&[
        "gen",
        "--seed",
        "10",
        "--count",
        "3",
        "--dr",
        "on",
        "--out",
        p(dir.path()),
    ]);
    assert!(out.status.success());
    for s in 10..13 {
        let text = fs::read_to_string(dir.path().join(format!("instance-{s}.json"))).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["seed"], s);
    }
}

#[test]
fn stale_schema_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let text = String::from_utf8(hanoi(&["gen", "--seed", "1"]).stdout).unwrap();
    fs::write(&inst, text.replace("hanoi-instance/1", "hanoi-instance/0")).unwrap();
    let out = hanoi(&["plan", "--instance", p(&inst)]);
    assert_eq!(out.status.code(), Some(4));
    let e = error_json(&out);
    assert_eq!(e["exit_code"], 4);
    assert!(e["message"].as_str().unwrap().contains("hanoi-instance/0"));
}

#[test]
fn usage_and_io_exit_codes() {
    assert_eq!(
        hanoi(&["simulate", "--episodes", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        hanoi(&["simulate", "--episodes", "5", "--jobs", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(hanoi(&["simulate", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        hanoi(&["simulate", "--episodes", "5", "--preset", "nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        hanoi(&["reward-eval", "--skill", "dance", "--trace", "x"])
            .status
            .code(),
        Some(2)
    );
    let missing = hanoi(&["plan", "--instance", "/nonexistent/inst.json"]);
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(error_json(&missing)["error"], "io");
    assert_eq!(hanoi(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_override_is_invalid_input() {
    let out = hanoi(&[
        "simulate",
        "--episodes",
        "5",
        "--set",
        "noise.nonexistent=1",
    ]);
    assert_eq!(out.status.code(), Some(5));
    let out = hanoi(&[
        "simulate",
        "--episodes",
        "5",
        "--set",
        "recovery_disturbance=1.5",
    ]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn report_reproduces_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let (a, recs, b) = (
        dir.path().join("a.json"),
        dir.path().join("r.json"),
        dir.path().join("b.json"),
    );
    let out = hanoi(&[
        "simulate",
        "--episodes",
        "300",
        "--seed",
        "4",
        "--preset",
        "finetune",
        "--out",
        p(&a),
        "--records",
        p(&recs),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(hanoi(&["report", "--records", p(&recs), "--out", p(&b)])
        .status
        .success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(v["preset"], "finetune-nodr");
    assert_eq!(v["episodes"], 300);
    assert_eq!(v["survival"]["points"].as_array().unwrap().len(), 28);
}

#[test]
fn config_sources_take_precedence_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        hanoi_core::SkillModelConfig::preset(hanoi_core::Method::Base, true).to_json_pretty(),
    )
    .unwrap();
    let run = |extra: &[&str], env: bool| -> Value {
        let mut c = Command::new(env!("CARGO_BIN_EXE_hanoi"));
        c.args(["simulate", "--episodes", "20"]).args(extra);
        if env {
            c.env("HANOI_BENCH_CONFIG", &cfg);
        } else {
            c.env_remove("HANOI_BENCH_CONFIG");
        }
        serde_json::from_slice(&c.output().unwrap().stdout).unwrap()
    };
    assert_eq!(run(&[], false)["preset"], "extended-nodr");
    assert_eq!(run(&[], true)["preset"], "base-dr");
    assert_eq!(
        run(&["--preset", "residual"], true)["preset"],
        "residual-nodr"
    );
    assert_eq!(run(&["--preset", "hardware"], false)["preset"], "hardware");
    let perfect = run(
        &[
            "--set",
            "success.pickup.normal=1.0",
            "--set",
            "name=\"custom\"",
        ],
        false,
    );
    assert_eq!(perfect["preset"], "custom");
}

#[test]
fn reward_eval_writes_breakdown_csv() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let line = serde_json::to_string(&StateRecord::perfect()).unwrap();
    fs::write(&trace, format!("{line}\n{line}\n")).unwrap();
    let (csv, metrics) = (dir.path().join("r.csv"), dir.path().join("m.json"));
    let out = hanoi(&[
        "reward-eval",
        "--skill",
        "pickup",
        "--trace",
        p(&trace),
        "--out",
        p(&csv),
        "--metrics",
        p(&metrics),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("step,pickup.hand contact position,pickup.base pitch roll"));
    assert!(lines[0].ends_with(",total"));
    assert_eq!(lines[0].split(',').count(), 20 + 2);
    let total: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((total - 1.65).abs() < 1e-12, "{total}");
    assert!(fs::metadata(&metrics).unwrap().len() > 0);

    fs::write(&trace, "").unwrap();
    assert_eq!(
        hanoi(&["reward-eval", "--skill", "place", "--trace", p(&trace)])
            .status
            .code(),
        Some(5)
    );
}

#[test]
fn aggregate_with_reversal() {
    let dir = tempfile::tempdir().unwrap();
    let (r1, r2, manifest, stats) = (
        dir.path().join("r1.json"),
        dir.path().join("r2.json"),
        dir.path().join("manifest.json"),
        dir.path().join("stats.json"),
    );
    let rollout = fixture("pickup_rollout.jsonl");
    let out = hanoi(&[
        "aggregate",
        "--add",
        p(&rollout),
        "--reverse",
        "--out",
        p(&r1),
        "--manifest",
        p(&manifest),
        "--stats",
        p(&stats),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&fs::read(&r1).unwrap()).unwrap();
    assert_eq!(v["generation"], 1);
    let ids: Vec<&String> = v["trajectories"].as_object().unwrap().keys().collect();
    assert_eq!(ids, ["pickup-h045", "pickup-h045~reversed"]);
    let m: Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(m["trajectories"].as_array().unwrap().len(), 2);
    let s: Value = serde_json::from_slice(&fs::read(&stats).unwrap()).unwrap();
    assert_eq!(s["frames"], 24);

    // Adding the same rollout again is a no-op apart from the generation.
    let out = hanoi(&[
        "aggregate",
        "--set",
        p(&r1),
        "--add",
        p(&rollout),
        "--out",
        p(&r2),
    ]);
    assert!(out.status.success());
    let v2: Value = serde_json::from_slice(&fs::read(&r2).unwrap()).unwrap();
    assert_eq!(v2["generation"], 2);
    assert_eq!(v2["trajectories"], v["trajectories"]);
}
