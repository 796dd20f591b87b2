//! `hanoi` command-line driver.
//!
//! Every subcommand reads and writes versioned JSON (CSV for curves and reward
//! breakdowns). Failures print one JSON object on stderr and exit with a status
//! that identifies the error class, see [`CliError::exit_code`].

mod error;
mod overrides;

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hanoi_core::calibrate::{self, CalibrationOptions, TARGETS};
use hanoi_core::coverage::{
    aggregate, coverage_stats, read_trajectory, reverse_pickup_to_place, CommandDistConfig,
    Manifest, ReferenceSet, Source,
};
use hanoi_core::instance::{sample_instance, InstanceConfig, WorkspaceInstance};
use hanoi_core::planner::{compile_plan, plan_rearrangement, replay, write_pddl, SkillPlan};
use hanoi_core::rewards::{trace_metrics, RewardRegistry, RewardSkill, StateRecord};
use hanoi_core::schema;
use hanoi_core::simulator::{
    run_records, write_survival_csv, BenchmarkOptions, EpisodeOptions, RecordSet,
};
use hanoi_core::skills::{Method, SkillModelConfig};
use hanoi_core::symbolic::Move;
use serde::{Deserialize, Serialize};

pub use error::CliError;
pub use overrides::apply_override;

/// Environment variable naming a default skill-model config file.
pub const CONFIG_ENV: &str = "HANOI_BENCH_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "hanoi", version, about = "Task-level humanoid Tower of Hanoi benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample workspace instances.
    Gen(GenArgs),
    /// Plan an instance into moves and compiled skills.
    Plan(PlanArgs),
    /// Run the benchmark and write a report.
    Simulate(SimulateArgs),
    /// Recompute a report from saved episode records.
    Report(ReportArgs),
    /// Evaluate skill rewards over a state trace.
    RewardEval(RewardEvalArgs),
    /// Grow a reference-trajectory set.
    Aggregate(AggregateArgs),
    /// Refit the shipped skill-model presets.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn on(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of instances; instance `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long, value_enum, default_value_t = Toggle::Off)]
    pub dr: Toggle,
    /// Instance-generator config (JSON); defaults to the standard ranges.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file, or directory when `--count` > 1. Stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the problem as PDDL (domain goes next to it).
    #[arg(long)]
    pub pddl: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    /// Preset: a method (`base`, `finetune`, `residual`, `extended`) combined with
    /// `--dr`, or a full preset name such as `hardware`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum, default_value_t = Toggle::Off)]
    pub dr: Toggle,
    /// Skill-model config file; overrides `--preset` and the environment default.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config field, e.g. `--set noise.place_x_sigma=0.05`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Report JSON; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Survival curve CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Per-episode records JSON, the input of `report`.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Keep executing after a failed skill to collect partial statistics.
    #[arg(long)]
    pub continue_on_failure: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RewardEvalArgs {
    /// `pickup`, `place`, `goto` or `goto_with_box`.
    #[arg(long)]
    pub skill: String,
    /// State trace: JSON array or one JSON object per line.
    #[arg(long)]
    pub trace: PathBuf,
    /// Reward registry JSON; the built-in tables if omitted.
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Breakdown CSV; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write balance and tracking metrics of the trace.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Previous reference set; an empty generation-0 set if omitted.
    #[arg(long)]
    pub set: Option<PathBuf>,
    /// Trajectory JSONL files to add.
    #[arg(long = "add", value_name = "FILE")]
    pub add: Vec<PathBuf>,
    /// Also add the time reversal of each added pickup rollout.
    #[arg(long)]
    pub reverse: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Coverage statistics JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0x00C0_FFEE)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub noise_rounds: usize,
    #[arg(long, default_value_t = 30)]
    pub bisection_steps: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Moves and compiled skills of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanArtifact {
    pub schema: String,
    pub instance_seed: u64,
    pub n_boxes: u32,
    pub moves: Vec<Move>,
    pub skills: SkillPlan,
}

/// Parse `argv` (program name first), run, and return the exit status. Errors go to
/// stderr as JSON.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Plan(a) => plan(a),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
        Command::RewardEval(a) => reward_eval(a),
        Command::Aggregate(a) => aggregate_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, text.as_bytes()),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes") + "\n"
}

/// Parse JSON that carries a `schema` field, checking the version first so a
/// mismatch is reported as such rather than as a field error.
fn parse_versioned<T: for<'de> Deserialize<'de>>(
    text: &str,
    expected: &str,
    path: &Path,
) -> Result<T, CliError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    schema::check(expected, found)
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    serde_json::from_value(value).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let cfg = match &a.config {
        Some(p) => serde_json::from_str::<InstanceConfig>(&read(p)?)
            .map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?,
        None => InstanceConfig::default(),
    }
    .with_dr(a.dr.on());
    if a.count == 1 {
        let inst = sample_instance(a.seed, &cfg)?;
        return emit(a.out.as_deref(), &(inst.to_json() + "\n"));
    }
    let dir = a
        .out
        .ok_or_else(|| CliError::Usage("--out <DIR> is required with --count > 1".into()))?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for i in 0..a.count {
        let seed = a.seed.wrapping_add(i);
        let inst = sample_instance(seed, &cfg)?;
        write(
            &dir.join(format!("instance-{seed}.json")),
            (inst.to_json() + "\n").as_bytes(),
        )?;
    }
    Ok(())
}

pub fn plan_instance(inst: &WorkspaceInstance) -> Result<PlanArtifact, CliError> {
    let start = inst.start_state();
    let moves = plan_rearrangement(&start, &inst.goal())?;
    replay(&start, &moves)?;
    let skills = compile_plan(inst, &moves, &Default::default())?;
    Ok(PlanArtifact {
        schema: schema::PLAN.to_string(),
        instance_seed: inst.seed,
        n_boxes: inst.n_boxes(),
        moves,
        skills,
    })
}

fn plan(a: PlanArgs) -> Result<(), CliError> {
    let inst = WorkspaceInstance::from_json(&read(&a.instance)?)?;
    let artifact = plan_instance(&inst)?;
    if let Some(p) = &a.pddl {
        let name = format!("hanoi-{}", inst.seed);
        write_pddl(p, &name, &inst.start_state(), &inst.goal()).map_err(|e| CliError::io(p, e))?;
    }
    emit(a.out.as_deref(), &pretty(&artifact))
}

/// Skill-model config from `--config`, `--preset`, `HANOI_BENCH_CONFIG` or the
/// Extended default, in that order, with `--set` overrides applied last.
pub fn resolve_config(a: &ConfigArgs) -> Result<SkillModelConfig, CliError> {
    let env_path = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty());
    let base = if let Some(p) = &a.config {
        SkillModelConfig::from_json(&read(p)?)?
    } else if let Some(name) = &a.preset {
        preset_by_name(name, a.dr.on())?
    } else if let Some(p) = env_path {
        SkillModelConfig::from_json(&read(Path::new(&p))?)?
    } else {
        SkillModelConfig::preset(Method::Extended, a.dr.on())
    };
    if a.overrides.is_empty() {
        return Ok(base);
    }
    let mut value = serde_json::to_value(&base).expect("config serializes");
    for o in &a.overrides {
        apply_override(&mut value, o)?;
    }
    Ok(SkillModelConfig::from_value(value)?)
}

fn preset_by_name(name: &str, dr: bool) -> Result<SkillModelConfig, CliError> {
    let name = name.to_ascii_lowercase();
    if SkillModelConfig::preset_names().contains(&name.as_str()) {
        return Ok(SkillModelConfig::named_preset(&name)?);
    }
    let full = format!("{name}-{}", if dr { "dr" } else { "nodr" });
    SkillModelConfig::named_preset(&full).map_err(|_| {
        CliError::Usage(format!(
            "unknown preset {name:?}; expected one of base, finetune, residual, extended, {}",
            SkillModelConfig::preset_names().join(", ")
        ))
    })
}

fn write_outputs(set: &RecordSet, out: Option<&Path>, csv: Option<&Path>) -> Result<(), CliError> {
    let report = set.report()?;
    if let Some(p) = csv {
        let mut buf = Vec::new();
        write_survival_csv(&report.survival, &mut buf).expect("writing to memory");
        write(p, &buf)?;
    }
    emit(out, &pretty(&report))
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    if a.episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    if a.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let cfg = resolve_config(&a.config)?;
    let opts = BenchmarkOptions {
        instance: InstanceConfig::default(),
        episode: EpisodeOptions {
            continue_on_failure: a.continue_on_failure,
        },
        jobs: a.jobs,
    };
    let records = run_records(a.episodes as usize, &cfg, a.seed, &opts)?;
    let set = RecordSet::new(&cfg, a.seed, records);
    if let Some(p) = &a.records {
        write(
            p,
            serde_json::to_string(&set)
                .expect("records serialize")
                .as_bytes(),
        )?;
    }
    write_outputs(&set, a.out.as_deref(), a.csv.as_deref())
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let set: RecordSet = parse_versioned(&read(&a.records)?, schema::RECORDS, &a.records)?;
    if set.records.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: no records",
            a.records.display()
        )));
    }
    write_outputs(&set, a.out.as_deref(), a.csv.as_deref())
}

fn read_trace(path: &Path) -> Result<Vec<StateRecord>, CliError> {
    let text = read(path)?;
    let bad = |line: usize, e: serde_json::Error| {
        CliError::Invalid(format!("{}:{line}: {e}", path.display()))
    };
    let trace: Vec<StateRecord> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text).map_err(|e| bad(1, e))?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(i + 1, e)))
            .collect::<Result<_, _>>()?
    };
    if trace.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: empty trace",
            path.display()
        )));
    }
    Ok(trace)
}

fn reward_eval(a: RewardEvalArgs) -> Result<(), CliError> {
    let skill: RewardSkill = a.skill.parse()?;
    let registry = match &a.registry {
        Some(p) => RewardRegistry::from_json(&read(p)?)?,
        None => RewardRegistry::default(),
    };
    let trace = read_trace(&a.trace)?;
    let mut csv = String::new();
    for (step, s) in trace.iter().enumerate() {
        s.validate()?;
        let b = registry.eval_skill_reward(skill, s)?;
        if step == 0 {
            csv.push_str("step");
            for t in &b.terms {
                let scope = serde_json::to_value(t.scope).expect("scope serializes");
                csv.push_str(&format!(",{}.{}", scope.as_str().unwrap_or(""), t.name));
            }
            csv.push_str(",total\n");
        }
        csv.push_str(&step.to_string());
        for t in &b.terms {
            csv.push_str(&format!(",{}", t.value));
        }
        csv.push_str(&format!(",{}\n", b.total));
    }
    if let Some(p) = &a.metrics {
        write(p, pretty(&trace_metrics(&trace)?).as_bytes())?;
    }
    emit(a.out.as_deref(), &csv)
}

fn aggregate_cmd(a: AggregateArgs) -> Result<(), CliError> {
    let prev = match &a.set {
        Some(p) => ReferenceSet::from_json(&read(p)?)?,
        None => ReferenceSet::default(),
    };
    let mut new = Vec::new();
    for p in &a.add {
        let f = fs::File::open(p).map_err(|e| CliError::io(p, e))?;
        let t =
            read_trajectory(BufReader::new(f)).map_err(|e| CliError::from(e).with_context(p))?;
        if a.reverse && t.source == Source::PickupRollout {
            new.push(reverse_pickup_to_place(&t)?);
        }
        new.push(t);
    }
    let next = aggregate(&prev, new)?;
    write(&a.out, (next.to_json() + "\n").as_bytes())?;
    if let Some(p) = &a.manifest {
        write(p, pretty(&Manifest::of(&next)).as_bytes())?;
    }
    if let Some(p) = &a.stats {
        write(
            p,
            pretty(&coverage_stats(&next, &CommandDistConfig::default())?).as_bytes(),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CalibrationLine<'a> {
    preset: &'a str,
    scale: f64,
    success: f64,
    x_cm: f64,
    y_cm: f64,
    yaw_deg: f64,
}

fn calibrate_cmd(a: CalibrateArgs) -> Result<(), CliError> {
    if a.episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let opts = CalibrationOptions {
        episodes: a.episodes,
        seed: a.seed,
        noise_rounds: a.noise_rounds,
        bisection_steps: a.bisection_steps,
        jobs: a.jobs,
    };
    let mut extended_dr = None;
    for t in TARGETS.iter() {
        let r = calibrate::calibrate(t, &opts)?;
        let cfg = calibrate::rounded(&r.config);
        write(
            &a.out_dir.join(format!("{}.json", cfg.name)),
            (cfg.to_json_pretty() + "\n").as_bytes(),
        )?;
        println!(
            "{}",
            serde_json::to_string(&CalibrationLine {
                preset: &cfg.name,
                scale: r.scale,
                success: r.success,
                x_cm: r.x_cm,
                y_cm: r.y_cm,
                yaw_deg: r.yaw_deg,
            })
            .expect("line serializes")
        );
        if t.method == Method::Extended && t.dr {
            extended_dr = Some(cfg);
        }
    }
    if let Some(cfg) = extended_dr {
        let hw = calibrate::rounded(&calibrate::hardware_preset(&cfg));
        write(
            &a.out_dir.join("hardware.json"),
            (hw.to_json_pretty() + "\n").as_bytes(),
        )?;
    }
    Ok(())
}
