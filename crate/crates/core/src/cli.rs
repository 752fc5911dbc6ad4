//! The `bps` command line. Every flag can also be set through an
//! environment variable named `BPS_<FLAG>` (e.g. `BPS_HORIZON=5`).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::{info, warn};

use crate::belief::Belief;
use crate::domains::{build_kitchen, build_pickup_example, Cell, KitchenConfig, Problem};
use crate::io::{
    parse_model, parse_objective, parse_policy, plan_to_json, policy_to_dot, policy_to_json, problem_to_json,
    write_stats, StatsRow,
};
use crate::rational::{parse_prob, Prob};
use crate::solver::{Backend, SessionFactory, SmtConfig};
use crate::synthesis::{synthesis_run, SynthesisConfig, SynthesisOutcome, Verdict};
use crate::validate::{simulate, validate_policy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
/// `synth`: no policy within the bound. `validate`: policy rejected.
pub const EXIT_NEGATIVE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bps",
    version,
    about = "Bounded policy synthesis for POMDPs with safe-reachability objectives"
)]
pub struct Cli {
    /// Log filter (tracing syntax), e.g. `info` or `bps_core=debug`.
    #[arg(long, global = true, env = "BPS_LOG", default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a policy.
    Synth(SynthArgs),
    /// Check a policy file exhaustively.
    Validate(ValidateArgs),
    /// Monte Carlo execution of a policy file.
    Simulate(SimulateArgs),
    /// Sweep kitchen instances and write one stats row per run.
    Bench(BenchArgs),
    /// Write a problem as model and objective JSON files.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainKind {
    Pickup,
    Kitchen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Smtlib,
    Enum,
    /// External solver cross-checked against the enumerative backend.
    Diff,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Built-in domain.
    #[arg(long, env = "BPS_DOMAIN", value_enum, conflicts_with = "model")]
    pub domain: Option<DomainKind>,
    /// Model JSON file. Without `initial_belief` the first state is used.
    #[arg(long, env = "BPS_MODEL", requires = "objective")]
    pub model: Option<PathBuf>,
    /// Objective JSON file.
    #[arg(long, env = "BPS_OBJECTIVE", requires = "model")]
    pub objective: Option<PathBuf>,
    #[command(flatten)]
    pub kitchen: KitchenArgs,
}

#[derive(Debug, Clone, Args)]
pub struct KitchenArgs {
    #[arg(long, env = "BPS_WIDTH", default_value_t = 3)]
    pub width: usize,
    #[arg(long, env = "BPS_HEIGHT", default_value_t = 2)]
    pub height: usize,
    /// Shadow cells as `x,y` separated by `;`.
    #[arg(long, env = "BPS_SHADOW", value_delimiter = ';', default_value = "1,0;1,1")]
    pub shadow: Vec<Cell>,
    /// Wall cells as `x,y` separated by `;`.
    #[arg(long, env = "BPS_WALLS", value_delimiter = ';')]
    pub walls: Vec<Cell>,
    /// Cell from which the cup can be picked up.
    #[arg(long, env = "BPS_STORAGE", default_value = "2,0")]
    pub storage: Cell,
    #[arg(long, env = "BPS_START", default_value = "0,0")]
    pub start: Cell,
    /// Number of obstacles (M).
    #[arg(long, env = "BPS_OBSTACLES", default_value_t = 1)]
    pub obstacles: usize,
    #[arg(long, env = "BPS_P_FAIL", default_value = "1/20", value_parser = parse_prob)]
    pub p_fail: Prob,
    #[arg(long, env = "BPS_P_FP", default_value = "1/50", value_parser = parse_prob)]
    pub p_fp: Prob,
    #[arg(long, env = "BPS_P_FN", default_value = "1/20", value_parser = parse_prob)]
    pub p_fn: Prob,
    /// Goal: P(holding) > 1 - delta-goal.
    #[arg(long, env = "BPS_DELTA_GOAL", default_value = "1/5", value_parser = parse_prob)]
    pub delta_goal: Prob,
    /// Safety: P(collision) < delta-safe.
    #[arg(long, env = "BPS_DELTA_SAFE", default_value = "1/5", value_parser = parse_prob)]
    pub delta_safe: Prob,
    /// Allow pick-up only when the robot is surely on the storage cell.
    #[arg(long, env = "BPS_RESTRICT_PICKUP")]
    pub restrict_pickup: bool,
}

impl KitchenArgs {
    pub fn config(&self) -> KitchenConfig {
        KitchenConfig {
            width: self.width,
            height: self.height,
            walls: self.walls.clone(),
            shadow_cells: self.shadow.clone(),
            storage_cell: self.storage,
            start_cell: self.start,
            obstacles: self.obstacles,
            p_fail: self.p_fail.clone(),
            p_fp: self.p_fp.clone(),
            p_fn: self.p_fn.clone(),
            delta_goal: self.delta_goal.clone(),
            delta_safe: self.delta_safe.clone(),
            restrict_pickup: self.restrict_pickup,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, env = "BPS_BACKEND", value_enum, default_value = "smtlib")]
    pub backend: BackendKind,
    /// Solver command line; the solver must accept SMT-LIB 2 on stdin.
    #[arg(long, env = "BPS_SOLVER_CMD", default_value = "z3 -in")]
    pub solver_cmd: String,
    /// Replay all assertions into a fresh solver process for every check.
    #[arg(long, env = "BPS_NO_INCREMENTAL")]
    pub no_incremental: bool,
    /// Keep the solver's first model instead of lowering it to the least
    /// action/observation sequence.
    #[arg(long, env = "BPS_NO_CANONICAL")]
    pub no_canonical: bool,
    /// Append every command sent to the solver to this file.
    #[arg(long, env = "BPS_SMT_LOG")]
    pub smt_log: Option<PathBuf>,
    /// Per-check timeout in seconds.
    #[arg(long, env = "BPS_CHECK_TIMEOUT", default_value_t = 60.0)]
    pub check_timeout: f64,
    /// Solver random seed.
    #[arg(long, env = "BPS_SEED")]
    pub seed: Option<u64>,
}

impl SolverArgs {
    pub fn backend(&self) -> Result<Backend, String> {
        if !(self.check_timeout > 0.0 && self.check_timeout.is_finite()) {
            return Err(format!("invalid check timeout {}", self.check_timeout));
        }
        let config = SmtConfig {
            timeout: Duration::from_secs_f64(self.check_timeout),
            incremental: !self.no_incremental,
            canonical: !self.no_canonical,
            transcript: self.smt_log.clone(),
            seed: self.seed,
            ..SmtConfig::default()
        }
        .with_command_line(&self.solver_cmd)?;
        Ok(match self.backend {
            BackendKind::Enum => Backend::Enumerative,
            BackendKind::Smtlib => Backend::SmtLib(config),
            BackendKind::Diff => Backend::Differential(config),
        })
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Horizon bound h.
    #[arg(long, env = "BPS_HORIZON", default_value_t = 10)]
    pub horizon: usize,
    #[arg(long, env = "BPS_OUT_POLICY")]
    pub out_policy: Option<PathBuf>,
    #[arg(long, env = "BPS_OUT_DOT")]
    pub out_dot: Option<PathBuf>,
    /// CSV file receiving one stats row.
    #[arg(long, env = "BPS_STATS_OUT")]
    pub stats_out: Option<PathBuf>,
    /// Validate the synthesized policy (default).
    #[arg(long, overrides_with = "no_validate")]
    pub validate: bool,
    #[arg(long, env = "BPS_NO_VALIDATE", overrides_with = "validate")]
    pub no_validate: bool,
    /// Reuse results of recursive searches on equal beliefs.
    #[arg(long, env = "BPS_MEMOIZE")]
    pub memoize: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, env = "BPS_POLICY")]
    pub policy: PathBuf,
    #[arg(long, env = "BPS_HORIZON", default_value_t = 10)]
    pub horizon: usize,
    /// Where to write the counterexample plan, if any.
    #[arg(long)]
    pub out_counterexample: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, env = "BPS_POLICY")]
    pub policy: PathBuf,
    #[arg(long, env = "BPS_EPISODES", default_value_t = 100_000)]
    pub episodes: usize,
    #[arg(long, env = "BPS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Number of full episode traces to include in the JSON report.
    #[arg(long, default_value_t = 0)]
    pub traces: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IncrementalMode {
    On,
    Off,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub kitchen: KitchenArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Obstacle counts to sweep.
    #[arg(long, env = "BPS_SWEEP_M", value_delimiter = ',', default_value = "1")]
    pub sweep_m: Vec<usize>,
    /// Horizon bounds to sweep.
    #[arg(long, env = "BPS_SWEEP_H", value_delimiter = ',', default_value = "6")]
    pub sweep_h: Vec<usize>,
    #[arg(long, env = "BPS_INCREMENTAL", value_enum, default_value = "both")]
    pub incremental: IncrementalMode,
    #[arg(long, env = "BPS_STATS_OUT")]
    pub stats_out: Option<PathBuf>,
    #[arg(long, env = "BPS_MEMOIZE")]
    pub memoize: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub out_objective: PathBuf,
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn load_problem(args: &ProblemArgs) -> Result<Problem, String> {
    let problem = match (&args.domain, &args.model, &args.objective) {
        (Some(DomainKind::Pickup), _, _) => build_pickup_example(),
        (Some(DomainKind::Kitchen), _, _) => build_kitchen(&args.kitchen.config()).map_err(|e| e.to_string())?,
        (None, Some(model_path), Some(objective_path)) => {
            let model_file = model_path.display().to_string();
            let (model, initial) = parse_model(&read(model_path)?, &model_file).map_err(|e| e.to_string())?;
            let objective = parse_objective(&read(objective_path)?, &objective_path.display().to_string(), &model)
                .map_err(|e| e.to_string())?;
            let initial = initial.unwrap_or_else(|| Belief::point(model.num_states(), 0));
            Problem {
                name: model_path
                    .file_stem()
                    .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned()),
                model,
                initial,
                objective,
            }
        }
        _ => return Err("give either --domain or both --model and --objective".into()),
    };
    if !problem.objective.goal_within_safe() {
        warn!("goal beliefs are not provably inside the safe set; a goal belief may itself be unsafe");
    }
    Ok(problem)
}

fn stats_row(
    problem: &Problem,
    kitchen: Option<&KitchenConfig>,
    h: usize,
    backend: &Backend,
    out: &SynthesisOutcome,
) -> StatsRow {
    StatsRow {
        domain: problem.name.clone(),
        obstacles: kitchen.map(|k| k.obstacles),
        cells: kitchen.map(KitchenConfig::num_cells),
        h,
        backend: backend.name(),
        incremental: backend.incremental(),
        verdict: out.verdict.as_str().into(),
        solver_calls: out.stats.solver_calls,
        plans_checked: out.stats.plans_checked,
        interactions: out.stats.interactions,
        final_horizon: out.stats.final_horizon,
        wall_time_s: out.stats.wall_time_s(),
    }
}

fn write_rows(rows: &[StatsRow], path: Option<&Path>) -> Result<(), String> {
    match path {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            write_stats(rows, file).map_err(|e| e.to_string())
        }
        None => write_stats(rows, std::io::stdout()).map_err(|e| e.to_string()),
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<i32, String> {
    let problem = load_problem(&args.problem)?;
    let backend = args.solver.backend()?;
    let config = SynthesisConfig {
        horizon: args.horizon,
        memoize: args.memoize,
        validate: !args.no_validate,
        record_trace: false,
    };
    info!(backend = %backend.name(), horizon = args.horizon, "synthesizing");
    let outcome = synthesis_run(&problem.model, &problem.initial, &problem.objective, &backend, &config);
    let m = &problem.model;
    println!("verdict: {}", outcome.verdict.as_str());
    if let Some(policy) = &outcome.policy {
        let root = policy.action.map_or("(none)", |a| m.action_name(a));
        println!("root action: {root}");
        println!(
            "policy: {} nodes, {} paths, depth {}",
            policy.node_count(),
            policy.path_count(),
            policy.depth()
        );
        if let Some(path) = &args.out_policy {
            let text = serde_json::to_string_pretty(&policy_to_json(policy, m)).expect("json");
            write(path, &text)?;
        }
        if let Some(path) = &args.out_dot {
            write(path, &policy_to_dot(policy, m))?;
        }
    }
    let s = &outcome.stats;
    println!(
        "solver_calls: {}  plans_checked: {}  interactions: {}  final_horizon: {}  wall_time_s: {:.3}",
        s.solver_calls,
        s.plans_checked,
        s.interactions,
        s.final_horizon.map_or("-".to_string(), |k| k.to_string()),
        s.wall_time_s()
    );
    if let Some(path) = &args.stats_out {
        let kitchen = (args.problem.domain == Some(DomainKind::Kitchen)).then(|| args.problem.kitchen.config());
        write_rows(
            &[stats_row(&problem, kitchen.as_ref(), args.horizon, &backend, &outcome)],
            Some(path),
        )?;
    }
    match outcome.verdict {
        Verdict::Valid => Ok(EXIT_OK),
        Verdict::NoPolicyWithinBound => Ok(EXIT_NEGATIVE),
        Verdict::Error => Err(outcome.error.unwrap_or_else(|| "synthesis failed".into())),
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<i32, String> {
    let problem = load_problem(&args.problem)?;
    let m = &problem.model;
    let file = args.policy.display().to_string();
    let policy = parse_policy(&read(&args.policy)?, &file, m).map_err(|e| e.to_string())?;
    if policy.belief != problem.initial {
        warn!("policy root belief differs from the problem's initial belief");
    }
    let report = validate_policy(&policy, m, &problem.objective, args.horizon);
    match &report.counterexample {
        None => {
            println!("valid: {} paths", report.paths);
            Ok(EXIT_OK)
        }
        Some(c) => {
            println!("invalid: {c}");
            println!("counterexample: {}", c.plan.describe(m));
            if let Some(path) = &args.out_counterexample {
                let mut json = plan_to_json(&c.plan, m);
                json["kind"] = serde_json::Value::String(format!("{:?}", c.kind));
                write(path, &serde_json::to_string_pretty(&json).expect("json"))?;
            }
            Ok(EXIT_NEGATIVE)
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32, String> {
    if args.episodes == 0 {
        return Err("--episodes must be at least 1".into());
    }
    let problem = load_problem(&args.problem)?;
    let m = &problem.model;
    let policy =
        parse_policy(&read(&args.policy)?, &args.policy.display().to_string(), m).map_err(|e| e.to_string())?;
    if !validate_policy(&policy, m, &problem.objective, policy.depth()).valid {
        warn!("simulating a policy that fails validation");
    }
    let result = simulate(&policy, m, &problem.objective, args.episodes, args.seed, args.traces);
    println!("{}", serde_json::to_string_pretty(&result).expect("json"));
    Ok(EXIT_OK)
}

fn cmd_bench(args: &BenchArgs) -> Result<i32, String> {
    let modes: &[bool] = match args.incremental {
        IncrementalMode::On => &[true],
        IncrementalMode::Off => &[false],
        IncrementalMode::Both => &[true, false],
    };
    let mut rows = Vec::new();
    for &m in &args.sweep_m {
        let config = KitchenConfig {
            obstacles: m,
            ..args.kitchen.config()
        };
        let problem = build_kitchen(&config).map_err(|e| e.to_string())?;
        for &h in &args.sweep_h {
            for &incremental in modes {
                let mut solver = args.solver.clone();
                solver.no_incremental = !incremental;
                let backend = solver.backend()?;
                if matches!(backend, Backend::Enumerative) && !incremental {
                    continue;
                }
                let synth = SynthesisConfig {
                    horizon: h,
                    memoize: args.memoize,
                    validate: true,
                    record_trace: false,
                };
                let outcome = synthesis_run(&problem.model, &problem.initial, &problem.objective, &backend, &synth);
                if let Some(e) = &outcome.error {
                    warn!(m, h, incremental, "run failed: {e}");
                }
                rows.push(stats_row(&problem, Some(&config), h, &backend, &outcome));
            }
        }
    }
    write_rows(&rows, args.stats_out.as_deref())?;
    Ok(EXIT_OK)
}

fn cmd_export(args: &ExportArgs) -> Result<i32, String> {
    let problem = load_problem(&args.problem)?;
    let (model, objective) = problem_to_json(&problem);
    write(&args.out_model, &serde_json::to_string_pretty(&model).expect("json"))?;
    write(
        &args.out_objective,
        &serde_json::to_string_pretty(&objective).expect("json"),
    )?;
    Ok(EXIT_OK)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}
