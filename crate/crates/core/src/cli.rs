//! The `hybrid-nas` command line.
//!
//! Exit codes: 0 success, 1 I/O or other runtime failure, 2 bad flags or
//! invalid input, 3 evaluator failure, 4 no candidate satisfies the search
//! constraints.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineError, LocalSearchParams};
use crate::cost_model::{table1, HardwareProfile, TABLE1_INPUT};
use crate::evaluator::{
    analyze, evaluate_proxy, ConstantEvaluator, CostSummary, Evaluator, ExternalEvaluator, Message,
    ObjectivePair, ProxyEvaluator, ProxyParams, PROTOCOL_VERSION,
};
use crate::export::{unix_now, write_atomic, ExportRun, FrontExport, RunManifest};
use crate::nsga2::{self, Nsga2Error, Nsga2Params};
use crate::rng::derive_seed;
use crate::search_space::{validate, BranchFilter, Genome, OpKind, SearchSpaceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_EVALUATOR: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    /// Which step failed, e.g. `load space` or `search 2-branch`.
    pub stage: String,
    pub message: String,
}

impl CliError {
    fn new(code: i32, stage: impl Into<String>, message: impl fmt::Display) -> Self {
        CliError {
            code,
            stage: stage.into(),
            message: message.to_string(),
        }
    }

    fn usage(stage: impl Into<String>, message: impl fmt::Display) -> Self {
        CliError::new(EXIT_USAGE, stage, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hybrid-nas",
    version,
    about = "Multi-objective search over hybrid conv/attention segmentation networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run constrained NSGA-II and write the front export and a manifest.
    Search(SearchArgs),
    /// Report the analytic cost of one genome, or the operator comparison table.
    Cost(CostArgs),
    /// Run a baseline search in the same export format.
    Baseline(BaselineArgs),
    /// Kendall's tau and Pearson's r between two id,value files.
    Correlate(CorrelateArgs),
    /// Re-run a search or baseline from its manifest.
    Replay(ReplayArgs),
    /// Scripted evaluator speaking the wire protocol on stdin/stdout.
    #[command(hide = true)]
    MockEvaluator(MockArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Space config file, or `toy` / `default`.
    #[arg(long, default_value = "default")]
    space: String,
    /// Hardware profile file, or `unit`.
    #[arg(long, default_value = "unit")]
    profile: String,
    /// `proxy`, `exec:<command>` or `const:<score>`.
    #[arg(long, default_value = "proxy")]
    evaluator: EvaluatorSpec,
    /// External evaluator processes.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Seconds to wait for one external evaluation.
    #[arg(long, default_value_t = 300.0)]
    timeout: f64,
    /// Uniform noise amplitude of the proxy score.
    #[arg(long, default_value_t = 0.0)]
    proxy_epsilon: f64,
    /// Master seed; generated and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Front export (JSON).
    #[arg(long, default_value = "front.json")]
    out: PathBuf,
    /// Scatter data (CSV), one row per evaluated candidate.
    #[arg(long)]
    scatter: Option<PathBuf>,
    /// Run manifest; defaults to `<out stem>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Machine-readable summary on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 40)]
    pop: usize,
    #[arg(long, default_value_t = 20)]
    gens: usize,
    /// Crossover probability.
    #[arg(long, default_value_t = 0.9)]
    pc: f64,
    /// Per-gene mutation probability (default: one over the mutable genes).
    #[arg(long)]
    mutation_rate: Option<f64>,
    /// `1`, `2`, `3`, `any` (one unfiltered run) or `all` (three runs).
    #[arg(long, default_value = "all")]
    branches: Branches,
    #[arg(long, default_value = "latency")]
    objectives: ObjectivePair,
    /// Latency cap in ms.
    #[arg(long)]
    lat_cap: Option<f64>,
    /// Offspring must score above this.
    #[arg(long)]
    score_min: Option<f64>,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
}

#[derive(Args, Debug)]
struct CostArgs {
    /// Genome JSON file.
    #[arg(long, required_unless_present = "table1", conflicts_with = "table1")]
    genome: Option<PathBuf>,
    /// Operator comparison on a 1x256x32x64 input.
    #[arg(long)]
    table1: bool,
    #[arg(long, default_value = "default")]
    space: String,
    #[arg(long, default_value = "unit")]
    profile: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(subcommand)]
    kind: BaselineKind,
}

#[derive(Subcommand, Debug)]
enum BaselineKind {
    /// Distinct prior-biased samples.
    Random(RandomArgs),
    /// Single-edit hill climbing from several starting points.
    Local(LocalArgs),
}

#[derive(Args, Debug)]
struct RandomArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "any")]
    branches: Branches,
    #[arg(long, default_value = "latency")]
    objectives: ObjectivePair,
}

#[derive(Args, Debug)]
struct LocalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long, default_value_t = 32)]
    iters: usize,
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    #[arg(long, default_value = "any")]
    branches: Branches,
    #[arg(long, default_value = "flops")]
    objectives: ObjectivePair,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(value_name = "MANIFEST")]
    from: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct MockArgs {
    #[arg(long, default_value = "toy")]
    space: String,
    #[arg(long, default_value = "unit")]
    profile: String,
    #[arg(long, default_value = "cells")]
    rule: MockRule,
    #[arg(long, value_enum, default_value_t = Fault::None)]
    fault: Fault,
    /// Requests answered normally before the fault kicks in.
    #[arg(long, default_value_t = 0)]
    fault_after: usize,
    /// Also send the analytic latency estimate as a measurement.
    #[arg(long)]
    report_latency: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Fault {
    None,
    WrongId,
    Garbage,
    Crash,
    Hang,
    BadVersion,
}

/// Where scores come from.
#[derive(Clone, Debug, PartialEq)]
pub enum EvaluatorSpec {
    Proxy,
    Exec(String),
    Const(f64),
}

impl FromStr for EvaluatorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "proxy" {
            Ok(EvaluatorSpec::Proxy)
        } else if let Some(cmd) = s.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                return Err("exec: needs a command".into());
            }
            Ok(EvaluatorSpec::Exec(cmd.to_string()))
        } else if let Some(v) = s.strip_prefix("const:") {
            v.parse()
                .map(EvaluatorSpec::Const)
                .map_err(|e| format!("const:{v}: {e}"))
        } else {
            Err(format!(
                "unknown evaluator '{s}' (proxy|exec:<command>|const:<score>)"
            ))
        }
    }
}

impl fmt::Display for EvaluatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluatorSpec::Proxy => f.write_str("proxy"),
            EvaluatorSpec::Exec(cmd) => write!(f, "exec:{cmd}"),
            EvaluatorSpec::Const(v) => write!(f, "const:{v}"),
        }
    }
}

/// Branch setting(s) to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branches {
    Exactly(u8),
    Any,
    All,
}

impl Branches {
    /// `(label, filter)` per independent run.
    pub fn runs(self) -> Vec<(String, BranchFilter)> {
        match self {
            Branches::Exactly(b) => vec![(format!("{b}-branch"), Some(b))],
            Branches::Any => vec![("any".to_string(), None)],
            Branches::All => (1..=3).map(|b| (format!("{b}-branch"), Some(b))).collect(),
        }
    }
}

impl FromStr for Branches {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "2" | "3" => Ok(Branches::Exactly(s.parse().unwrap())),
            "any" => Ok(Branches::Any),
            "all" => Ok(Branches::All),
            other => Err(format!("unknown branch setting '{other}' (1|2|3|any|all)")),
        }
    }
}

/// Scoring rules of the mock evaluator.
#[derive(Clone, Debug, PartialEq)]
pub enum MockRule {
    /// Saturating in GMACs.
    Flops,
    /// Counts operator cells, attention worth double.
    Cells,
    /// The analytic proxy without noise.
    Proxy,
    Const(f64),
}

impl FromStr for MockRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flops" => Ok(MockRule::Flops),
            "cells" => Ok(MockRule::Cells),
            "proxy" => Ok(MockRule::Proxy),
            _ => match s.strip_prefix("const:") {
                Some(v) => v
                    .parse()
                    .map(MockRule::Const)
                    .map_err(|e| format!("const:{v}: {e}")),
                None => Err(format!(
                    "unknown rule '{s}' (flops|cells|proxy|const:<score>)"
                )),
            },
        }
    }
}

impl MockRule {
    pub fn score(
        &self,
        genome: &Genome,
        summary: &CostSummary,
        config: &SearchSpaceConfig,
        profile: &HardwareProfile,
    ) -> f64 {
        match self {
            MockRule::Flops => 100.0 * (1.0 - (-summary.cost.flops_g() / 20.0).exp()),
            MockRule::Cells => {
                let conv = summary.ir.count(OpKind::LightweightConv) as f64;
                let attn = summary.ir.count(OpKind::MemEffSelfAttention) as f64;
                (5.0 * conv + 10.0 * attn).min(100.0)
            }
            MockRule::Proxy => evaluate_proxy(genome, config, profile, &ProxyParams::default(), 0)
                .map(|o| o.score)
                .unwrap_or(0.0),
            MockRule::Const(v) => *v,
        }
    }
}

/// Evaluator settings that do not change results but are recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub proxy_epsilon: f64,
    pub workers: usize,
    pub timeout_s: f64,
}

/// A fully resolved command, stored in the manifest for replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "job", rename_all = "snake_case")]
pub enum Job {
    Search {
        branches: Branches,
        /// `seed` and `branches` are set per run.
        nsga2: Nsga2Params,
    },
    RandomBaseline {
        n: usize,
        branches: Branches,
        objectives: ObjectivePair,
    },
    LocalSearch {
        branches: Branches,
        local: LocalSearchParams,
    },
}

impl Job {
    fn command(&self) -> &'static str {
        match self {
            Job::Search { .. } => "search",
            Job::RandomBaseline { .. } => "baseline random",
            Job::LocalSearch { .. } => "baseline local",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ManifestParams {
    eval: EvalOptions,
    #[serde(flatten)]
    job: Job,
}

struct Plan {
    config: SearchSpaceConfig,
    profile: HardwareProfile,
    space_source: String,
    profile_source: String,
    evaluator: EvaluatorSpec,
    eval: EvalOptions,
    seed: u64,
    job: Job,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Search(a) => cmd_search(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Replay(a) => cmd_replay(a),
        Command::MockEvaluator(a) => cmd_mock(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn read_file(path: &Path, stage: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(stage, format!("{}: {e}", path.display())))
}

pub fn load_space(source: &str) -> Result<SearchSpaceConfig, CliError> {
    match source {
        "toy" => Ok(SearchSpaceConfig::toy()),
        "default" => Ok(SearchSpaceConfig::default()),
        path => SearchSpaceConfig::from_json(&read_file(Path::new(path), "load space")?)
            .map_err(|e| CliError::usage("load space", format!("{path}: {e}"))),
    }
}

pub fn load_profile(source: &str) -> Result<HardwareProfile, CliError> {
    match source {
        "unit" => Ok(HardwareProfile::unit()),
        path => HardwareProfile::from_json(&read_file(Path::new(path), "load profile")?)
            .map_err(|e| CliError::usage("load profile", format!("{path}: {e}"))),
    }
}

fn plan(common: CommonArgs, job: Job) -> Result<Plan, CliError> {
    let config = load_space(&common.space)?;
    let profile = load_profile(&common.profile)?;
    if common.workers == 0 {
        return Err(CliError::usage("arguments", "--workers must be at least 1"));
    }
    if !(common.timeout > 0.0) {
        return Err(CliError::usage("arguments", "--timeout must be positive"));
    }
    let seed = common.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s} (generated; pass --seed {s} to repeat)");
        s
    });
    Ok(Plan {
        config,
        profile,
        space_source: common.space,
        profile_source: common.profile,
        evaluator: common.evaluator,
        eval: EvalOptions {
            proxy_epsilon: common.proxy_epsilon,
            workers: common.workers,
            timeout_s: common.timeout,
        },
        seed,
        job,
    })
}

fn build_evaluator(plan: &Plan) -> Result<Box<dyn Evaluator>, CliError> {
    Ok(match &plan.evaluator {
        EvaluatorSpec::Proxy => {
            let mut e = ProxyEvaluator::new(plan.config.clone(), plan.profile.clone());
            e.params.epsilon = plan.eval.proxy_epsilon;
            Box::new(e)
        }
        EvaluatorSpec::Const(v) => Box::new(ConstantEvaluator::new(*v)),
        EvaluatorSpec::Exec(cmd) => Box::new(
            ExternalEvaluator::spawn(
                cmd,
                plan.eval.workers,
                Duration::from_secs_f64(plan.eval.timeout_s),
                plan.config.clone(),
                plan.profile.clone(),
            )
            .map_err(|e| CliError::new(EXIT_EVALUATOR, "start evaluator", e))?,
        ),
    })
}

fn check_branches(config: &SearchSpaceConfig, branches: Branches) -> Result<(), CliError> {
    for (label, b) in branches.runs() {
        if let Some(b) = b {
            if !config.branch_supported(b) {
                return Err(CliError::usage(
                    "arguments",
                    format!(
                        "{label} runs need more layers than the space has ({})",
                        config.num_layers
                    ),
                ));
            }
        }
    }
    Ok(())
}

fn baseline_error(stage: &str, e: BaselineError) -> CliError {
    let code = match e {
        BaselineError::Eval(_) => EXIT_EVALUATOR,
        BaselineError::InvalidParams(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    };
    CliError::new(code, stage, e)
}

fn execute(plan: &Plan) -> Result<FrontExport, CliError> {
    let evaluator = build_evaluator(plan)?;
    let mut export = FrontExport::default();
    match &plan.job {
        Job::Search { branches, nsga2 } => {
            check_branches(&plan.config, *branches)?;
            for (label, b) in branches.runs() {
                let stage = format!("search {label}");
                let params = Nsga2Params {
                    branches: b,
                    seed: derive_seed(plan.seed, b.unwrap_or(0) as u64),
                    ..nsga2.clone()
                };
                let archive = nsga2::search(&plan.config, &plan.profile, &params, &evaluator)
                    .map_err(|e| {
                        let code = match e {
                            Nsga2Error::InvalidParams(_) => EXIT_USAGE,
                            Nsga2Error::InfeasibleSpace(_) => EXIT_INFEASIBLE,
                            Nsga2Error::EvaluatorFailure { .. } => EXIT_EVALUATOR,
                        };
                        CliError::new(code, stage, e)
                    })?;
                export
                    .runs
                    .push(ExportRun::from_archive(label, b, &archive));
            }
        }
        Job::RandomBaseline {
            n,
            branches,
            objectives,
        } => {
            check_branches(&plan.config, *branches)?;
            for (label, b) in branches.runs() {
                let seed = derive_seed(plan.seed, b.unwrap_or(0) as u64);
                let archive =
                    baselines::random_baseline(&plan.config, *n, b, *objectives, &evaluator, seed)
                        .map_err(|e| baseline_error(&format!("random baseline {label}"), e))?;
                export
                    .runs
                    .push(ExportRun::from_archive(label, b, &archive));
            }
        }
        Job::LocalSearch { branches, local } => {
            check_branches(&plan.config, *branches)?;
            for (label, b) in branches.runs() {
                let params = LocalSearchParams {
                    branches: b,
                    ..local.clone()
                };
                let seed = derive_seed(plan.seed, b.unwrap_or(0) as u64);
                let outcome = baselines::local_search(&plan.config, &params, &evaluator, seed)
                    .map_err(|e| baseline_error(&format!("local search {label}"), e))?;
                export
                    .runs
                    .push(ExportRun::from_archive(label, b, &outcome.pool));
            }
        }
    }
    Ok(export)
}

fn manifest_path(output: &OutputArgs) -> PathBuf {
    output.manifest.clone().unwrap_or_else(|| {
        let stem = output
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        output.out.with_file_name(format!("{stem}.manifest.json"))
    })
}

fn run_plan(plan: Plan, output: &OutputArgs) -> Result<(), CliError> {
    let started = unix_now();
    let export = execute(&plan)?;
    let finished = unix_now();

    let write = |path: &Path, bytes: &[u8]| {
        write_atomic(path, bytes).map_err(|e| {
            CliError::new(
                EXIT_FAILURE,
                "write output",
                format!("{}: {e}", path.display()),
            )
        })
    };
    let mut outputs = vec![output.out.display().to_string()];
    write(&output.out, export.to_json().as_bytes())?;
    if let Some(scatter) = &output.scatter {
        write(scatter, export.scatter_csv().as_bytes())?;
        outputs.push(scatter.display().to_string());
    }
    let manifest_file = manifest_path(output);
    outputs.push(manifest_file.display().to_string());
    let stats = export.runs.iter().map(|r| &r.stats);
    let manifest = RunManifest {
        command: plan.job.command().to_string(),
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        space_source: plan.space_source.clone(),
        profile_source: plan.profile_source.clone(),
        space: plan.config.clone(),
        profile: plan.profile.clone(),
        evaluator: plan.evaluator.to_string(),
        params: serde_json::to_value(ManifestParams {
            eval: plan.eval.clone(),
            job: plan.job.clone(),
        })
        .expect("params serialize"),
        seed: plan.seed,
        started_unix_s: started,
        finished_unix_s: finished,
        evaluations: stats.clone().map(|s| s.evaluations).sum(),
        retries: stats
            .map(|s| s.cap_rejections + s.floor_rejections + s.duplicate_rejections)
            .sum(),
        outputs,
    };
    write(&manifest_file, manifest.to_json().as_bytes())?;
    // a closed stdout (e.g. piped into head) is not an error
    let _ = std::io::stdout()
        .lock()
        .write_all(summary(&export, &output.out, output.json).as_bytes());
    Ok(())
}

fn summary(export: &FrontExport, out: &Path, json: bool) -> String {
    use std::fmt::Write as _;
    let mut text = String::new();
    if json {
        let runs: Vec<_> = export
            .runs
            .iter()
            .map(|r| {
                let front: Vec<_> = r
                    .front_candidates()
                    .map(|c| {
                        serde_json::json!({
                            "id": c.id,
                            "score": c.objectives.score,
                            "latency_ms": c.objectives.latency_ms,
                            "flops_g": c.objectives.flops_g,
                            "params_m": c.objectives.params_m,
                        })
                    })
                    .collect();
                serde_json::json!({
                    "label": r.label,
                    "complete": r.complete,
                    "stats": r.stats,
                    "top_k": r.top_k,
                    "front": front,
                })
            })
            .collect();
        let v = serde_json::json!({ "out": out.display().to_string(), "runs": runs });
        return serde_json::to_string_pretty(&v).expect("summary serializes") + "\n";
    }
    for r in &export.runs {
        let st = &r.stats;
        writeln!(text,
            "{}: {} evaluations ({} initial, {} offspring), {} cap / {} floor / {} duplicate rejections",
            r.label,
            st.evaluations,
            st.init_evaluations,
            st.offspring_evaluations,
            st.cap_rejections,
            st.floor_rejections,
            st.duplicate_rejections
        ).unwrap();
        writeln!(
            text,
            "  {:>6} {:>4} {:>8} {:>11} {:>9} {:>9}",
            "id", "gen", "score", "latency_ms", "flops_g", "params_m"
        )
        .unwrap();
        let mut front: Vec<_> = r.front_candidates().collect();
        front.sort_by(|a, b| {
            r.objectives
                .cost(&a.objectives)
                .total_cmp(&r.objectives.cost(&b.objectives))
        });
        for c in front {
            let o = &c.objectives;
            let mark = if r.top_k.contains(&c.id) { "*" } else { " " };
            writeln!(
                text,
                "{mark} {:>6} {:>4} {:>8.3} {:>11.3} {:>9.3} {:>9.3}",
                c.id, c.generation, o.score, o.latency_ms, o.flops_g, o.params_m
            )
            .unwrap();
        }
    }
    writeln!(text, "wrote {}", out.display()).unwrap();
    text
}

fn cmd_search(a: SearchArgs) -> Result<(), CliError> {
    let nsga2 = Nsga2Params {
        population_size: a.pop,
        generations: a.gens,
        crossover_prob: a.pc,
        mutation_rate: a.mutation_rate,
        latency_cap: a.lat_cap,
        score_min: a.score_min,
        objectives: a.objectives,
        seed: 0,
        top_k: a.top_k,
        branches: None,
        ..Nsga2Params::default()
    };
    nsga2
        .validate()
        .map_err(|e| CliError::usage("arguments", e))?;
    let plan = plan(
        a.common,
        Job::Search {
            branches: a.branches,
            nsga2,
        },
    )?;
    run_plan(plan, &a.output)
}

fn cmd_baseline(a: BaselineArgs) -> Result<(), CliError> {
    match a.kind {
        BaselineKind::Random(r) => {
            let job = Job::RandomBaseline {
                n: r.n,
                branches: r.branches,
                objectives: r.objectives,
            };
            run_plan(plan(r.common, job)?, &r.output)
        }
        BaselineKind::Local(l) => {
            let job = Job::LocalSearch {
                branches: l.branches,
                local: LocalSearchParams {
                    seeds: l.seeds,
                    iterations: l.iters,
                    neighbors: l.neighbors,
                    objectives: l.objectives,
                    branches: None,
                },
            };
            run_plan(plan(l.common, job)?, &l.output)
        }
    }
}

fn cmd_replay(a: ReplayArgs) -> Result<(), CliError> {
    let text = read_file(&a.from, "load manifest")?;
    let manifest = RunManifest::from_json(&text)
        .map_err(|e| CliError::usage("load manifest", format!("{}: {e}", a.from.display())))?;
    let params: ManifestParams = serde_json::from_value(manifest.params.clone())
        .map_err(|e| CliError::usage("load manifest", format!("params: {e}")))?;
    if params.job.command() != manifest.command {
        return Err(CliError::usage(
            "load manifest",
            format!(
                "command '{}' does not match its parameters",
                manifest.command
            ),
        ));
    }
    let evaluator = manifest
        .evaluator
        .parse()
        .map_err(|e| CliError::usage("load manifest", e))?;
    let plan = Plan {
        config: manifest.space,
        profile: manifest.profile,
        space_source: manifest.space_source,
        profile_source: manifest.profile_source,
        evaluator,
        eval: params.eval,
        seed: manifest.seed,
        job: params.job,
    };
    run_plan(plan, &a.output)
}

fn cmd_cost(a: CostArgs) -> Result<(), CliError> {
    let config = load_space(&a.space)?;
    let profile = load_profile(&a.profile)?;
    if a.table1 {
        let rows = table1(config.attention_bottleneck);
        if a.json {
            let v: Vec<_> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "operator": r.name,
                        "complexity": r.complexity,
                        "flops_g": r.flops_g(),
                        "params_m": r.params_m(),
                        "peak_mem_mb": profile.training_mb(r.cost.act_mem),
                        "est_latency_ms": r.latency_ms(&profile),
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&v).expect("rows serialize")
            );
        } else {
            let (c, h, w) = TABLE1_INPUT;
            println!(
                "input 1x{c}x{h}x{w}, attention bottleneck {}",
                config.attention_bottleneck
            );
            println!(
                "{:<32} {:<10} {:>8} {:>9} {:>12} {:>15}",
                "operator", "complexity", "flops_g", "params_m", "peak_mem_mb", "est_latency_ms"
            );
            for r in &rows {
                println!(
                    "{:<32} {:<10} {:>8.3} {:>9.3} {:>12.3} {:>15.3}",
                    r.name,
                    r.complexity,
                    r.flops_g(),
                    r.params_m(),
                    profile.training_mb(r.cost.act_mem),
                    r.latency_ms(&profile)
                );
            }
        }
        return Ok(());
    }
    let path = a.genome.expect("clap requires --genome without --table1");
    let genome = Genome::from_json(&read_file(&path, "load genome")?)
        .map_err(|e| CliError::usage("load genome", format!("{}: {e}", path.display())))?;
    let violations = validate(&genome, &config);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| format!("  - {v}")).collect();
        return Err(CliError::usage(
            "validate genome",
            format!("invalid genome\n{}", list.join("\n")),
        ));
    }
    let summary =
        analyze(&genome, &config, &profile).map_err(|e| CliError::usage("analyze genome", e))?;
    let mut by_kind: BTreeMap<OpKind, (usize, u64, u64)> = BTreeMap::new();
    for e in &summary.cost.per_op {
        let slot = by_kind.entry(e.kind).or_default();
        slot.0 += 1;
        slot.1 += e.cost.flops;
        slot.2 += e.cost.params;
    }
    let peak_mem_mb = summary.memory.required_mb;
    if a.json {
        let breakdown: Vec<_> = by_kind
            .iter()
            .map(|(k, (n, f, p))| serde_json::json!({"kind": k, "count": n, "flops": f, "params": p}))
            .collect();
        let v = serde_json::json!({
            "flops_g": summary.cost.flops_g(),
            "params_m": summary.cost.params_m(),
            "peak_mem_mb": peak_mem_mb,
            "est_latency_ms": summary.latency_ms,
            "memory_ok": summary.memory.pass,
            "breakdown": breakdown,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&v).expect("report serializes")
        );
    } else {
        println!(
            "{:<24} {:>5} {:>10} {:>10}",
            "kind", "count", "flops_g", "params_m"
        );
        for (k, (n, f, p)) in &by_kind {
            let name = serde_json::to_value(k).expect("kind serializes");
            println!(
                "{:<24} {:>5} {:>10.4} {:>10.4}",
                name.as_str().unwrap_or_default(),
                n,
                *f as f64 / 1e9,
                *p as f64 / 1e6
            );
        }
        println!("flops_g         {:.4}", summary.cost.flops_g());
        println!("params_m        {:.4}", summary.cost.params_m());
        println!("peak_mem_mb     {peak_mem_mb:.3}");
        println!("est_latency_ms  {:.4}", summary.latency_ms);
        if !summary.memory.pass {
            println!(
                "memory budget exceeded by {:.3} MB",
                summary.memory.excess_mb()
            );
        }
    }
    Ok(())
}

fn cmd_correlate(a: CorrelateArgs) -> Result<(), CliError> {
    let stage = "correlate";
    let err = |e: BaselineError| CliError::usage(stage, e);
    let x = baselines::read_values(&a.a).map_err(err)?;
    let y = baselines::read_values(&a.b).map_err(err)?;
    let (x, y) = baselines::align(&x, &y).map_err(err)?;
    let tau = baselines::kendall_tau_b(&x, &y).map_err(err)?;
    let rho = baselines::pearson_r(&x, &y).map_err(err)?;
    if a.json {
        println!(
            "{}",
            serde_json::json!({"n": x.len(), "tau": tau, "rho": rho})
        );
    } else {
        println!("n    {}", x.len());
        println!("tau  {tau:.4}");
        println!("rho  {rho:.4}");
    }
    Ok(())
}

fn cmd_mock(a: MockArgs) -> Result<(), CliError> {
    let config = load_space(&a.space)?;
    let profile = load_profile(&a.profile)?;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    let io_err = |e: std::io::Error| CliError::new(EXIT_FAILURE, "mock evaluator", e);
    let mut send = |line: String| -> Result<(), CliError> {
        writeln!(stdout, "{line}").map_err(io_err)?;
        stdout.flush().map_err(io_err)
    };
    let mut served = 0;
    for line in stdin.lock().lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let msg =
            Message::parse(&line).map_err(|e| CliError::new(EXIT_FAILURE, "mock evaluator", e))?;
        match msg {
            Message::Hello { .. } => {
                let version = if a.fault == Fault::BadVersion {
                    PROTOCOL_VERSION + 98
                } else {
                    PROTOCOL_VERSION
                };
                send(Message::Hello { version }.to_line())?;
            }
            Message::Eval { id, genome, .. } => {
                let fault = if served >= a.fault_after {
                    a.fault
                } else {
                    Fault::None
                };
                served += 1;
                match fault {
                    Fault::Garbage => {
                        send("this is not json".to_string())?;
                        continue;
                    }
                    Fault::Crash => std::process::exit(EXIT_FAILURE),
                    Fault::Hang => loop {
                        std::thread::sleep(Duration::from_secs(60));
                    },
                    _ => {}
                }
                let (score, latency) = match analyze(&genome, &config, &profile) {
                    Ok(s) => (
                        a.rule.score(&genome, &s, &config, &profile),
                        Some(s.latency_ms),
                    ),
                    Err(_) => (0.0, None),
                };
                let reply = Message::Result {
                    id: if fault == Fault::WrongId { id + 1 } else { id },
                    score,
                    latency_ms: if a.report_latency { latency } else { None },
                    peak_mem_mb: None,
                };
                send(reply.to_line())?;
            }
            Message::Shutdown => return Ok(()),
            Message::Result { .. } => {
                return Err(CliError::new(
                    EXIT_FAILURE,
                    "mock evaluator",
                    "received a result message",
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluator_specs() {
        assert_eq!(
            "proxy".parse::<EvaluatorSpec>().unwrap(),
            EvaluatorSpec::Proxy
        );
        assert_eq!(
            "exec:python3 -m toy".parse::<EvaluatorSpec>().unwrap(),
            EvaluatorSpec::Exec("python3 -m toy".into())
        );
        assert_eq!(
            "const:50".parse::<EvaluatorSpec>().unwrap(),
            EvaluatorSpec::Const(50.0)
        );
        assert!("exec:".parse::<EvaluatorSpec>().is_err());
        assert!("oracle".parse::<EvaluatorSpec>().is_err());
        for s in ["proxy", "exec:./ev --fast", "const:12.5"] {
            assert_eq!(s.parse::<EvaluatorSpec>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn branch_settings() {
        assert_eq!("all".parse::<Branches>().unwrap().runs().len(), 3);
        assert_eq!(
            "2".parse::<Branches>().unwrap().runs(),
            vec![("2-branch".to_string(), Some(2))]
        );
        assert_eq!(
            "any".parse::<Branches>().unwrap().runs(),
            vec![("any".to_string(), None)]
        );
        assert!("4".parse::<Branches>().is_err());
    }

    #[test]
    fn bad_flags_exit_2_and_help_exits_0() {
        assert_eq!(run(["hybrid-nas", "search", "--pop", "x"]), EXIT_USAGE);
        assert_eq!(run(["hybrid-nas", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["hybrid-nas", "--help"]), EXIT_OK);
        assert_eq!(
            run(["hybrid-nas", "search", "--pop", "3", "--seed", "1"]),
            EXIT_USAGE
        );
    }

    #[test]
    fn manifest_path_defaults_next_to_out() {
        let out = OutputArgs {
            out: PathBuf::from("runs/f.json"),
            scatter: None,
            manifest: None,
            json: false,
        };
        assert_eq!(manifest_path(&out), PathBuf::from("runs/f.manifest.json"));
    }
}
