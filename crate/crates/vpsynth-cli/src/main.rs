//! Single command-line entry point wiring world generation, program
//! execution, grow/improve/eval/train runs, exports, and analytics.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
//! Every subcommand honors `--seed` and is reproducible end to end. The
//! remote policy reads its bearer token from `REMOTE_POLICY_TOKEN`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use vpsynth::exec::{execute_traced, ExecLimits, NoiseModel};
use vpsynth::lang::deriv::Grammar;
use vpsynth::lang::parse;
use vpsynth::policy::{
    default_gold_bank, improve_mle, CloneExample, EndpointConfig, GoldBank, PolicyCheckpoint,
    PromptParams, SamplePlan,
};
use vpsynth::scene::{question_catalogue, Scene, Taxonomy, WorldConfig};
use vpsynth::selftrain::{
    evaluate, export_finetune, filter, grow, iterate_with_progress, subsample_per_type,
    trajectories_from_jsonl, trajectories_to_jsonl, GrowContext, PolicyKind, RunConfig, RunError,
    Trajectory, World,
};

#[derive(Parser)]
#[command(name = "vpsynth", version, about = "Visual program synthesis on a synthetic scene world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world directory: scenes plus train/val task files.
    GenWorld(GenWorldArgs),
    /// Execute one program file against one scene file.
    Exec(ExecArgs),
    /// Sample, execute, and reward programs for a task split.
    Grow(GrowArgs),
    /// Clone a reward-filtered trajectory dump into a new checkpoint.
    Improve(ImproveArgs),
    /// Evaluate a checkpoint over repeated sampling passes.
    Eval(EvalArgs),
    /// Run the full grow/filter/improve loop with persistence.
    Train(TrainArgs),
    /// Export the reward-1 subset of a dump as a fine-tune dataset.
    ExportFinetune(ExportArgs),
    /// Emit syntactic-analytics CSV tables for a run directory.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct NoiseArgs {
    /// Probability of dropping a true find match.
    #[arg(long, default_value_t = 0.0)]
    find_miss: f64,
    /// Probability of relabeling a non-matching object into find results.
    #[arg(long, default_value_t = 0.0)]
    find_fp: f64,
    /// Probability of corrupting verify_property / simple_query answers.
    #[arg(long, default_value_t = 0.0)]
    query_corrupt: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

impl NoiseArgs {
    fn model(&self) -> NoiseModel {
        NoiseModel {
            find_miss_rate: self.find_miss,
            find_false_positive_rate: self.find_fp,
            query_corruption_rate: self.query_corrupt,
            noise_seed: self.noise_seed,
        }
    }
}

#[derive(Args)]
struct GenWorldArgs {
    #[arg(long)]
    out: PathBuf,
    /// Enable the first N question types of the catalogue.
    #[arg(long)]
    types: Option<usize>,
    /// Explicit comma-separated question types (overrides --types).
    #[arg(long, value_delimiter = ',')]
    type_list: Option<Vec<String>>,
    #[arg(long, default_value_t = 100)]
    per_type: usize,
    #[arg(long, default_value_t = 25)]
    val_per_type: usize,
    /// Scenes per split (train and validation pools are disjoint).
    #[arg(long, default_value_t = 48)]
    scenes: usize,
    #[arg(long, default_value_t = 3)]
    objects_min: usize,
    #[arg(long, default_value_t = 7)]
    objects_max: usize,
    /// Canvas size as WxH.
    #[arg(long, default_value = "100x100")]
    canvas: String,
    #[arg(long, default_value_t = 0.2)]
    max_overlap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Taxonomy JSON file; the built-in taxonomy when omitted.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

#[derive(Args)]
struct ExecArgs {
    #[arg(long)]
    program: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    /// Print one line per API call.
    #[arg(long)]
    trace: bool,
    /// Write the API-call trace as line-delimited JSON.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    max_steps: u64,
    #[arg(long, default_value_t = 10_000)]
    max_list: usize,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, value_enum, default_value = "grammar")]
    policy: PolicyChoice,
    /// Completion endpoint URL (remote policy).
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    endpoint_timeout_ms: u64,
    #[arg(long, default_value_t = 0)]
    endpoint_retries: u32,
    #[arg(long, default_value_t = 4)]
    endpoint_in_flight: usize,
    /// Inject gold-bank structure for hard question types.
    #[arg(long)]
    corrections: bool,
    /// Gold-bank directory; the built-in bank when omitted.
    #[arg(long)]
    gold_bank: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum PolicyChoice {
    Grammar,
    Remote,
}

impl PolicyArgs {
    fn kind(&self) -> PolicyKind {
        match self.policy {
            PolicyChoice::Grammar => PolicyKind::Grammar,
            PolicyChoice::Remote => PolicyKind::Remote,
        }
    }

    fn endpoint_config(&self) -> Option<EndpointConfig> {
        self.endpoint.as_ref().map(|url| EndpointConfig {
            url: url.clone(),
            timeout_ms: self.endpoint_timeout_ms,
            max_retries: self.endpoint_retries,
            max_in_flight: self.endpoint_in_flight,
            ..Default::default()
        })
    }
}

#[derive(Args)]
struct GrowArgs {
    #[arg(long)]
    world: PathBuf,
    /// Policy checkpoint; a fresh uniform initial policy when omitted.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    split: String,
    /// Tasks per question type (0 = all).
    #[arg(long, default_value_t = 0)]
    tasks_per_type: usize,
    #[arg(long, default_value_t = 1)]
    passes: u32,
    #[arg(long, default_value_t = 0.7)]
    temperature: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration label recorded on the trajectories.
    #[arg(long, default_value_t = 1)]
    iteration: u32,
    /// Smoothing pseudo-count for a fresh initial policy.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct ImproveArgs {
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "val")]
    split: String,
    #[arg(long, default_value_t = 0)]
    tasks_per_type: usize,
    #[arg(long, default_value_t = 5)]
    runs: u32,
    #[arg(long, default_value_t = 0.7)]
    temperature: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the evaluation summary as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write per-type accuracy as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML run config; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<u32>,
    #[arg(long)]
    tasks_per_type: Option<usize>,
    #[arg(long)]
    passes: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    corrections: Option<bool>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eval_runs: Option<u32>,
    #[arg(long)]
    eval_tasks_per_type: Option<usize>,
    #[arg(long)]
    find_miss: Option<f64>,
    #[arg(long)]
    find_fp: Option<f64>,
    #[arg(long)]
    query_corrupt: Option<f64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long, value_enum)]
    policy: Option<PolicyChoice>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    gold_bank: Option<PathBuf>,
    #[arg(long)]
    q_hard_window: Option<u32>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    trajectories: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    run: PathBuf,
    /// Output directory; `<run>/analytics` when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors that indicate misuse or bad configuration (exit 1), as opposed to
/// runtime failures (exit 2).
struct UsageError(anyhow::Error);

fn usage<E: Into<anyhow::Error>>(e: E) -> UsageError {
    UsageError(e.into())
}

enum AppError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<UsageError> for AppError {
    fn from(e: UsageError) -> Self {
        AppError::Usage(e.0)
    }
}

impl From<anyhow::Error> for AppError {
    fn from(e: anyhow::Error) -> Self {
        AppError::Runtime(e)
    }
}

impl From<RunError> for AppError {
    fn from(e: RunError) -> Self {
        match &e {
            RunError::InvalidConfig(_) | RunError::ConfigMismatch(_) => {
                AppError::Usage(anyhow!(e.to_string()))
            }
            _ => AppError::Runtime(anyhow!(e.to_string())),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(AppError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::GenWorld(args) => cmd_gen_world(args),
        Command::Exec(args) => cmd_exec(args),
        Command::Grow(args) => cmd_grow(args),
        Command::Improve(args) => cmd_improve(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Train(args) => cmd_train(args),
        Command::ExportFinetune(args) => cmd_export(args),
        Command::Analyze(args) => cmd_analyze(args),
    }
}

fn parse_canvas(s: &str) -> Result<(i64, i64), UsageError> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| usage(anyhow!("--canvas must look like 100x100, got `{s}`")))?;
    let w: i64 = w.parse().map_err(|_| usage(anyhow!("bad canvas width `{w}`")))?;
    let h: i64 = h.parse().map_err(|_| usage(anyhow!("bad canvas height `{h}`")))?;
    Ok((w, h))
}

fn cmd_gen_world(args: GenWorldArgs) -> Result<(), AppError> {
    let taxonomy = match &args.taxonomy {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading taxonomy {}", path.display()))
                .map_err(usage)?;
            let taxonomy: Taxonomy = serde_json::from_str(&text)
                .map_err(|e| usage(anyhow!("invalid taxonomy file: {e}")))?;
            taxonomy.validate().map_err(|e| usage(anyhow!("invalid taxonomy: {e}")))?;
            taxonomy
        }
        None => Taxonomy::default(),
    };
    let question_types: Vec<String> = match (&args.type_list, args.types) {
        (Some(list), _) => list.clone(),
        (None, Some(n)) => question_catalogue().iter().take(n).map(|s| s.to_string()).collect(),
        (None, None) => question_catalogue().iter().map(|s| s.to_string()).collect(),
    };
    let (canvas_width, canvas_height) = parse_canvas(&args.canvas)?;
    let config = WorldConfig {
        taxonomy,
        canvas_width,
        canvas_height,
        objects_min: args.objects_min,
        objects_max: args.objects_max,
        max_overlap: args.max_overlap,
        question_types,
        noise: Default::default(),
        seed: args.seed,
    };
    config.validate().map_err(|e| usage(anyhow!("{e}")))?;
    let world = World::generate(&config, args.scenes, args.per_type, args.val_per_type, args.seed)
        .map_err(|e| anyhow!("world generation failed: {e}"))?;
    world.save(&args.out).map_err(|e| anyhow!("writing world: {e}"))?;
    println!("world written to {}", args.out.display());
    println!("scenes: {}", world.scenes.len());
    println!("train tasks: {}", world.train.len());
    println!("val tasks: {}", world.val.len());
    Ok(())
}

fn cmd_exec(args: ExecArgs) -> Result<(), AppError> {
    let program_text = std::fs::read_to_string(&args.program)
        .with_context(|| format!("reading program {}", args.program.display()))?;
    let scene_text = std::fs::read_to_string(&args.scene)
        .with_context(|| format!("reading scene {}", args.scene.display()))?;
    let scene = Scene::from_json(&scene_text).map_err(|e| anyhow!("invalid scene file: {e}"))?;
    let limits = ExecLimits { max_steps: args.max_steps, max_list_length: args.max_list };

    // Program errors are ordinary output, not process failures.
    match parse(&program_text) {
        Err(e) => {
            println!("status: ParseError");
            println!("error: {e}");
        }
        Ok(ast) => {
            let want_trace = args.trace || args.trace_out.is_some();
            let outcome = execute_traced(&ast, &scene, &limits, &args.noise.model(), want_trace);
            println!("status: {}", outcome.status);
            if let Some(result) = &outcome.result {
                println!("result: {}", result.summary());
            }
            if let Some(error) = &outcome.error {
                println!("error: {error}");
            }
            println!("steps: {}", outcome.steps_used);
            if let Some(trace) = &outcome.trace {
                if args.trace {
                    for entry in trace {
                        println!("{entry}");
                    }
                }
                if let Some(path) = &args.trace_out {
                    let mut out = String::new();
                    for entry in trace {
                        out.push_str(&serde_json::to_string(entry).map_err(|e| anyhow!("{e}"))?);
                        out.push('\n');
                    }
                    std::fs::write(path, out)
                        .with_context(|| format!("writing {}", path.display()))?;
                }
            }
        }
    }
    Ok(())
}

struct LoadedWorld {
    world: World,
    grammar: Grammar,
}

fn load_world(dir: &Path) -> Result<LoadedWorld, AppError> {
    let world =
        World::load(dir).map_err(|e| usage(anyhow!("loading world {}: {e}", dir.display())))?;
    let grammar = Grammar::new(&world.config.taxonomy);
    Ok(LoadedWorld { world, grammar })
}

fn load_bank(
    policy: &PolicyArgs,
    grammar: &Grammar,
    taxonomy: &Taxonomy,
) -> Result<Option<GoldBank>, AppError> {
    if !policy.corrections {
        return Ok(None);
    }
    let bank = match &policy.gold_bank {
        Some(dir) => GoldBank::load(dir, grammar, taxonomy)
            .map_err(|e| usage(anyhow!("loading gold bank: {e}")))?,
        None => default_gold_bank(grammar, taxonomy)
            .map_err(|e| anyhow!("building default gold bank: {e}"))?,
    };
    Ok(Some(bank))
}

fn cmd_grow(args: GrowArgs) -> Result<(), AppError> {
    let LoadedWorld { world, grammar } = load_world(&args.world)?;
    let checkpoint = match &args.checkpoint {
        Some(path) => PolicyCheckpoint::load(path)
            .map_err(|e| usage(anyhow!("loading checkpoint {}: {e}", path.display())))?,
        None => PolicyCheckpoint::initial(&grammar, args.alpha, args.seed, "standalone"),
    };
    let bank = load_bank(&args.policy, &grammar, &world.config.taxonomy)?;
    let endpoint = args.policy.endpoint_config();
    if args.policy.kind() == PolicyKind::Remote && endpoint.is_none() {
        return Err(usage(anyhow!("--policy remote requires --endpoint")).into());
    }
    let tasks = subsample_per_type(world.tasks(&args.split), args.tasks_per_type);
    if tasks.is_empty() {
        return Err(usage(anyhow!("no tasks in split `{}`", args.split)).into());
    }
    let ctx = GrowContext {
        grammar: &grammar,
        scenes: &world.scenes,
        bank: bank.as_ref(),
        plan: SamplePlan {
            temperature: args.temperature,
            epsilon: args.policy.epsilon,
            corrections: args.policy.corrections,
        },
        prompt_params: PromptParams { temperature: args.temperature, ..Default::default() },
        api_spec: vpsynth::policy::default_api_spec(),
        noise: args.noise.model(),
        limits: ExecLimits::default(),
        policy: args.policy.kind(),
        endpoint: endpoint.as_ref(),
        workers: args.workers,
    };
    let trajectories = grow(&checkpoint, &tasks, args.passes, args.seed, args.iteration, &ctx);
    let kept = filter(&trajectories);
    std::fs::write(&args.out, trajectories_to_jsonl(&trajectories).map_err(|e| anyhow!("{e}"))?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("trajectories: {}", trajectories.len());
    println!("reward-1: {}", kept.len());
    println!("written to {}", args.out.display());
    Ok(())
}

fn cmd_improve(args: ImproveArgs) -> Result<(), AppError> {
    let LoadedWorld { grammar, .. } = load_world(&args.world)?;
    let checkpoint = PolicyCheckpoint::load(&args.checkpoint)
        .map_err(|e| usage(anyhow!("loading checkpoint: {e}")))?;
    let text = std::fs::read_to_string(&args.trajectories)
        .with_context(|| format!("reading {}", args.trajectories.display()))?;
    let trajectories: Vec<Trajectory> =
        trajectories_from_jsonl(&text).map_err(|e| anyhow!("corrupt dump: {e}"))?;
    let kept = filter(&trajectories);
    let examples: Vec<CloneExample> = kept
        .trajectories
        .iter()
        .map(|t| CloneExample {
            question_type: &t.question_type,
            query: &t.query,
            derivation: t.program.derivation.as_ref(),
        })
        .collect();
    let (next, stats) = improve_mle(&checkpoint, &grammar, &examples, args.alpha, args.lambda)
        .map_err(|e| anyhow!("improve failed: {e}"))?;
    next.save(&args.out).map_err(|e| anyhow!("writing checkpoint: {e}"))?;
    if stats.empty_filtered_set {
        println!("warning: empty filtered set; checkpoint unchanged");
    }
    println!("cloned: {}", stats.used);
    println!("skipped (out of grammar): {}", stats.skipped);
    println!("checkpoint written to {}", args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), AppError> {
    let LoadedWorld { world, grammar } = load_world(&args.world)?;
    let checkpoint = PolicyCheckpoint::load(&args.checkpoint)
        .map_err(|e| usage(anyhow!("loading checkpoint: {e}")))?;
    let bank = load_bank(&args.policy, &grammar, &world.config.taxonomy)?;
    let endpoint = args.policy.endpoint_config();
    if args.policy.kind() == PolicyKind::Remote && endpoint.is_none() {
        return Err(usage(anyhow!("--policy remote requires --endpoint")).into());
    }
    let tasks = subsample_per_type(world.tasks(&args.split), args.tasks_per_type);
    if tasks.is_empty() {
        return Err(usage(anyhow!("no tasks in split `{}`", args.split)).into());
    }
    let ctx = GrowContext {
        grammar: &grammar,
        scenes: &world.scenes,
        bank: bank.as_ref(),
        plan: SamplePlan {
            temperature: args.temperature,
            epsilon: args.policy.epsilon,
            corrections: args.policy.corrections,
        },
        prompt_params: PromptParams { temperature: args.temperature, ..Default::default() },
        api_spec: vpsynth::policy::default_api_spec(),
        noise: args.noise.model(),
        limits: ExecLimits::default(),
        policy: args.policy.kind(),
        endpoint: endpoint.as_ref(),
        workers: args.workers,
    };
    let summary = evaluate(&checkpoint, &tasks, args.runs, args.seed, checkpoint.iteration, &ctx);
    println!(
        "accuracy: {:.4} +/- {:.4} over {} runs on {} tasks",
        summary.mean,
        summary.std,
        summary.runs,
        tasks.len()
    );
    if let Some(f1) = summary.macro_f1 {
        println!("macro-F1 (detection): {f1:.4}");
    }
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&summary).map_err(|e| anyhow!("{e}"))?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.csv {
        let mut csv = String::from("question_type,accuracy\n");
        for (t, acc) in &summary.per_type {
            csv.push_str(&format!("{t},{acc}\n"));
        }
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), AppError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .map_err(usage)?;
            toml::from_str::<RunConfig>(&text)
                .map_err(|e| usage(anyhow!("invalid config file: {e}")))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = args.world {
        config.world_dir = v;
    }
    if let Some(v) = args.out {
        config.out_dir = v;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.tasks_per_type {
        config.tasks_per_type = v;
    }
    if let Some(v) = args.passes {
        config.passes_per_task = v;
    }
    if let Some(v) = args.temperature {
        config.temperature = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.corrections {
        config.corrections = v;
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.eval_runs {
        config.eval_runs = v;
    }
    if let Some(v) = args.eval_tasks_per_type {
        config.eval_tasks_per_type = v;
    }
    if let Some(v) = args.find_miss {
        config.noise.find_miss_rate = v;
    }
    if let Some(v) = args.find_fp {
        config.noise.find_false_positive_rate = v;
    }
    if let Some(v) = args.query_corrupt {
        config.noise.query_corruption_rate = v;
    }
    if let Some(v) = args.noise_seed {
        config.noise.noise_seed = v;
    }
    if let Some(v) = args.policy {
        config.policy = match v {
            PolicyChoice::Grammar => PolicyKind::Grammar,
            PolicyChoice::Remote => PolicyKind::Remote,
        };
    }
    if let Some(url) = args.endpoint {
        let mut endpoint = config.endpoint.unwrap_or_default();
        endpoint.url = url;
        config.endpoint = Some(endpoint);
    }
    if let Some(v) = args.gold_bank {
        config.gold_bank_dir = Some(v);
    }
    if let Some(v) = args.q_hard_window {
        config.q_hard_window = v;
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }

    let corrections = config.corrections;
    if corrections {
        println!("iter  filtered  unique  val mean    val std  q_hard");
    } else {
        println!("iter  filtered  unique  val mean    val std");
    }
    let state = iterate_with_progress(&config, |record| {
        if corrections {
            println!(
                "{:>4}  {:>8}  {:>6}  {:>8.4}  {:>9.4}  {}",
                record.iteration,
                record.filtered_size,
                record.unique_asts,
                record.val_mean,
                record.val_std,
                record.q_hard.join(",")
            );
        } else {
            println!(
                "{:>4}  {:>8}  {:>6}  {:>8.4}  {:>9.4}",
                record.iteration,
                record.filtered_size,
                record.unique_asts,
                record.val_mean,
                record.val_std
            );
        }
    })?;
    println!("run directory: {}", config.out_dir.display());
    println!("iterations completed: {}", state.last_iteration().unwrap_or(0));
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<(), AppError> {
    let text = std::fs::read_to_string(&args.trajectories)
        .with_context(|| format!("reading {}", args.trajectories.display()))?;
    let trajectories: Vec<Trajectory> =
        trajectories_from_jsonl(&text).map_err(|e| anyhow!("corrupt dump: {e}"))?;
    let kept = filter(&trajectories);
    let n = export_finetune(&kept, &args.out)?;
    println!("exported {n} records to {}", args.out.display());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), AppError> {
    let out = args.out.clone().unwrap_or_else(|| args.run.join("analytics"));
    vpsynth::analytics::analyze_run(&args.run, &out)?;
    println!("analytics written to {}", out.display());
    for name in ["ast_census.csv", "intersections.csv", "type_deltas.csv"] {
        let path = out.join(name);
        if path.exists() {
            println!("  {name}");
        }
    }
    Ok(())
}
