//! The self-training orchestrator: Grow (sample, execute, reward), filter,
//! Improve, hard-type tracking, evaluation, and resumable run persistence.
//!
//! A run directory holds the effective config, per-iteration checkpoints and
//! trajectory dumps, the run state, and plot-ready metric CSVs. Re-invoking
//! `iterate` on an existing directory resumes from the last completed
//! iteration and, with identical seeds, reproduces the byte-identical run
//! state an uninterrupted run would have produced.

mod export;
mod world;

pub use export::{export_finetune, read_finetune, FinetuneMetadata};
pub use world::World;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::exec::{execute, ExecLimits, ExecOutcome, ExecStatus};
use crate::lang::deriv::Grammar;
use crate::lang::{normalize, parse};
use crate::policy::{
    assemble_prompt, default_api_spec, default_examples, default_gold_bank, improve_mle, nll,
    remote_complete, sample, CloneExample, EndpointConfig, GoldBank, PolicyCheckpoint, PolicyError,
    PromptParams, SampledProgram, SamplePlan,
};
use crate::reward::{mean_std, reward, EvalReport, RewardValue};
use crate::scene::{NoiseParams, Scene, TaskInstance, WorldError};
use crate::util;

pub const STATE_FORMAT_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("insufficient history: need {needed} completed iterations, have {have}")]
    InsufficientHistory { needed: u32, have: u32 },
    #[error("run directory holds a different configuration: {0}")]
    ConfigMismatch(PathBuf),
    #[error("the filtered set is empty")]
    EmptyFilteredSet,
    #[error("iteration {0} is not present in the run state")]
    MissingIteration(u32),
    #[error("corrupt dump {path}: {detail}")]
    CorruptDump { path: PathBuf, detail: String },
    #[error("missing run artifacts: {0}")]
    MissingRunArtifacts(String),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Grammar,
    Remote,
}

/// Everything a training run needs, loadable from TOML with flag overrides
/// applied on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub world_dir: PathBuf,
    pub out_dir: PathBuf,
    pub iterations: u32,
    /// Train tasks drawn per question type (`0` = all in the file).
    pub tasks_per_type: usize,
    /// Sampling passes per task during Grow.
    pub passes_per_task: u32,
    pub temperature: f64,
    pub seed: u64,
    pub corrections: bool,
    /// Gold-structure mixing probability for hard types.
    pub epsilon: f64,
    /// Retention factor mixing previous weights into the update.
    pub lambda: f64,
    /// Smoothing pseudo-count.
    pub alpha: f64,
    pub eval_runs: u32,
    /// Validation tasks per type (`0` = all).
    pub eval_tasks_per_type: usize,
    pub noise: NoiseParams,
    pub policy: PolicyKind,
    pub endpoint: Option<EndpointConfig>,
    /// Gold-bank directory; unset means the built-in bank.
    pub gold_bank_dir: Option<PathBuf>,
    pub q_hard_window: u32,
    /// Worker threads (`0` = logical CPUs).
    pub workers: usize,
    pub limits: ExecLimits,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            world_dir: PathBuf::from("world"),
            out_dir: PathBuf::from("run"),
            iterations: 5,
            tasks_per_type: 0,
            passes_per_task: 1,
            temperature: 0.7,
            seed: 0,
            corrections: false,
            epsilon: 0.5,
            lambda: 0.0,
            alpha: 0.0,
            eval_runs: 5,
            eval_tasks_per_type: 0,
            noise: NoiseParams::default(),
            policy: PolicyKind::Grammar,
            endpoint: None,
            gold_bank_dir: None,
            q_hard_window: 3,
            workers: 0,
            limits: ExecLimits::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.iterations < 1 {
            return Err(RunError::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.passes_per_task < 1 {
            return Err(RunError::InvalidConfig("passes_per_task must be >= 1".into()));
        }
        if self.eval_runs < 1 {
            return Err(RunError::InvalidConfig("eval_runs must be >= 1".into()));
        }
        if self.temperature <= 0.0 {
            return Err(RunError::InvalidConfig("temperature must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(RunError::InvalidConfig("epsilon must be in [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(RunError::InvalidConfig("lambda must be in [0,1]".into()));
        }
        if self.alpha < 0.0 {
            return Err(RunError::InvalidConfig("alpha must be >= 0".into()));
        }
        if self.q_hard_window < 1 {
            return Err(RunError::InvalidConfig("q_hard_window must be >= 1".into()));
        }
        if self.policy == PolicyKind::Remote && self.endpoint.is_none() {
            return Err(RunError::InvalidConfig("remote policy needs an endpoint".into()));
        }
        self.noise.validate()?;
        Ok(())
    }

    /// Stable content hash of the effective configuration. Storage paths are
    /// excluded so a run's identity does not depend on where it lives.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.world_dir = PathBuf::new();
        canonical.out_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        util::hex64(util::fnv1a(json.as_bytes()))
    }
}

/// One sampled, executed, and rewarded program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub question_type: String,
    pub query: String,
    pub iteration: u32,
    pub pass_index: u32,
    pub program: SampledProgram,
    /// Hash of the prompt bytes this sample would be (or was) drawn from;
    /// identical across policy kinds by construction.
    pub prompt_hash: String,
    pub noise_seed: u64,
    pub outcome: ExecOutcome,
    pub reward: u8,
}

/// The reward-1 subset of a Grow batch, order-preserving.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilteredSet {
    pub trajectories: Vec<Trajectory>,
}

impl FilteredSet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

/// Keep exactly the reward-1 trajectories, in order.
pub fn filter(trajectories: &[Trajectory]) -> FilteredSet {
    FilteredSet {
        trajectories: trajectories.iter().filter(|t| t.reward == 1).cloned().collect(),
    }
}

/// Shared immutable context for Grow and evaluation.
pub struct GrowContext<'a> {
    pub grammar: &'a Grammar,
    pub scenes: &'a BTreeMap<String, Scene>,
    pub bank: Option<&'a GoldBank>,
    pub plan: SamplePlan,
    pub prompt_params: PromptParams,
    pub api_spec: &'a str,
    pub noise: NoiseParams,
    pub limits: ExecLimits,
    pub policy: PolicyKind,
    pub endpoint: Option<&'a EndpointConfig>,
    pub workers: usize,
}

impl<'a> GrowContext<'a> {
    fn thread_pool(&self) -> rayon::ThreadPool {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if self.workers > 0 {
            builder = builder.num_threads(self.workers);
        }
        builder.build().expect("worker pool")
    }
}

fn in_context_examples(
    checkpoint: &PolicyCheckpoint,
    task: &TaskInstance,
    corrections: bool,
    bank: Option<&GoldBank>,
) -> Vec<(String, String)> {
    if corrections && checkpoint.q_hard.contains(&task.question_type) {
        if let Some(entry) = bank.and_then(|b| b.entry(&task.question_type)) {
            return vec![(entry.example_query.clone(), entry.program_text.clone())];
        }
    }
    default_examples(task.task_kind)
}

fn failure_program(text: String, seed: u64) -> SampledProgram {
    SampledProgram { text, derivation: None, nll: None, sample_seed: seed }
}

/// Sample, execute, and reward `k` programs per task (pass indices
/// `0..k-1`). Per-trajectory failures (unparseable samples, endpoint
/// errors) become reward-0 trajectories; `grow` itself never fails.
/// Deterministic given the seed; tasks are processed independently.
pub fn grow(
    checkpoint: &PolicyCheckpoint,
    tasks: &[TaskInstance],
    k: u32,
    seed: u64,
    iteration: u32,
    ctx: &GrowContext<'_>,
) -> Vec<Trajectory> {
    let work: Vec<(&TaskInstance, u32)> =
        tasks.iter().flat_map(|t| (0..k).map(move |p| (t, p))).collect();
    let semaphore = util::Semaphore::new(
        ctx.endpoint.map(|e| e.max_in_flight).unwrap_or(1),
    );
    let run_one = |(task, pass): &(&TaskInstance, u32)| -> Trajectory {
        let sample_seed = util::derive_seed(seed, &[&task.id, &pass.to_string()]);
        let examples =
            in_context_examples(checkpoint, task, ctx.plan.corrections, ctx.bank);
        let prompt = assemble_prompt(ctx.api_spec, &examples, task, &ctx.prompt_params)
            .expect("api spec is bundled");
        let prompt_hash = prompt.render_hash();

        let sampled: Result<SampledProgram, String> = match ctx.policy {
            PolicyKind::Grammar => {
                sample(checkpoint, ctx.grammar, task, ctx.bank, &ctx.plan, sample_seed)
                    .map_err(|e| e.to_string())
            }
            PolicyKind::Remote => {
                let endpoint = ctx.endpoint.expect("validated: remote policy has an endpoint");
                let _permit = semaphore.acquire();
                remote_complete(endpoint, &prompt)
                    .map(|text| SampledProgram {
                        text,
                        derivation: None,
                        nll: None,
                        sample_seed,
                    })
                    .map_err(|e| e.to_string())
            }
        };

        let (program, outcome) = match sampled {
            Err(error) => (
                failure_program(String::new(), sample_seed),
                ExecOutcome::parse_failure(error),
            ),
            Ok(mut program) => match parse(&program.text) {
                Err(parse_err) => (program, ExecOutcome::parse_failure(parse_err.to_string())),
                Ok(ast) => {
                    if program.derivation.is_none() {
                        program.derivation = ctx.grammar.derive(&ast).ok();
                        if let Some(d) = &program.derivation {
                            program.nll = nll(checkpoint, ctx.grammar, d, task).ok();
                        }
                    }
                    let outcome = match ctx.scenes.get(&task.scene_ref) {
                        Some(scene) => execute(&ast, scene, &ctx.limits, &ctx.noise),
                        None => ExecOutcome {
                            status: ExecStatus::RuntimeError,
                            result: None,
                            steps_used: 0,
                            error: Some(format!("unknown scene `{}`", task.scene_ref)),
                            trace: None,
                        },
                    };
                    (program, outcome)
                }
            },
        };
        let r = reward(&outcome, task);
        Trajectory {
            task_id: task.id.clone(),
            question_type: task.question_type.clone(),
            query: task.query.clone(),
            iteration,
            pass_index: *pass,
            program,
            prompt_hash,
            noise_seed: ctx.noise.noise_seed,
            outcome,
            reward: r.0,
        }
    };

    if ctx.workers == 1 {
        work.iter().map(run_one).collect()
    } else {
        ctx.thread_pool().install(|| work.par_iter().map(run_one).collect())
    }
}

/// Mean reward per question type over a trajectory batch.
pub fn train_accuracy_per_type(trajectories: &[Trajectory]) -> BTreeMap<String, f64> {
    let mut grouped: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for t in trajectories {
        let slot = grouped.entry(t.question_type.clone()).or_insert((0, 0));
        slot.0 += 1;
        slot.1 += t.reward as usize;
    }
    grouped.into_iter().map(|(k, (n, hits))| (k, hits as f64 / n as f64)).collect()
}

/// Count of distinct normalized syntax trees among the parseable programs.
pub fn unique_normalized_asts(trajectories: &[Trajectory]) -> usize {
    let mut hashes = BTreeSet::new();
    for t in trajectories {
        if let Ok(ast) = parse(&t.program.text) {
            hashes.insert(normalize(&ast).hash);
        }
    }
    hashes.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub checkpoint_file: String,
    /// Empty for the baseline (iteration 0) record.
    pub train_accuracy: BTreeMap<String, f64>,
    pub val_mean: f64,
    pub val_std: f64,
    pub val_per_type: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_macro_f1: Option<f64>,
    pub filtered_size: usize,
    pub unique_asts: usize,
    pub q_hard: Vec<String>,
    #[serde(default)]
    pub improve_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub format_version: String,
    pub config_hash: String,
    pub grammar_version: String,
    pub iterations: Vec<IterationRecord>,
}

impl RunState {
    pub fn record(&self, iteration: u32) -> Option<&IterationRecord> {
        self.iterations.iter().find(|r| r.iteration == iteration)
    }

    pub fn last_iteration(&self) -> Option<u32> {
        self.iterations.iter().map(|r| r.iteration).max()
    }

    pub fn save(&self, path: &Path) -> Result<(), RunError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunState, RunError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// `iteration,split,mean,std` rows for both splits.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("iteration,split,mean,std\n");
        for r in &self.iterations {
            if !r.train_accuracy.is_empty() {
                let values: Vec<f64> = r.train_accuracy.values().copied().collect();
                let (mean, _) = mean_std(&values);
                out.push_str(&format!("{},train,{},\n", r.iteration, mean));
            }
            out.push_str(&format!("{},val,{},{}\n", r.iteration, r.val_mean, r.val_std));
        }
        out
    }

    /// `iteration,split,question_type,accuracy` rows.
    pub fn per_type_csv(&self) -> String {
        let mut out = String::from("iteration,split,question_type,accuracy\n");
        for r in &self.iterations {
            for (t, acc) in &r.train_accuracy {
                out.push_str(&format!("{},train,{t},{acc}\n", r.iteration));
            }
            for (t, acc) in &r.val_per_type {
                out.push_str(&format!("{},val,{t},{acc}\n", r.iteration));
            }
        }
        out
    }
}

/// Question types whose training accuracy strictly decreased over the last
/// `window` transitions: negative least-squares slope and final < initial.
pub fn identify_q_hard(state: &RunState, window: u32) -> Result<BTreeSet<String>, RunError> {
    let records: Vec<&IterationRecord> =
        state.iterations.iter().filter(|r| !r.train_accuracy.is_empty()).collect();
    let needed = window + 1;
    if (records.len() as u32) < needed {
        return Err(RunError::InsufficientHistory { needed, have: records.len() as u32 });
    }
    let tail = &records[records.len() - needed as usize..];
    let mut hard = BTreeSet::new();
    let types: BTreeSet<&String> = tail.iter().flat_map(|r| r.train_accuracy.keys()).collect();
    for t in types {
        let series: Vec<f64> = tail.iter().filter_map(|r| r.train_accuracy.get(t)).copied().collect();
        if series.len() != tail.len() {
            continue;
        }
        let n = series.len() as f64;
        let mean_x = (n - 1.0) / 2.0;
        let mean_y = series.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, y) in series.iter().enumerate() {
            let dx = i as f64 - mean_x;
            num += dx * (y - mean_y);
            den += dx * dx;
        }
        let slope = num / den;
        if slope < 0.0 && series[series.len() - 1] < series[0] {
            hard.insert(t.clone());
        }
    }
    Ok(hard)
}

/// Validation summary over repeated sampling passes with distinct seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub runs: u32,
    pub mean: f64,
    pub std: f64,
    pub per_run: Vec<f64>,
    pub per_type: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_f1: Option<f64>,
}

/// Evaluate a checkpoint: `runs` independent single-pass sampling passes over
/// the task set, each with its own derived seed; reports mean and standard
/// deviation of accuracy across passes.
pub fn evaluate(
    checkpoint: &PolicyCheckpoint,
    tasks: &[TaskInstance],
    runs: u32,
    seed: u64,
    iteration: u32,
    ctx: &GrowContext<'_>,
) -> EvalSummary {
    let mut per_run = Vec::with_capacity(runs as usize);
    let mut per_type_sums: BTreeMap<String, f64> = BTreeMap::new();
    let mut f1_sum = 0.0;
    let mut f1_n = 0u32;
    for run in 0..runs {
        let run_seed = util::derive_seed(seed, &["evalrun", &run.to_string()]);
        let trajectories = grow(checkpoint, tasks, 1, run_seed, iteration, ctx);
        let results: Vec<(&TaskInstance, &ExecOutcome, RewardValue)> = tasks
            .iter()
            .zip(&trajectories)
            .map(|(task, t)| (task, &t.outcome, RewardValue(t.reward)))
            .collect();
        let report = EvalReport::from_results(&results);
        per_run.push(report.accuracy);
        for (t, acc) in report.per_type {
            *per_type_sums.entry(t).or_insert(0.0) += acc.accuracy;
        }
        if let Some(f1) = report.macro_f1 {
            f1_sum += f1;
            f1_n += 1;
        }
    }
    let (mean, std) = mean_std(&per_run);
    EvalSummary {
        runs,
        mean,
        std,
        per_run,
        per_type: per_type_sums.into_iter().map(|(k, v)| (k, v / runs as f64)).collect(),
        macro_f1: if f1_n > 0 { Some(f1_sum / f1_n as f64) } else { None },
    }
}

/// Deterministic per-type subsample: the first `n` tasks of each type in
/// file order (`0` keeps everything).
pub fn subsample_per_type(tasks: &[TaskInstance], n: usize) -> Vec<TaskInstance> {
    if n == 0 {
        return tasks.to_vec();
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    tasks
        .iter()
        .filter(|t| {
            let count = seen.entry(t.question_type.clone()).or_insert(0);
            *count += 1;
            *count <= n
        })
        .cloned()
        .collect()
}

pub fn trajectories_to_jsonl(trajectories: &[Trajectory]) -> Result<String, RunError> {
    let mut out = String::new();
    for t in trajectories {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn trajectories_from_jsonl(text: &str) -> Result<Vec<Trajectory>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

fn checkpoint_file_name(iteration: u32) -> String {
    format!("checkpoints/ckpt-{iteration:04}.json")
}

fn trajectory_file_name(iteration: u32) -> String {
    format!("trajectories/iter-{iteration:04}.jsonl")
}

/// Run (or resume) a full self-training loop per the config, persisting the
/// run state, checkpoints, trajectory dumps, and metric CSVs after every
/// iteration.
pub fn iterate(config: &RunConfig) -> Result<RunState, RunError> {
    iterate_with_progress(config, |_| {})
}

/// [`iterate`] with a per-iteration callback, invoked after each record
/// (including the baseline) is persisted.
pub fn iterate_with_progress(
    config: &RunConfig,
    mut progress: impl FnMut(&IterationRecord),
) -> Result<RunState, RunError> {
    config.validate()?;
    let world = World::load(&config.world_dir)?;
    let grammar = Grammar::new(&world.config.taxonomy);
    let bank_storage;
    let bank: Option<&GoldBank> = if config.corrections {
        bank_storage = match &config.gold_bank_dir {
            Some(dir) => GoldBank::load(dir, &grammar, &world.config.taxonomy)?,
            None => default_gold_bank(&grammar, &world.config.taxonomy)?,
        };
        Some(&bank_storage)
    } else {
        None
    };

    let train_tasks = subsample_per_type(&world.train, config.tasks_per_type);
    let val_tasks = subsample_per_type(&world.val, config.eval_tasks_per_type);
    if train_tasks.is_empty() || val_tasks.is_empty() {
        return Err(RunError::InvalidConfig("empty train or validation task set".into()));
    }

    let out = &config.out_dir;
    std::fs::create_dir_all(out.join("checkpoints"))?;
    std::fs::create_dir_all(out.join("trajectories"))?;
    let config_hash = config.content_hash();
    let state_path = out.join("state.json");

    let mut state = if state_path.exists() {
        let state = RunState::load(&state_path)?;
        if state.config_hash != config_hash {
            return Err(RunError::ConfigMismatch(out.clone()));
        }
        state
    } else {
        // Echo the effective configuration into the run directory.
        let toml_text = toml::to_string_pretty(config)
            .map_err(|e| RunError::InvalidConfig(format!("config does not serialize: {e}")))?;
        std::fs::write(out.join("config.toml"), toml_text)?;
        RunState {
            format_version: STATE_FORMAT_VERSION.to_string(),
            config_hash: config_hash.clone(),
            grammar_version: grammar.version().to_string(),
            iterations: vec![],
        }
    };

    let ctx = GrowContext {
        grammar: &grammar,
        scenes: &world.scenes,
        bank,
        plan: SamplePlan {
            temperature: config.temperature,
            epsilon: config.epsilon,
            corrections: config.corrections,
        },
        prompt_params: PromptParams { temperature: config.temperature, ..Default::default() },
        api_spec: default_api_spec(),
        noise: config.noise.clone(),
        limits: config.limits.clone(),
        policy: config.policy,
        endpoint: config.endpoint.as_ref(),
        workers: config.workers,
    };

    let persist = |state: &RunState| -> Result<(), RunError> {
        state.save(&state_path)?;
        std::fs::write(out.join("metrics.csv"), state.metrics_csv())?;
        std::fs::write(out.join("per_type.csv"), state.per_type_csv())?;
        Ok(())
    };

    // Baseline: evaluate the uniform initial policy as iteration 0.
    let mut checkpoint = if let Some(last) = state.last_iteration() {
        let record = state.record(last).expect("last iteration exists");
        PolicyCheckpoint::load(&out.join(&record.checkpoint_file))?
    } else {
        let initial = PolicyCheckpoint::initial(&grammar, config.alpha, config.seed, &config_hash);
        initial.save(&out.join(checkpoint_file_name(0)))?;
        let eval = evaluate(
            &initial,
            &val_tasks,
            config.eval_runs,
            util::derive_seed(config.seed, &["eval", "0"]),
            0,
            &ctx,
        );
        state.iterations.push(IterationRecord {
            iteration: 0,
            checkpoint_file: checkpoint_file_name(0),
            train_accuracy: BTreeMap::new(),
            val_mean: eval.mean,
            val_std: eval.std,
            val_per_type: eval.per_type,
            val_macro_f1: eval.macro_f1,
            filtered_size: 0,
            unique_asts: 0,
            q_hard: vec![],
            improve_skipped: 0,
        });
        persist(&state)?;
        progress(state.iterations.last().expect("baseline just pushed"));
        initial
    };

    let start = state.last_iteration().unwrap_or(0) + 1;
    for iteration in start..=config.iterations {
        let grow_seed = util::derive_seed(config.seed, &["iter", &iteration.to_string()]);
        let trajectories =
            grow(&checkpoint, &train_tasks, config.passes_per_task, grow_seed, iteration, &ctx);
        std::fs::write(
            out.join(trajectory_file_name(iteration)),
            trajectories_to_jsonl(&trajectories)?,
        )?;

        let train_accuracy = train_accuracy_per_type(&trajectories);
        let filtered = filter(&trajectories);
        let unique_asts = unique_normalized_asts(&trajectories);

        // Hard types are identified from the training-accuracy history
        // including this iteration; the set steers the *next* Grow.
        let q_hard = {
            let mut probe = state.clone();
            probe.iterations.push(IterationRecord {
                iteration,
                checkpoint_file: String::new(),
                train_accuracy: train_accuracy.clone(),
                val_mean: 0.0,
                val_std: 0.0,
                val_per_type: BTreeMap::new(),
                val_macro_f1: None,
                filtered_size: 0,
                unique_asts: 0,
                q_hard: vec![],
                improve_skipped: 0,
            });
            identify_q_hard(&probe, config.q_hard_window).unwrap_or_default()
        };

        let examples: Vec<CloneExample> = filtered
            .trajectories
            .iter()
            .map(|t| CloneExample {
                question_type: &t.question_type,
                query: &t.query,
                derivation: t.program.derivation.as_ref(),
            })
            .collect();
        let (mut next, improve_stats) =
            improve_mle(&checkpoint, &grammar, &examples, config.alpha, config.lambda)?;
        next.iteration = iteration;
        next.q_hard = q_hard.clone();
        next.gold_bank_ref = config
            .gold_bank_dir
            .as_ref()
            .map(|p| p.display().to_string())
            .or_else(|| if config.corrections { Some("builtin".to_string()) } else { None });
        next.save(&out.join(checkpoint_file_name(iteration)))?;

        let eval = evaluate(
            &next,
            &val_tasks,
            config.eval_runs,
            util::derive_seed(config.seed, &["eval", &iteration.to_string()]),
            iteration,
            &ctx,
        );

        state.iterations.push(IterationRecord {
            iteration,
            checkpoint_file: checkpoint_file_name(iteration),
            train_accuracy,
            val_mean: eval.mean,
            val_std: eval.std,
            val_per_type: eval.per_type,
            val_macro_f1: eval.macro_f1,
            filtered_size: filtered.len(),
            unique_asts,
            q_hard: q_hard.iter().cloned().collect(),
            improve_skipped: improve_stats.skipped,
        });
        persist(&state)?;
        progress(state.iterations.last().expect("record just pushed"));
        checkpoint = next;
    }

    Ok(state)
}
