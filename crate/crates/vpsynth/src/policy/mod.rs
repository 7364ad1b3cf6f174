//! The program generator: a trainable query-conditioned weighted-grammar
//! policy, an external completion-endpoint policy, and the prompt machinery
//! shared by both.
//!
//! The grammar policy samples a template production per question-type
//! context, then fills each slot by first choosing a *source* (tokens
//! extracted from the query vs. the taxonomy at large) and then a token
//! uniformly within that source. Because every choice is a plain categorical
//! with disjoint supports, the reward-filtered maximum-likelihood update has
//! the closed-form count solution that `improve_mle` implements.

mod goldbank;
mod prompt;
mod remote;

pub use goldbank::{default_gold_bank, GoldBank, GoldEntry};
pub use prompt::{
    assemble_prompt, default_api_spec, default_examples, instruction_text, PromptBundle,
    PromptParams, INSTRUCTION_HEADER,
};
pub use remote::{extract_function, remote_complete, EndpointConfig, RemoteError};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lang::deriv::{Derivation, Grammar, SlotFiller, SlotKind, NT_BODY, NT_PROGRAM};
use crate::lang::pretty_print;
use crate::scene::TaskInstance;
use crate::util;

pub const CHECKPOINT_FORMAT_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("no production has positive weight for context `{context}`")]
    EmptyGrammarContext { context: String },
    #[error("grammar version mismatch: derivation has {derivation}, checkpoint has {checkpoint}")]
    GrammarVersionMismatch { derivation: String, checkpoint: String },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("prompt assembly: api spec is missing or empty")]
    MissingApiSpec,
    #[error("gold bank: {0}")]
    GoldBank(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Source weights for one slot kind: query-extracted tokens vs. taxonomy
/// tokens. Tokens are uniform within a source, so these two numbers are the
/// only trainable slot parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceWeights {
    pub query: f64,
    pub taxonomy: f64,
}

impl SourceWeights {
    fn uniform() -> SourceWeights {
        SourceWeights { query: 1.0, taxonomy: 1.0 }
    }
}

/// Production weights for one question-type context, indexed by template id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextWeights {
    pub body: Vec<f64>,
}

impl ContextWeights {
    fn uniform() -> ContextWeights {
        ContextWeights { body: vec![1.0; Grammar::template_count()] }
    }
}

/// All trainable parameters of the grammar policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarWeights {
    pub grammar_version: String,
    /// Smoothing pseudo-count the weights were built with.
    pub alpha: f64,
    pub default_context: ContextWeights,
    pub contexts: BTreeMap<String, ContextWeights>,
    /// Keyed by slot kind name.
    pub slot_sources: BTreeMap<String, SourceWeights>,
}

impl GrammarWeights {
    pub fn uniform(grammar: &Grammar, alpha: f64) -> GrammarWeights {
        let slot_sources = SlotKind::all()
            .iter()
            .map(|k| (k.name().to_string(), SourceWeights::uniform()))
            .collect();
        GrammarWeights {
            grammar_version: grammar.version().to_string(),
            alpha,
            default_context: ContextWeights::uniform(),
            contexts: BTreeMap::new(),
            slot_sources,
        }
    }

    pub fn context(&self, question_type: &str) -> &ContextWeights {
        self.contexts.get(question_type).unwrap_or(&self.default_context)
    }

    pub fn sources(&self, kind: SlotKind) -> SourceWeights {
        self.slot_sources.get(kind.name()).cloned().unwrap_or_else(SourceWeights::uniform)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

/// Versioned policy parameters plus the hard-question set and gold-bank
/// reference carried between iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub format_version: String,
    pub iteration: u32,
    pub weights: GrammarWeights,
    pub q_hard: BTreeSet<String>,
    pub gold_bank_ref: Option<String>,
    pub provenance: Provenance,
}

impl PolicyCheckpoint {
    pub fn initial(grammar: &Grammar, alpha: f64, seed: u64, config_hash: &str) -> PolicyCheckpoint {
        PolicyCheckpoint {
            format_version: CHECKPOINT_FORMAT_VERSION.to_string(),
            iteration: 0,
            weights: GrammarWeights::uniform(grammar, alpha),
            q_hard: BTreeSet::new(),
            gold_bank_ref: None,
            provenance: Provenance { seed, config_hash: config_hash.to_string() },
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PolicyCheckpoint, PolicyError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Query tokens usable as slot fillers, per slot kind, in query order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryTokens {
    per_kind: BTreeMap<SlotKind, Vec<String>>,
}

impl QueryTokens {
    pub fn for_kind(&self, kind: SlotKind) -> &[String] {
        self.per_kind.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Whitespace/punctuation tokenization with a taxonomy-membership filter;
/// plural nouns match their singular vocabulary entry. Sub-question
/// candidates are derived from attribute names or values mentioned in the
/// query.
pub fn extract_query_tokens(query: &str, grammar: &Grammar) -> QueryTokens {
    let words: Vec<String> = query
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_ascii_lowercase())
        .collect();

    let mut per_kind: BTreeMap<SlotKind, Vec<String>> = BTreeMap::new();
    let mut push = |kind: SlotKind, value: &str| {
        let list = per_kind.entry(kind).or_default();
        if !list.iter().any(|v| v == value) {
            list.push(value.to_string());
        }
    };

    let match_vocab = |word: &str, vocab: &[String]| -> Option<String> {
        if vocab.iter().any(|v| v == word) {
            return Some(word.to_string());
        }
        let singular = word.strip_suffix('s')?;
        if vocab.iter().any(|v| v == singular) {
            return Some(singular.to_string());
        }
        None
    };

    for word in &words {
        for kind in
            [SlotKind::ObjectName, SlotKind::AttrValue, SlotKind::Direction, SlotKind::Extreme, SlotKind::Group]
        {
            if let Some(token) = match_vocab(word, grammar.slot_vocab(kind)) {
                push(kind, &token);
            }
        }
    }

    // A sub-question is hinted when the attribute's name or any of its
    // values occurs in the query.
    for (attr_name, values) in grammar.attributes() {
        let hinted = words.iter().any(|w| w == attr_name)
            || words.iter().any(|w| values.iter().any(|v| v == w));
        if hinted {
            let question = format!("What is the {attr_name}?");
            if grammar.slot_vocab(SlotKind::Question).contains(&question) {
                push(SlotKind::Question, &question);
            }
        }
    }

    QueryTokens { per_kind }
}

/// How one slot value decomposes into grammar choices for a given task.
struct SlotSupport {
    query: Vec<String>,
    taxonomy: Vec<String>,
}

impl SlotSupport {
    fn build(kind: SlotKind, tokens: &QueryTokens, grammar: &Grammar) -> SlotSupport {
        let query: Vec<String> = tokens.for_kind(kind).to_vec();
        let taxonomy: Vec<String> = grammar
            .slot_vocab(kind)
            .iter()
            .filter(|v| !query.iter().any(|q| q == *v))
            .cloned()
            .collect();
        SlotSupport { query, taxonomy }
    }

    /// Negative log-probability of a filler value, and its source.
    fn nll_of(&self, value: &str, sources: &SourceWeights) -> Option<(f64, Source)> {
        let in_query = self.query.iter().any(|v| v == value);
        let in_taxonomy = self.taxonomy.iter().any(|v| v == value);
        if !in_query && !in_taxonomy {
            return None;
        }
        let source = if in_query { Source::Query } else { Source::Taxonomy };
        let forced = self.query.is_empty() || self.taxonomy.is_empty();
        let source_nll = if forced {
            0.0
        } else {
            let total = sources.query + sources.taxonomy;
            let w = match source {
                Source::Query => sources.query,
                Source::Taxonomy => sources.taxonomy,
            };
            if w <= 0.0 || total <= 0.0 {
                return Some((f64::INFINITY, source));
            }
            -(w / total).ln()
        };
        let support = match source {
            Source::Query => self.query.len(),
            Source::Taxonomy => self.taxonomy.len(),
        };
        Some((source_nll + (support as f64).ln(), source))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Query,
    Taxonomy,
}

/// One program drawn from a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledProgram {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivation: Option<Derivation>,
    /// Negative log-probability under the sampling policy, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nll: Option<f64>,
    pub sample_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub temperature: f64,
    /// Mixing probability for gold-structure mutation on hard types.
    pub epsilon: f64,
    pub corrections: bool,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan { temperature: 0.7, epsilon: 0.5, corrections: false }
    }
}

fn tempered_choice(rng: &mut impl Rng, weights: &[f64], temperature: f64) -> Option<usize> {
    let max_log = weights
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| w.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    if max_log == f64::NEG_INFINITY {
        return None;
    }
    let probs: Vec<f64> = weights
        .iter()
        .map(|w| if *w > 0.0 { ((w.ln() - max_log) / temperature).exp() } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        draw -= p;
        if draw <= 0.0 && *p > 0.0 {
            return Some(i);
        }
    }
    probs.iter().rposition(|p| *p > 0.0)
}

/// Sample a program for a task. Deterministic given all arguments.
///
/// Grammar path: a tempered draw of the template production for the task's
/// question-type context, then slot fillers drawn source-first. With
/// corrections enabled and the task's type in `Q_hard`, the sample is (with
/// probability epsilon) a structure-preserving mutation of the gold-bank
/// derivation: production choices are kept, slot fillers are resampled.
pub fn sample(
    checkpoint: &PolicyCheckpoint,
    grammar: &Grammar,
    task: &TaskInstance,
    bank: Option<&GoldBank>,
    plan: &SamplePlan,
    seed: u64,
) -> Result<SampledProgram, PolicyError> {
    if plan.temperature <= 0.0 {
        return Err(PolicyError::InvalidParam(format!(
            "temperature must be positive, got {}",
            plan.temperature
        )));
    }
    let mut rng = util::rng_from_seed(seed);
    let tokens = extract_query_tokens(&task.query, grammar);

    let gold_template: Option<u32> =
        if plan.corrections && checkpoint.q_hard.contains(&task.question_type) {
            bank.and_then(|b| b.entry(&task.question_type)).and_then(|entry| {
                if rng.gen::<f64>() < plan.epsilon {
                    entry.derivation.template_id()
                } else {
                    None
                }
            })
        } else {
            None
        };

    let template_id = match gold_template {
        Some(id) => id,
        None => {
            let ctx = checkpoint.weights.context(&task.question_type);
            let idx = tempered_choice(&mut rng, &ctx.body, plan.temperature).ok_or_else(|| {
                PolicyError::EmptyGrammarContext { context: task.question_type.clone() }
            })?;
            idx as u32
        }
    };

    let info = Grammar::template(template_id)
        .ok_or_else(|| PolicyError::InvalidParam(format!("bad template id {template_id}")))?;
    let mut fillers: Vec<SlotFiller> = Vec::with_capacity(info.slots.len());
    for kind in info.slots {
        let support = SlotSupport::build(*kind, &tokens, grammar);
        let pool = if support.query.is_empty() {
            &support.taxonomy
        } else if support.taxonomy.is_empty() {
            &support.query
        } else {
            let sources = checkpoint.weights.sources(*kind);
            let pick =
                tempered_choice(&mut rng, &[sources.query, sources.taxonomy], plan.temperature)
                    .ok_or_else(|| PolicyError::EmptyGrammarContext {
                        context: format!("slot {}", kind.name()),
                    })?;
            if pick == 0 {
                &support.query
            } else {
                &support.taxonomy
            }
        };
        if pool.is_empty() {
            return Err(PolicyError::EmptyGrammarContext {
                context: format!("slot {}", kind.name()),
            });
        }
        let value = pool[rng.gen_range(0..pool.len())].clone();
        fillers.push(SlotFiller { kind: *kind, value });
    }

    let derivation = Derivation {
        grammar_version: grammar.version().to_string(),
        steps: vec![(NT_PROGRAM.to_string(), 0), (NT_BODY.to_string(), template_id)],
        fillers,
    };
    let program = grammar
        .replay(&derivation)
        .map_err(|e| PolicyError::InvalidParam(format!("replay failed: {e}")))?;
    let text = pretty_print(&program);
    let nll_value = nll(checkpoint, grammar, &derivation, task)?;
    Ok(SampledProgram { text, derivation: Some(derivation), nll: Some(nll_value), sample_seed: seed })
}

/// Negative log-likelihood of a derivation under the checkpoint: the sum of
/// per-step `-log P(choice | context)` over production and slot choices.
/// Infinite when any chosen production has zero weight or a filler is outside
/// the vocabulary.
pub fn nll(
    checkpoint: &PolicyCheckpoint,
    grammar: &Grammar,
    derivation: &Derivation,
    task: &TaskInstance,
) -> Result<f64, PolicyError> {
    if derivation.grammar_version != checkpoint.weights.grammar_version {
        return Err(PolicyError::GrammarVersionMismatch {
            derivation: derivation.grammar_version.clone(),
            checkpoint: checkpoint.weights.grammar_version.clone(),
        });
    }
    let mut total = 0.0f64;
    for (nonterminal, production) in &derivation.steps {
        match nonterminal.as_str() {
            // Single-production nonterminal: probability 1, contribution 0.
            NT_PROGRAM => {}
            NT_BODY => {
                let ctx = checkpoint.weights.context(&task.question_type);
                let w = ctx.body.get(*production as usize).copied().unwrap_or(0.0);
                let sum: f64 = ctx.body.iter().filter(|w| **w > 0.0).sum();
                if w <= 0.0 || sum <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                total += -(w / sum).ln();
            }
            other => {
                return Err(PolicyError::InvalidParam(format!("unknown nonterminal `{other}`")))
            }
        }
    }
    let tokens = extract_query_tokens(&task.query, grammar);
    for filler in &derivation.fillers {
        let support = SlotSupport::build(filler.kind, &tokens, grammar);
        let sources = checkpoint.weights.sources(filler.kind);
        match support.nll_of(&filler.value, &sources) {
            Some((v, _)) => total += v,
            None => return Ok(f64::INFINITY),
        }
    }
    Ok(total)
}

/// Aggregate counts extracted from a reward-1 trajectory set.
#[derive(Debug, Default, Clone)]
struct ImproveCounts {
    /// question_type -> per-production counts.
    contexts: BTreeMap<String, Vec<f64>>,
    /// slot kind -> (query source count, taxonomy source count).
    sources: BTreeMap<SlotKind, (f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImproveStats {
    /// Entries skipped because they carry no derivation, a mismatched
    /// grammar version, or out-of-vocabulary fillers.
    pub skipped: usize,
    pub used: usize,
    /// Set when the filtered set was empty and the checkpoint was returned
    /// unchanged.
    pub empty_filtered_set: bool,
}

/// One reward-1 entry for the improve step: the derivation plus the task
/// context it was sampled for.
pub struct CloneExample<'a> {
    pub question_type: &'a str,
    pub query: &'a str,
    pub derivation: Option<&'a Derivation>,
}

/// Behavioral cloning on the filtered set: new production weights are
/// `lambda * old + alpha + count`, and likewise for the slot-source tables.
/// With `alpha = 0, lambda = 0` this is exactly the NLL minimizer over the
/// filtered set among all weight assignments. Contexts and slot kinds with
/// no observations keep their previous weights.
pub fn improve_mle(
    checkpoint: &PolicyCheckpoint,
    grammar: &Grammar,
    examples: &[CloneExample<'_>],
    alpha: f64,
    lambda: f64,
) -> Result<(PolicyCheckpoint, ImproveStats), PolicyError> {
    if alpha < 0.0 {
        return Err(PolicyError::InvalidParam(format!("alpha must be >= 0, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(PolicyError::InvalidParam(format!("lambda must be in [0,1], got {lambda}")));
    }
    let mut stats = ImproveStats::default();
    if examples.is_empty() {
        stats.empty_filtered_set = true;
        let mut unchanged = checkpoint.clone();
        unchanged.iteration += 1;
        return Ok((unchanged, stats));
    }

    let mut counts = ImproveCounts::default();
    'outer: for example in examples {
        let Some(derivation) = example.derivation else {
            stats.skipped += 1;
            continue;
        };
        if derivation.grammar_version != checkpoint.weights.grammar_version {
            stats.skipped += 1;
            continue;
        }
        let Some(template_id) = derivation.template_id() else {
            stats.skipped += 1;
            continue;
        };
        if template_id as usize >= Grammar::template_count() {
            stats.skipped += 1;
            continue;
        }
        // Validate every filler before committing any count.
        let tokens = extract_query_tokens(example.query, grammar);
        let mut source_hits: Vec<(SlotKind, Source)> = Vec::with_capacity(derivation.fillers.len());
        for filler in &derivation.fillers {
            let support = SlotSupport::build(filler.kind, &tokens, grammar);
            let in_query = support.query.iter().any(|v| v == &filler.value);
            let in_taxonomy = support.taxonomy.iter().any(|v| v == &filler.value);
            if !in_query && !in_taxonomy {
                stats.skipped += 1;
                continue 'outer;
            }
            // Forced-source steps carry no trainable choice.
            if !support.query.is_empty() && !support.taxonomy.is_empty() {
                let source = if in_query { Source::Query } else { Source::Taxonomy };
                source_hits.push((filler.kind, source));
            }
        }

        let ctx = counts
            .contexts
            .entry(example.question_type.to_string())
            .or_insert_with(|| vec![0.0; Grammar::template_count()]);
        ctx[template_id as usize] += 1.0;
        for (kind, source) in source_hits {
            let slot = counts.sources.entry(kind).or_insert((0.0, 0.0));
            match source {
                Source::Query => slot.0 += 1.0,
                Source::Taxonomy => slot.1 += 1.0,
            }
        }
        stats.used += 1;
    }

    let mut weights = checkpoint.weights.clone();
    weights.alpha = alpha;
    for (question_type, ctx_counts) in counts.contexts {
        let old = checkpoint.weights.context(&question_type).clone();
        let body: Vec<f64> = ctx_counts
            .iter()
            .zip(&old.body)
            .map(|(count, old_w)| lambda * old_w + alpha + count)
            .collect();
        weights.contexts.insert(question_type, ContextWeights { body });
    }
    for (kind, (q, t)) in counts.sources {
        let old = checkpoint.weights.sources(kind);
        weights.slot_sources.insert(
            kind.name().to_string(),
            SourceWeights {
                query: lambda * old.query + alpha + q,
                taxonomy: lambda * old.taxonomy + alpha + t,
            },
        );
    }

    let next = PolicyCheckpoint {
        format_version: CHECKPOINT_FORMAT_VERSION.to_string(),
        iteration: checkpoint.iteration + 1,
        weights,
        q_hard: checkpoint.q_hard.clone(),
        gold_bank_ref: checkpoint.gold_bank_ref.clone(),
        provenance: checkpoint.provenance.clone(),
    };
    Ok((next, stats))
}
