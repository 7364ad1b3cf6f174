//! Binary reward for the three task families, plus the evaluation metrics
//! (accuracy, Macro-F1) used in reports.
//!
//! The reward is 1 iff the execution finished OK and the task-kind comparator
//! accepts the result; parse errors, runtime errors, step-limit hits, and
//! mismatches are all 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::exec::{ExecOutcome, ExecStatus, RuntimeValue};
use crate::scene::{BBox, TaskInstance, TaskKind};

/// A task annotation: text for VQA/ITM, boxes for detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Answer {
    Text(String),
    Boxes(Vec<BBox>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardValue(pub u8);

impl RewardValue {
    pub const ZERO: RewardValue = RewardValue(0);
    pub const ONE: RewardValue = RewardValue(1);

    pub fn is_hit(&self) -> bool {
        self.0 == 1
    }

    pub fn as_f64(&self) -> f64 {
        self.0 as f64
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no results to aggregate")]
    EmptyResults,
}

/// Normalize an answer string: trim, case-fold, collapse internal whitespace.
fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Stringify a runtime value the way answers are compared: booleans map to
/// yes/no, integers to decimal, integral floats to decimal. Patches, lists,
/// images, and none are not answer-convertible.
fn stringify(v: &RuntimeValue) -> Option<String> {
    match v {
        RuntimeValue::Str(s) => Some(s.clone()),
        RuntimeValue::Bool(b) => Some(crate::exec::bool_to_yesno(*b).to_string()),
        RuntimeValue::Int(i) => Some(i.to_string()),
        RuntimeValue::Float(x) => {
            if x.fract() == 0.0 && x.is_finite() {
                Some(format!("{}", *x as i64))
            } else {
                Some(format!("{x:?}"))
            }
        }
        _ => None,
    }
}

/// String equality after normalization; non-stringifiable values compare
/// false.
pub fn compare_vqa(predicted: &RuntimeValue, gold: &str) -> bool {
    match stringify(predicted) {
        Some(s) => normalize_text(&s) == normalize_text(gold),
        None => false,
    }
}

/// VQA comparison restricted to the binary yes/no label.
pub fn compare_itm(predicted: &RuntimeValue, gold: &str) -> bool {
    compare_vqa(predicted, gold)
}

/// Rectangles as `(left, upper, right, lower)`; predictions may be degenerate.
type Rect = (i64, i64, i64, i64);

fn rect_of_bbox(b: &BBox) -> Rect {
    (b.left, b.upper, b.right, b.lower)
}

fn rect_area(r: &Rect) -> i64 {
    (r.2 - r.0).max(0) * (r.3 - r.1).max(0)
}

fn rect_iou(a: &Rect, b: &Rect) -> f64 {
    let w = (a.2.min(b.2) - a.0.max(b.0)).max(0);
    let h = (a.3.min(b.3) - a.1.max(b.1)).max(0);
    let inter = w * h;
    let union = rect_area(a) + rect_area(b) - inter;
    if union <= 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Extract predicted rectangles from an execution result: a list of patches
/// (the usual program output) or an empty list. Anything else is malformed.
fn predicted_rects(predicted: &RuntimeValue) -> Option<Vec<Rect>> {
    let RuntimeValue::List(items) = predicted else { return None };
    let mut rects = Vec::with_capacity(items.len());
    for item in items {
        match item {
            RuntimeValue::Patch(p) => {
                rects.push((p.region.left, p.region.upper, p.region.right, p.region.lower))
            }
            _ => return None,
        }
    }
    Some(rects)
}

/// Greedy matching by descending IoU, each box used at most once. Returns
/// `(true_positives, false_positives, false_negatives)` at the threshold.
fn greedy_match(predicted: &[Rect], gold: &[Rect], iou_threshold: f64) -> (usize, usize, usize) {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (pi, p) in predicted.iter().enumerate() {
        for (gi, g) in gold.iter().enumerate() {
            let iou = rect_iou(p, g);
            if iou >= iou_threshold {
                pairs.push((pi, gi, iou));
            }
        }
    }
    // Descending IoU; ties broken by index for determinism.
    pairs.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_g = vec![false; gold.len()];
    let mut tp = 0usize;
    for (pi, gi, _) in pairs {
        if !used_p[pi] && !used_g[gi] {
            used_p[pi] = true;
            used_g[gi] = true;
            tp += 1;
        }
    }
    (tp, predicted.len() - tp, gold.len() - tp)
}

/// All-or-nothing detection comparison: every gold box matched at the IoU
/// threshold and no unmatched prediction left over.
pub fn compare_detection(predicted: &RuntimeValue, gold: &[BBox], iou_threshold: f64) -> bool {
    let Some(rects) = predicted_rects(predicted) else { return false };
    let gold_rects: Vec<Rect> = gold.iter().map(rect_of_bbox).collect();
    let (tp, fp, fn_) = greedy_match(&rects, &gold_rects, iou_threshold);
    tp == gold.len() && fp == 0 && fn_ == 0
}

/// Default IoU threshold for the binary detection reward.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// The binary reward: 1 iff the outcome is OK and the task-kind comparator
/// accepts the result.
pub fn reward(outcome: &ExecOutcome, task: &TaskInstance) -> RewardValue {
    if outcome.status != ExecStatus::Ok {
        return RewardValue::ZERO;
    }
    let Some(result) = &outcome.result else { return RewardValue::ZERO };
    let hit = match (&task.gold, task.task_kind) {
        (Answer::Text(gold), TaskKind::Vqa) => compare_vqa(result, gold),
        (Answer::Text(gold), TaskKind::Itm) => compare_itm(result, gold),
        (Answer::Boxes(gold), TaskKind::Detection) => {
            compare_detection(result, gold, DEFAULT_IOU_THRESHOLD)
        }
        // A gold variant that does not match the task kind never rewards.
        _ => false,
    };
    if hit {
        RewardValue::ONE
    } else {
        RewardValue::ZERO
    }
}

/// Per-instance F1 from greedy IoU matching, averaged unweighted over
/// instances (F1 = 0 when there are no true positives).
pub fn macro_f1(
    results: &[(Vec<BBox>, Vec<BBox>)],
    iou_threshold: f64,
) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyResults);
    }
    let mut total = 0.0;
    for (predicted, gold) in results {
        let p: Vec<Rect> = predicted.iter().map(rect_of_bbox).collect();
        let g: Vec<Rect> = gold.iter().map(rect_of_bbox).collect();
        let (tp, fp, fn_) = greedy_match(&p, &g, iou_threshold);
        let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fn_ as f64) };
        total += f1;
    }
    Ok(total / results.len() as f64)
}

/// Evaluation summary over a task set: per-instance rewards, overall and
/// per-type accuracy, and Macro-F1 over the detection slice when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: usize,
    pub rewards: Vec<u8>,
    pub accuracy: f64,
    pub per_type: BTreeMap<String, TypeAccuracy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeAccuracy {
    pub n: usize,
    pub accuracy: f64,
}

impl EvalReport {
    /// Build a report from `(task, outcome, reward)` triples.
    pub fn from_results(results: &[(&TaskInstance, &ExecOutcome, RewardValue)]) -> EvalReport {
        let rewards: Vec<u8> = results.iter().map(|(_, _, r)| r.0).collect();
        let accuracy = if rewards.is_empty() {
            0.0
        } else {
            rewards.iter().map(|r| *r as f64).sum::<f64>() / rewards.len() as f64
        };
        let mut grouped: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for (task, _, r) in results {
            let slot = grouped.entry(task.question_type.clone()).or_insert((0, 0));
            slot.0 += 1;
            slot.1 += r.0 as usize;
        }
        let per_type = grouped
            .into_iter()
            .map(|(t, (n, hits))| (t, TypeAccuracy { n, accuracy: hits as f64 / n as f64 }))
            .collect();

        let detection: Vec<(Vec<BBox>, Vec<BBox>)> = results
            .iter()
            .filter(|(task, _, _)| task.task_kind == TaskKind::Detection)
            .map(|(task, outcome, _)| {
                let predicted = outcome
                    .result
                    .as_ref()
                    .and_then(predicted_rects)
                    .map(|rects| {
                        rects
                            .into_iter()
                            .map(|(l, u, r, lo)| BBox::new(l, u, r, lo))
                            .collect::<Vec<_>>()
                    })
                    .unwrap_or_default();
                let gold = match &task.gold {
                    Answer::Boxes(bs) => bs.clone(),
                    Answer::Text(_) => vec![],
                };
                (predicted, gold)
            })
            .collect();
        let macro_f1 = if detection.is_empty() {
            None
        } else {
            macro_f1(&detection, DEFAULT_IOU_THRESHOLD).ok()
        };
        EvalReport { instances: rewards.len(), rewards, accuracy, per_type, macro_f1 }
    }

    /// Flat per-type CSV: `question_type,n,accuracy`.
    pub fn per_type_csv(&self) -> String {
        let mut out = String::from("question_type,n,accuracy\n");
        for (t, acc) in &self.per_type {
            out.push_str(&format!("{t},{},{}\n", acc.n, acc.accuracy));
        }
        out
    }
}

/// Mean and (population) standard deviation of repeated evaluation runs.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}
