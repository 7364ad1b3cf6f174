//! Syntactic-structure analytics over trajectory dumps: unique
//! normalized-tree counts per iteration, pairwise intersection matrices, and
//! per-type before/after accuracy deltas, all emitted as plot-ready CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::lang::{normalize, parse};
use crate::selftrain::{trajectories_from_jsonl, RunError, RunState};

/// Per-iteration multiset of normalized-tree hashes, plus the count of
/// programs that did not parse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AstCensus {
    pub iterations: Vec<CensusRow>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CensusRow {
    pub iteration: u32,
    /// normalized hash -> occurrence count.
    pub hashes: BTreeMap<u64, usize>,
    pub total: usize,
    pub unparseable: usize,
}

impl CensusRow {
    pub fn unique(&self) -> usize {
        self.hashes.len()
    }
}

impl AstCensus {
    pub fn row(&self, iteration: u32) -> Option<&CensusRow> {
        self.iterations.iter().find(|r| r.iteration == iteration)
    }
}

/// Ingest trajectory dump files. Rows come out ordered by iteration;
/// unparseable programs are counted in their own bucket, never dropped.
pub fn census(dump_files: &[PathBuf]) -> Result<AstCensus, RunError> {
    let mut rows: BTreeMap<u32, CensusRow> = BTreeMap::new();
    for path in dump_files {
        let text = std::fs::read_to_string(path)?;
        let trajectories = trajectories_from_jsonl(&text).map_err(|e| RunError::CorruptDump {
            path: path.clone(),
            detail: e.to_string(),
        })?;
        for t in trajectories {
            let row = rows.entry(t.iteration).or_insert_with(|| CensusRow {
                iteration: t.iteration,
                ..CensusRow::default()
            });
            row.total += 1;
            match parse(&t.program.text) {
                Ok(ast) => {
                    *row.hashes.entry(normalize(&ast).hash).or_insert(0) += 1;
                }
                Err(_) => row.unparseable += 1,
            }
        }
    }
    Ok(AstCensus { iterations: rows.into_values().collect() })
}

/// Symmetric matrix of shared unique normalized trees between iterations;
/// the diagonal holds each iteration's own unique count.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionMatrix {
    pub labels: Vec<u32>,
    pub counts: Vec<Vec<usize>>,
}

pub fn intersections(census: &AstCensus) -> IntersectionMatrix {
    let sets: Vec<(u32, BTreeSet<&u64>)> = census
        .iterations
        .iter()
        .map(|r| (r.iteration, r.hashes.keys().collect()))
        .collect();
    let n = sets.len();
    let mut counts = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in i..n {
            let shared = sets[i].1.intersection(&sets[j].1).count();
            counts[i][j] = shared;
            counts[j][i] = shared;
        }
    }
    IntersectionMatrix { labels: sets.into_iter().map(|(l, _)| l).collect(), counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaSign {
    Improved,
    Worse,
    Neutral,
}

impl DeltaSign {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeltaSign::Improved => "improved",
            DeltaSign::Worse => "worse",
            DeltaSign::Neutral => "neutral",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeDelta {
    pub question_type: String,
    pub baseline: f64,
    pub current: f64,
    pub delta: f64,
    pub sign: DeltaSign,
}

/// Per-type validation accuracy movement between two recorded iterations,
/// sorted by delta, best improvement first.
pub fn type_delta_report(
    state: &RunState,
    baseline_iter: u32,
    final_iter: u32,
) -> Result<Vec<TypeDelta>, RunError> {
    let baseline =
        state.record(baseline_iter).ok_or(RunError::MissingIteration(baseline_iter))?;
    let current = state.record(final_iter).ok_or(RunError::MissingIteration(final_iter))?;
    let types: BTreeSet<&String> =
        baseline.val_per_type.keys().chain(current.val_per_type.keys()).collect();
    let mut rows: Vec<TypeDelta> = types
        .into_iter()
        .map(|t| {
            let b = baseline.val_per_type.get(t).copied().unwrap_or(0.0);
            let c = current.val_per_type.get(t).copied().unwrap_or(0.0);
            let delta = c - b;
            let sign = if delta > 0.0 {
                DeltaSign::Improved
            } else if delta < 0.0 {
                DeltaSign::Worse
            } else {
                DeltaSign::Neutral
            };
            TypeDelta { question_type: t.clone(), baseline: b, current: c, delta, sign }
        })
        .collect();
    rows.sort_by(|a, b| b.delta.partial_cmp(&a.delta).unwrap().then(a.question_type.cmp(&b.question_type)));
    Ok(rows)
}

pub fn census_csv(census: &AstCensus) -> String {
    let mut out = String::from("iteration,unique,total,unparseable\n");
    for row in &census.iterations {
        out.push_str(&format!("{},{},{},{}\n", row.iteration, row.unique(), row.total, row.unparseable));
    }
    out
}

/// Per-form counts with the normalized-tree hash in fixed-width hex.
pub fn forms_csv(census: &AstCensus) -> String {
    let mut out = String::from("iteration,form,count\n");
    for row in &census.iterations {
        for (hash, count) in &row.hashes {
            out.push_str(&format!("{},{},{count}\n", row.iteration, crate::util::hex64(*hash)));
        }
    }
    out
}

pub fn intersections_csv(matrix: &IntersectionMatrix) -> String {
    let mut out = String::from("i,j,count\n");
    for (a, row) in matrix.labels.iter().zip(&matrix.counts) {
        for (b, count) in matrix.labels.iter().zip(row) {
            out.push_str(&format!("{a},{b},{count}\n"));
        }
    }
    out
}

pub fn type_deltas_csv(deltas: &[TypeDelta]) -> String {
    let mut out = String::from("question_type,baseline,final,delta,sign\n");
    for d in deltas {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            d.question_type,
            d.baseline,
            d.current,
            d.delta,
            d.sign.as_str()
        ));
    }
    out
}

/// Emit all analytics artifacts for a run directory into `out_dir`:
/// `ast_census.csv`, `intersections.csv`, and (when the state holds at least
/// a baseline and a final iteration) `type_deltas.csv`.
pub fn analyze_run(run_dir: &Path, out_dir: &Path) -> Result<(), RunError> {
    let traj_dir = run_dir.join("trajectories");
    if !traj_dir.exists() {
        return Err(RunError::MissingRunArtifacts(format!(
            "{} has no trajectories directory",
            run_dir.display()
        )));
    }
    let mut dumps: Vec<PathBuf> = std::fs::read_dir(&traj_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    dumps.sort();
    std::fs::create_dir_all(out_dir)?;
    let census = census(&dumps)?;
    std::fs::write(out_dir.join("ast_census.csv"), census_csv(&census))?;
    std::fs::write(out_dir.join("ast_forms.csv"), forms_csv(&census))?;
    std::fs::write(out_dir.join("intersections.csv"), intersections_csv(&intersections(&census)))?;

    let state_path = run_dir.join("state.json");
    if state_path.exists() {
        let state = RunState::load(&state_path)?;
        let iterations: Vec<u32> = state.iterations.iter().map(|r| r.iteration).collect();
        if let (Some(first), Some(last)) = (iterations.iter().min(), iterations.iter().max()) {
            if first != last {
                let deltas = type_delta_report(&state, *first, *last)?;
                std::fs::write(out_dir.join("type_deltas.csv"), type_deltas_csv(&deltas))?;
            }
        }
    }
    Ok(())
}
