//! Fine-tune dataset export: the reward-1 set as line-delimited
//! instruction/response records, headed by a metadata record that carries
//! the training settings downstream consumers are expected to use.
//!
//! The instruction text of every record is the fixed template with the query
//! substituted, byte-exact; the loss is meant to be applied to program
//! tokens only, which the metadata records as `loss_masking`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{FilteredSet, RunError};
use crate::policy::instruction_text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneMetadata {
    pub record: String,
    /// Full instruction-following template with placeholders.
    pub template: String,
    pub lora_rank: u32,
    pub lora_alpha: u32,
    pub lora_dropout: f64,
    pub lora_targets: String,
    pub optimizer: String,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub lr_schedule: String,
    pub warmup_ratio: f64,
    pub epochs: u32,
    pub loss_masking: String,
}

impl Default for FinetuneMetadata {
    fn default() -> Self {
        FinetuneMetadata {
            record: "metadata".to_string(),
            template: format!("{}\n{{program}}\n</s>", instruction_text("{query}")),
            lora_rank: 16,
            lora_alpha: 32,
            lora_dropout: 0.05,
            lora_targets: "fc1, fc2, k_proj, v_proj, q_proj, out_proj".to_string(),
            optimizer: "AdamW".to_string(),
            batch_size: 4,
            learning_rate: 0.0002,
            lr_schedule: "linear".to_string(),
            warmup_ratio: 0.1,
            epochs: 1,
            loss_masking: "program tokens only".to_string(),
        }
    }
}

/// Write the export file; returns the number of example records.
pub fn export_finetune(filtered: &FilteredSet, path: &Path) -> Result<usize, RunError> {
    if filtered.is_empty() {
        return Err(RunError::EmptyFilteredSet);
    }
    let mut out = String::new();
    out.push_str(&serde_json::to_string(&FinetuneMetadata::default())?);
    out.push('\n');
    for t in &filtered.trajectories {
        let record = json!({
            "record": "example",
            "query": t.query,
            "instruction": instruction_text(&t.query),
            "program": t.program.text,
        });
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(filtered.len())
}

/// Read an export file back into its metadata and `(query, program)` pairs.
pub fn read_finetune(path: &Path) -> Result<(FinetuneMetadata, Vec<(String, String)>), RunError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| RunError::CorruptDump {
        path: path.to_path_buf(),
        detail: "empty export".into(),
    })?;
    let metadata: FinetuneMetadata = serde_json::from_str(header)?;
    let mut examples = Vec::new();
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line)?;
        let query = v["query"].as_str().unwrap_or_default().to_string();
        let program = v["program"].as_str().unwrap_or_default().to_string();
        examples.push((query, program));
    }
    Ok((metadata, examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{ExecOutcome, ExecStatus, RuntimeValue};
    use crate::policy::SampledProgram;
    use crate::selftrain::Trajectory;

    fn trajectory(query: &str, program: &str) -> Trajectory {
        Trajectory {
            task_id: "t0".into(),
            question_type: "exist".into(),
            query: query.into(),
            iteration: 1,
            pass_index: 0,
            program: SampledProgram {
                text: program.into(),
                derivation: None,
                nll: None,
                sample_seed: 7,
            },
            prompt_hash: "0".repeat(16),
            noise_seed: 0,
            outcome: ExecOutcome {
                status: ExecStatus::Ok,
                result: Some(RuntimeValue::Str("yes".into())),
                steps_used: 5,
                error: None,
                trace: None,
            },
            reward: 1,
        }
    }

    #[test]
    fn single_entry_exports_one_data_and_one_metadata_record() {
        let set = FilteredSet {
            trajectories: vec![trajectory(
                "Are there dogs?",
                "def execute_command(image):\n    return \"yes\"\n",
            )],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ft.jsonl");
        let n = export_finetune(&set, &path).unwrap();
        assert_eq!(n, 1);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let (metadata, examples) = read_finetune(&path).unwrap();
        assert_eq!(metadata.lora_rank, 16);
        assert_eq!(metadata.batch_size, 4);
        assert_eq!(metadata.learning_rate, 0.0002);
        assert_eq!(metadata.warmup_ratio, 0.1);
        assert_eq!(metadata.epochs, 1);
        assert_eq!(examples.len(), 1);
        assert_eq!(examples[0].0, "Are there dogs?");
        assert_eq!(examples[0].1, "def execute_command(image):\n    return \"yes\"\n");
    }

    #[test]
    fn instruction_bytes_match_the_template() {
        let set = FilteredSet {
            trajectories: vec![trajectory(
                "What color is the mug?",
                "def execute_command(image):\n    return \"red\"\n",
            )],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ft.jsonl");
        export_finetune(&set, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let data_line = text.lines().nth(1).unwrap();
        let v: serde_json::Value = serde_json::from_str(data_line).unwrap();
        let expected = "<s>Write a function using Python and the ImagePatch class (above) that \
                        could be executed to provide an answer to the query.\n\nConsider the \
                        following guidelines:\n- Use base Python (comparison, sorting) for basic \
                        logical operations, left/right/up/down, math, etc.\n\nQuery: What color \
                        is the mug?\nProgram:";
        assert_eq!(v["instruction"].as_str().unwrap(), expected);
    }

    #[test]
    fn empty_set_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ft.jsonl");
        assert!(matches!(
            export_finetune(&FilteredSet::default(), &path),
            Err(RunError::EmptyFilteredSet)
        ));
    }
}
