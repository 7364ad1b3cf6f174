//! Bank of correct programs keyed by question type, injected during sampling
//! for hard types.
//!
//! Every entry is validated at load time: the program must parse, must
//! derive under the grammar, and must earn reward 1 on its fixture task with
//! noiseless perception. A built-in bank covering the whole default
//! catalogue ships with the crate; user banks are directories with a
//! manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::exec::{execute, ExecLimits, NoiseModel};
use crate::lang::deriv::{Derivation, Grammar};
use crate::lang::{parse, pretty_print};
use crate::reward::reward;
use crate::scene::{
    oracle_answer, BBox, QuestionSpec, Scene, SceneObject, Side, TaskInstance, Taxonomy,
    FORMAT_VERSION,
};

#[derive(Debug, Clone)]
pub struct GoldEntry {
    pub question_type: String,
    pub program_text: String,
    pub derivation: Derivation,
    /// Query of the fixture task; doubles as the in-context example query.
    pub example_query: String,
    pub fixture_scene: Scene,
    pub fixture_task: TaskInstance,
}

#[derive(Debug, Clone, Default)]
pub struct GoldBank {
    entries: BTreeMap<String, Vec<GoldEntry>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: String,
    entries: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    question_type: String,
    program: String,
    fixture_scene: String,
    fixture_task: String,
}

impl GoldBank {
    pub fn entry(&self, question_type: &str) -> Option<&GoldEntry> {
        self.entries.get(question_type).and_then(|v| v.first())
    }

    pub fn question_types(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn insert_validated(&mut self, grammar: &Grammar, taxonomy: &Taxonomy, entry: GoldEntry) -> Result<(), PolicyError> {
        validate_entry(grammar, taxonomy, &entry)?;
        self.entries.entry(entry.question_type.clone()).or_default().push(entry);
        Ok(())
    }

    /// Load a bank directory (manifest.json plus program and fixture files),
    /// validating every entry.
    pub fn load(dir: &Path, grammar: &Grammar, taxonomy: &Taxonomy) -> Result<GoldBank, PolicyError> {
        let manifest_path = dir.join("manifest.json");
        let manifest: Manifest = serde_json::from_str(
            &std::fs::read_to_string(&manifest_path)
                .map_err(|e| PolicyError::GoldBank(format!("{}: {e}", manifest_path.display())))?,
        )?;
        let mut bank = GoldBank::default();
        for m in manifest.entries {
            let program_text = std::fs::read_to_string(dir.join(&m.program))?;
            let fixture_scene = Scene::from_json(&std::fs::read_to_string(dir.join(&m.fixture_scene))?)?;
            let fixture_task: TaskInstance =
                serde_json::from_str(&std::fs::read_to_string(dir.join(&m.fixture_task))?)?;
            let program = parse(&program_text).map_err(|e| {
                PolicyError::GoldBank(format!("{} does not parse: {e}", m.program))
            })?;
            let derivation = grammar.derive(&program).map_err(|e| {
                PolicyError::GoldBank(format!("{} does not derive: {e}", m.program))
            })?;
            let entry = GoldEntry {
                question_type: m.question_type,
                example_query: fixture_task.query.clone(),
                program_text,
                derivation,
                fixture_scene,
                fixture_task,
            };
            bank.insert_validated(grammar, taxonomy, entry)?;
        }
        Ok(bank)
    }

    /// Materialize the bank as a directory (one program file per entry plus
    /// fixtures and a manifest).
    pub fn write(&self, dir: &Path) -> Result<(), PolicyError> {
        std::fs::create_dir_all(dir.join("programs"))?;
        std::fs::create_dir_all(dir.join("fixtures"))?;
        let mut manifest = Manifest { format_version: FORMAT_VERSION.into(), entries: vec![] };
        for (question_type, entries) in &self.entries {
            for (i, entry) in entries.iter().enumerate() {
                let suffix = if i == 0 { String::new() } else { format!("-{i}") };
                let program = format!("programs/{question_type}{suffix}.py");
                let fixture_scene = format!("fixtures/{question_type}{suffix}.scene.json");
                let fixture_task = format!("fixtures/{question_type}{suffix}.task.json");
                std::fs::write(dir.join(&program), &entry.program_text)?;
                std::fs::write(dir.join(&fixture_scene), entry.fixture_scene.to_json()?)?;
                std::fs::write(dir.join(&fixture_task), serde_json::to_string_pretty(&entry.fixture_task)?)?;
                manifest.entries.push(ManifestEntry {
                    question_type: question_type.clone(),
                    program,
                    fixture_scene,
                    fixture_task,
                });
            }
        }
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

fn validate_entry(grammar: &Grammar, taxonomy: &Taxonomy, entry: &GoldEntry) -> Result<(), PolicyError> {
    let program = parse(&entry.program_text)
        .map_err(|e| PolicyError::GoldBank(format!("{}: program does not parse: {e}", entry.question_type)))?;
    grammar.derive(&program).map_err(|e| {
        PolicyError::GoldBank(format!("{}: program does not derive: {e}", entry.question_type))
    })?;
    let _ = taxonomy;
    let outcome = execute(&program, &entry.fixture_scene, &ExecLimits::default(), &NoiseModel::default());
    let r = reward(&outcome, &entry.fixture_task);
    if !r.is_hit() {
        return Err(PolicyError::GoldBank(format!(
            "{}: program does not earn reward 1 on its fixture (status {}, result {:?})",
            entry.question_type,
            outcome.status,
            outcome.result.as_ref().map(|v| v.summary())
        )));
    }
    Ok(())
}

/// The deterministic scene the built-in fixtures run against.
fn fixture_scene() -> Scene {
    let obj = |id: &str, category: &str, color: &str, material: &str, state: &str, bbox: BBox| {
        let mut attributes = BTreeMap::new();
        attributes.insert("color".to_string(), color.to_string());
        attributes.insert("material".to_string(), material.to_string());
        attributes.insert("state".to_string(), state.to_string());
        SceneObject { id: id.into(), category: category.into(), attributes, bbox }
    };
    Scene {
        format_version: FORMAT_VERSION.into(),
        seed: 0xf1c,
        canvas_width: 100,
        canvas_height: 100,
        objects: vec![
            obj("obj0", "dog", "red", "wood", "new", BBox::new(5, 40, 25, 60)),
            obj("obj1", "cat", "blue", "plastic", "old", BBox::new(70, 40, 95, 65)),
            obj("obj2", "truck", "green", "metal", "clean", BBox::new(35, 5, 55, 25)),
            obj("obj3", "truck", "green", "metal", "dirty", BBox::new(60, 70, 90, 95)),
            obj("obj4", "mug", "yellow", "glass", "new", BBox::new(5, 5, 20, 20)),
        ],
    }
}

fn fixture_task(taxonomy: &Taxonomy, scene: &Scene, index: usize, spec: &QuestionSpec) -> TaskInstance {
    TaskInstance {
        format_version: FORMAT_VERSION.into(),
        id: format!("gold-fixture-{index:02}"),
        scene_ref: scene.id(),
        query: spec.query(),
        question_type: spec.type_name().to_string(),
        task_kind: spec.task_kind(),
        gold: oracle_answer(scene, taxonomy, spec),
        slots: spec.slots(),
    }
}

/// Build the built-in bank: one correct program per question type of the
/// default catalogue, each checked against a fixture at construction time.
pub fn default_gold_bank(grammar: &Grammar, taxonomy: &Taxonomy) -> Result<GoldBank, PolicyError> {
    use QuestionSpec as S;
    let scene = fixture_scene();
    let s = |v: &str| v.to_string();

    // (spec, template id, fillers)
    let table: Vec<(S, u32, Vec<String>)> = vec![
        (S::Exist { category: s("dog") }, 2, vec![s("dog")]),
        (S::ExistC { category: s("cat") }, 2, vec![s("cat")]),
        (S::ExistAttrNot { category: s("truck"), value: s("green") }, 4, vec![s("truck"), s("green")]),
        (S::ExistAttrNotC { category: s("dog"), value: s("red") }, 4, vec![s("dog"), s("red")]),
        (S::ExistStateNot { category: s("truck"), value: s("clean") }, 4, vec![s("truck"), s("clean")]),
        (S::ExistMaterial { category: s("mug"), value: s("glass") }, 3, vec![s("mug"), s("glass")]),
        (
            S::VerifyAttrs { category: s("mug"), color: s("yellow"), state: s("new") },
            5,
            vec![s("mug"), s("yellow"), s("new")],
        ),
        (
            S::PositionVerify { category: s("cat"), side: Side::Right },
            6,
            vec![s("cat"), s("right")],
        ),
        (
            S::TwoDifferent { cat_a: s("dog"), cat_b: s("cat") },
            8,
            vec![s("dog"), s("cat"), s("What is the color?")],
        ),
        (
            S::TwoSame { cat_a: s("dog"), cat_b: s("cat") },
            9,
            vec![s("dog"), s("cat"), s("What is the color?")],
        ),
        (S::GroupDifferent { group: s("animal") }, 10, vec![s("animal")]),
        (S::GroupSame { group: s("vehicle") }, 11, vec![s("vehicle")]),
        (S::LeftOf { cat_a: s("dog"), cat_b: s("cat") }, 15, vec![s("dog"), s("left"), s("cat")]),
        (S::RightOf { cat_a: s("cat"), cat_b: s("dog") }, 15, vec![s("cat"), s("right"), s("dog")]),
        (S::Count { category: s("truck") }, 12, vec![s("truck")]),
        (S::ColorQuery { category: s("mug") }, 7, vec![s("mug"), s("What is the color?")]),
        (
            S::StateChoose { category: s("cat"), option_a: s("old"), option_b: s("new") },
            7,
            vec![s("cat"), s("What is the state?")],
        ),
        (
            S::MaterialChoose { category: s("mug"), option_a: s("glass"), option_b: s("wood") },
            7,
            vec![s("mug"), s("What is the material?")],
        ),
        (S::SideQuery { category: s("dog") }, 13, vec![s("dog")]),
        (
            S::LargestAttr { category: s("truck") },
            14,
            vec![s("truck"), s("largest"), s("What is the color?")],
        ),
        (
            S::SmallestAttr { category: s("truck") },
            14,
            vec![s("truck"), s("smallest"), s("What is the color?")],
        ),
        (S::ItmAttr { color: s("green"), category: s("truck") }, 3, vec![s("truck"), s("green")]),
        (S::DetectAttr { color: s("green"), category: s("truck") }, 18, vec![s("truck"), s("green")]),
    ];

    let mut bank = GoldBank::default();
    for (index, (spec, template_id, fillers)) in table.into_iter().enumerate() {
        let program = grammar.build_template(template_id, &fillers).map_err(|e| {
            PolicyError::GoldBank(format!("{}: template build failed: {e}", spec.type_name()))
        })?;
        let program_text = pretty_print(&program);
        let derivation = grammar.derive(&program).map_err(|e| {
            PolicyError::GoldBank(format!("{}: derive failed: {e}", spec.type_name()))
        })?;
        let task = fixture_task(taxonomy, &scene, index, &spec);
        let entry = GoldEntry {
            question_type: spec.type_name().to_string(),
            example_query: task.query.clone(),
            program_text,
            derivation,
            fixture_scene: scene.clone(),
            fixture_task: task,
        };
        bank.insert_validated(grammar, taxonomy, entry)?;
    }
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::question_catalogue;

    #[test]
    fn default_bank_covers_the_whole_catalogue() {
        let taxonomy = Taxonomy::default();
        let grammar = Grammar::new(&taxonomy);
        let bank = default_gold_bank(&grammar, &taxonomy).unwrap();
        for qtype in question_catalogue() {
            assert!(bank.entry(qtype).is_some(), "missing gold entry for {qtype}");
        }
    }

    #[test]
    fn bank_roundtrips_through_a_directory() {
        let taxonomy = Taxonomy::default();
        let grammar = Grammar::new(&taxonomy);
        let bank = default_gold_bank(&grammar, &taxonomy).unwrap();
        let dir = tempfile::tempdir().unwrap();
        bank.write(dir.path()).unwrap();
        let loaded = GoldBank::load(dir.path(), &grammar, &taxonomy).unwrap();
        assert_eq!(loaded.len(), bank.len());
        assert_eq!(
            loaded.entry("exist").unwrap().program_text,
            bank.entry("exist").unwrap().program_text
        );
    }

    #[test]
    fn corrupted_program_fails_validation() {
        let taxonomy = Taxonomy::default();
        let grammar = Grammar::new(&taxonomy);
        let bank = default_gold_bank(&grammar, &taxonomy).unwrap();
        let dir = tempfile::tempdir().unwrap();
        bank.write(dir.path()).unwrap();
        // Swap a correct program for one that answers wrongly.
        std::fs::write(
            dir.path().join("programs/exist.py"),
            "def execute_command(image):\n    return \"no\"\n",
        )
        .unwrap();
        assert!(GoldBank::load(dir.path(), &grammar, &taxonomy).is_err());
    }
}
