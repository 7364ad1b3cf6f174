//! Synthetic visual world: scenes of axis-aligned boxes with categorical
//! attributes, plus typed question/answer task generation over them.
//!
//! Scenes stand in for images. Everything is a pure function of a config and
//! a seed, and gold answers are computed exactly from the scene graph, so the
//! downstream binary reward is exactly computable.

mod questions;

pub use questions::{
    boolean_types, default_types, oracle_answer, question_catalogue, spec_from_slots, QuestionSpec,
    Side,
};

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::reward::Answer;
use crate::util;

/// Current on-disk schema version for scene and task files.
pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("could not place {requested} objects within the overlap budget (placed {placed})")]
    InfeasibleLayout { requested: usize, placed: usize },
    #[error("question type `{question_type}` cannot be instantiated on any provided scene")]
    TemplateUnsatisfiable { question_type: String },
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Axis-aligned box in integer pixels, origin at the upper-left corner.
///
/// `left < right` and `upper < lower` always hold for scene objects and
/// gold boxes; degenerate crop regions use [`crate::exec::Region`] instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct BBox {
    pub left: i64,
    pub upper: i64,
    pub right: i64,
    pub lower: i64,
}

impl BBox {
    pub fn new(left: i64, upper: i64, right: i64, lower: i64) -> Self {
        Self { left, upper, right, lower }
    }

    pub fn width(&self) -> i64 {
        self.right - self.left
    }

    pub fn height(&self) -> i64 {
        self.lower - self.upper
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn horizontal_center(&self) -> f64 {
        (self.left + self.right) as f64 / 2.0
    }

    pub fn vertical_center(&self) -> f64 {
        (self.upper + self.lower) as f64 / 2.0
    }

    pub fn intersection_area(&self, other: &BBox) -> i64 {
        let w = (self.right.min(other.right) - self.left.max(other.left)).max(0);
        let h = (self.lower.min(other.lower) - self.upper.max(other.upper)).max(0);
        w * h
    }

    /// Intersection over union as a float; 0 when either box is degenerate.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn is_valid(&self) -> bool {
        self.left < self.right && self.upper < self.lower
    }

    pub fn within_canvas(&self, width: i64, height: i64) -> bool {
        self.left >= 0 && self.upper >= 0 && self.right <= width && self.lower <= height
    }
}

impl From<[i64; 4]> for BBox {
    fn from(v: [i64; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [i64; 4] {
    fn from(b: BBox) -> Self {
        [b.left, b.upper, b.right, b.lower]
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{},{}]", self.left, self.upper, self.right, self.lower)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub category: String,
    pub attributes: BTreeMap<String, String>,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

impl SceneObject {
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    /// True when any attribute value equals `value` (case-insensitive).
    pub fn has_attribute_value(&self, value: &str) -> bool {
        self.attributes.values().any(|v| v.eq_ignore_ascii_case(value))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub format_version: String,
    pub seed: u64,
    pub canvas_width: i64,
    pub canvas_height: i64,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    /// Stable identifier used by task files and the noise model.
    pub fn id(&self) -> String {
        format!("scene-{:016x}", self.seed)
    }

    pub fn objects_of(&self, category: &str) -> impl Iterator<Item = &SceneObject> {
        let wanted = category.to_ascii_lowercase();
        self.objects.iter().filter(move |o| o.category.eq_ignore_ascii_case(&wanted))
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Scene> {
        serde_json::from_str(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), WorldError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Scene, WorldError> {
        Ok(Scene::from_json(&std::fs::read_to_string(path)?)?)
    }

    pub fn check_invariants(&self) -> Result<(), WorldError> {
        let mut seen = std::collections::BTreeSet::new();
        for obj in &self.objects {
            if !obj.bbox.is_valid() {
                return Err(WorldError::InvalidConfig(format!(
                    "object {} has an empty box {}",
                    obj.id, obj.bbox
                )));
            }
            if !obj.bbox.within_canvas(self.canvas_width, self.canvas_height) {
                return Err(WorldError::InvalidConfig(format!(
                    "object {} escapes the canvas",
                    obj.id
                )));
            }
            if !seen.insert(obj.id.clone()) {
                return Err(WorldError::InvalidConfig(format!("duplicate object id {}", obj.id)));
            }
        }
        Ok(())
    }
}

/// One category group of the world taxonomy, e.g. `animal` -> dog, cat, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub values: Vec<String>,
}

/// Categories, category groups, and attribute vocabularies of the world.
///
/// All names are lowercase; plurals are formed by appending `s` (the default
/// taxonomy only uses regular nouns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub groups: Vec<Group>,
    pub attributes: Vec<AttributeDef>,
}

impl Taxonomy {
    pub fn categories(&self) -> Vec<&str> {
        self.groups.iter().flat_map(|g| g.members.iter().map(String::as_str)).collect()
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn attribute_values(&self, name: &str) -> &[String] {
        self.attribute(name).map(|a| a.values.as_slice()).unwrap_or(&[])
    }

    /// Every attribute value of every kind, in taxonomy order.
    pub fn all_attribute_values(&self) -> Vec<&str> {
        self.attributes.iter().flat_map(|a| a.values.iter().map(String::as_str)).collect()
    }

    pub fn is_category(&self, word: &str) -> bool {
        self.categories().contains(&word)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.groups.is_empty() || self.groups.iter().all(|g| g.members.is_empty()) {
            return Err(WorldError::InvalidConfig("taxonomy has no categories".into()));
        }
        for required in ["color", "material", "state"] {
            let def = self
                .attribute(required)
                .ok_or_else(|| WorldError::InvalidConfig(format!("missing attribute `{required}`")))?;
            if def.values.len() < 2 {
                return Err(WorldError::InvalidConfig(format!(
                    "attribute `{required}` needs at least two values"
                )));
            }
        }
        let cats = self.categories();
        let unique: std::collections::BTreeSet<_> = cats.iter().collect();
        if unique.len() != cats.len() {
            return Err(WorldError::InvalidConfig("duplicate category across groups".into()));
        }
        // Attribute values must be globally unique and disjoint from the
        // categories: slot extraction and property matching rely on a word
        // having exactly one meaning.
        let values = self.all_attribute_values();
        let unique_values: std::collections::BTreeSet<_> = values.iter().collect();
        if unique_values.len() != values.len() {
            return Err(WorldError::InvalidConfig("duplicate attribute value across attributes".into()));
        }
        if values.iter().any(|v| cats.contains(v)) {
            return Err(WorldError::InvalidConfig(
                "attribute values must be disjoint from categories".into(),
            ));
        }
        Ok(())
    }

    /// Stable content hash; part of the grammar version.
    pub fn content_hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("taxonomy serializes");
        util::fnv1a(json.as_bytes())
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        fn group(name: &str, members: &[&str]) -> Group {
            Group { name: name.into(), members: members.iter().map(|s| s.to_string()).collect() }
        }
        fn attr(name: &str, values: &[&str]) -> AttributeDef {
            AttributeDef { name: name.into(), values: values.iter().map(|s| s.to_string()).collect() }
        }
        Taxonomy {
            groups: vec![
                group("animal", &["dog", "cat", "horse", "bird"]),
                group("vehicle", &["truck", "car", "van", "boat"]),
                group(
                    "household",
                    &["chair", "table", "sofa", "bottle", "mug", "plate", "book", "ball", "lamp"],
                ),
            ],
            attributes: vec![
                attr("color", &["red", "green", "blue", "yellow", "black", "white"]),
                attr("material", &["wood", "metal", "plastic", "glass"]),
                attr("state", &["new", "old", "clean", "dirty"]),
            ],
        }
    }
}

/// Perception-noise parameters; see the executor for how draws are keyed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    pub find_miss_rate: f64,
    pub find_false_positive_rate: f64,
    pub query_corruption_rate: f64,
    pub noise_seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            find_miss_rate: 0.0,
            find_false_positive_rate: 0.0,
            query_corruption_rate: 0.0,
            noise_seed: 0,
        }
    }
}

impl NoiseParams {
    pub fn is_noiseless(&self) -> bool {
        self.find_miss_rate == 0.0
            && self.find_false_positive_rate == 0.0
            && self.query_corruption_rate == 0.0
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        for (name, p) in [
            ("find_miss_rate", self.find_miss_rate),
            ("find_false_positive_rate", self.find_false_positive_rate),
            ("query_corruption_rate", self.query_corruption_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(WorldError::InvalidConfig(format!("{name} = {p} outside [0,1]")));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, noise_seed: u64) -> NoiseParams {
        NoiseParams { noise_seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub taxonomy: Taxonomy,
    pub canvas_width: i64,
    pub canvas_height: i64,
    /// Inclusive object-count range per scene.
    pub objects_min: usize,
    pub objects_max: usize,
    /// Pairwise intersection / min-area cap for placed boxes.
    pub max_overlap: f64,
    /// Enabled question types, in catalogue order.
    pub question_types: Vec<String>,
    pub noise: NoiseParams,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            taxonomy: Taxonomy::default(),
            canvas_width: 100,
            canvas_height: 100,
            objects_min: 3,
            objects_max: 7,
            max_overlap: 0.2,
            question_types: default_types(),
            noise: NoiseParams::default(),
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        self.taxonomy.validate()?;
        self.noise.validate()?;
        if self.canvas_width < 10 || self.canvas_height < 10 {
            return Err(WorldError::InvalidConfig("canvas must be at least 10x10".into()));
        }
        if self.objects_min > self.objects_max {
            return Err(WorldError::InvalidConfig("objects_min > objects_max".into()));
        }
        if !(0.0..=1.0).contains(&self.max_overlap) {
            return Err(WorldError::InvalidConfig("max_overlap outside [0,1]".into()));
        }
        let known = question_catalogue();
        for t in &self.question_types {
            if !known.contains(&t.as_str()) {
                return Err(WorldError::InvalidConfig(format!("unknown question type `{t}`")));
            }
        }
        if self.question_types.is_empty() {
            return Err(WorldError::InvalidConfig("no question types enabled".into()));
        }
        Ok(())
    }
}

/// The three task families a gold annotation can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Vqa,
    Detection,
    Itm,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Vqa => write!(f, "vqa"),
            TaskKind::Detection => write!(f, "detection"),
            TaskKind::Itm => write!(f, "itm"),
        }
    }
}

/// One (scene, query, gold) item of a task set.
///
/// `slots` records the template bindings the query was instantiated with;
/// they let tests rebuild the question spec and a witness program without
/// re-parsing the query text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub format_version: String,
    pub id: String,
    #[serde(rename = "scene")]
    pub scene_ref: String,
    pub query: String,
    pub question_type: String,
    pub task_kind: TaskKind,
    pub gold: Answer,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, String>,
}

/// Serialize tasks as line-delimited JSON.
pub fn tasks_to_jsonl(tasks: &[TaskInstance]) -> serde_json::Result<String> {
    let mut out = String::new();
    for t in tasks {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn tasks_from_jsonl(text: &str) -> serde_json::Result<Vec<TaskInstance>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

pub fn save_tasks(tasks: &[TaskInstance], path: &Path) -> Result<(), WorldError> {
    std::fs::write(path, tasks_to_jsonl(tasks)?)?;
    Ok(())
}

pub fn load_tasks(path: &Path) -> Result<Vec<TaskInstance>, WorldError> {
    Ok(tasks_from_jsonl(&std::fs::read_to_string(path)?)?)
}

/// Generate one scene. Deterministic given `(config, seed)`.
pub fn generate_scene(config: &WorldConfig, seed: u64) -> Result<Scene, WorldError> {
    config.validate()?;
    let mut rng = util::rng_from_seed(util::derive_seed(seed, &["scene"]));
    let n = if config.objects_min == config.objects_max {
        config.objects_min
    } else {
        rng.gen_range(config.objects_min..=config.objects_max)
    };
    let categories: Vec<String> = config.taxonomy.categories().iter().map(|s| s.to_string()).collect();
    let (w, h) = (config.canvas_width, config.canvas_height);
    let min_dim = (w.min(h) / 12).max(2);
    let max_dim = (w.min(h) / 3).max(min_dim + 1);

    let mut objects: Vec<SceneObject> = Vec::with_capacity(n);
    for idx in 0..n {
        let mut placed = false;
        for _attempt in 0..60 {
            let bw = rng.gen_range(min_dim..=max_dim);
            let bh = rng.gen_range(min_dim..=max_dim);
            let left = rng.gen_range(0..=(w - bw));
            let upper = rng.gen_range(0..=(h - bh));
            let candidate = BBox::new(left, upper, left + bw, upper + bh);
            let ok = objects.iter().all(|o| {
                let inter = candidate.intersection_area(&o.bbox) as f64;
                let denom = candidate.area().min(o.bbox.area()) as f64;
                inter / denom <= config.max_overlap
            });
            if !ok {
                continue;
            }
            let category = categories[rng.gen_range(0..categories.len())].clone();
            let mut attributes = BTreeMap::new();
            for attr in &config.taxonomy.attributes {
                let v = attr.values[rng.gen_range(0..attr.values.len())].clone();
                attributes.insert(attr.name.clone(), v);
            }
            objects.push(SceneObject {
                id: format!("obj{idx}"),
                category,
                attributes,
                bbox: candidate,
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(WorldError::InfeasibleLayout { requested: n, placed: objects.len() });
        }
    }

    let scene = Scene {
        format_version: FORMAT_VERSION.to_string(),
        seed,
        canvas_width: w,
        canvas_height: h,
        objects,
    };
    scene.check_invariants()?;
    Ok(scene)
}

/// Generate a pool of scenes with per-scene seeds derived from `seed`.
pub fn generate_scenes(config: &WorldConfig, count: usize, seed: u64) -> Result<Vec<Scene>, WorldError> {
    (0..count)
        .map(|i| generate_scene(config, util::derive_seed(seed, &["pool", &i.to_string()])))
        .collect()
}

/// Generate a stratified task set: exactly `per_type` instances per enabled
/// question type, gold computed by exhaustive evaluation over the scene graph.
pub fn generate_tasks(
    config: &WorldConfig,
    scenes: &[Scene],
    per_type: usize,
    seed: u64,
) -> Result<Vec<TaskInstance>, WorldError> {
    config.validate()?;
    if per_type == 0 {
        return Err(WorldError::InvalidConfig("per_type must be >= 1".into()));
    }
    questions::generate_tasks_impl(config, scenes, per_type, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> WorldConfig {
        WorldConfig::default()
    }

    #[test]
    fn empty_scene_when_zero_objects() {
        let mut c = cfg();
        c.objects_min = 0;
        c.objects_max = 0;
        let s = generate_scene(&c, 7).unwrap();
        assert!(s.objects.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scene(&cfg(), 42).unwrap();
        let b = generate_scene(&cfg(), 42).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn five_objects_hold_invariants() {
        let mut c = cfg();
        c.objects_min = 5;
        c.objects_max = 5;
        let s = generate_scene(&c, 3).unwrap();
        assert_eq!(s.objects.len(), 5);
        for o in &s.objects {
            assert!(o.bbox.left < o.bbox.right && o.bbox.upper < o.bbox.lower);
            assert!(o.bbox.within_canvas(100, 100));
        }
        s.check_invariants().unwrap();
    }

    #[test]
    fn infeasible_layout_is_reported() {
        let mut c = cfg();
        c.objects_min = 60;
        c.objects_max = 60;
        c.max_overlap = 0.0;
        c.canvas_width = 30;
        c.canvas_height = 30;
        match generate_scene(&c, 1) {
            Err(WorldError::InfeasibleLayout { .. }) => {}
            other => panic!("expected InfeasibleLayout, got {other:?}"),
        }
    }

    #[test]
    fn scene_roundtrip_is_identity() {
        let s = generate_scene(&cfg(), 11).unwrap();
        let round = Scene::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, round);
    }

    #[test]
    fn bbox_iou_hand_value() {
        // intersection 50, union 150.
        let a = BBox::new(0, 0, 10, 10);
        let b = BBox::new(5, 0, 15, 10);
        assert_eq!(a.intersection_area(&b), 50);
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = cfg();
        c.question_types = vec!["nonsense".into()];
        assert!(matches!(generate_scene(&c, 0), Err(WorldError::InvalidConfig(_))));
    }
}
