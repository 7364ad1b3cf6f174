//! The ImagePatch API over a scene graph, with deterministic perception
//! noise.
//!
//! Noise draws are keyed by `(noise_seed, scene id, method, arguments)` plus a
//! purpose label, so repeated identical calls in one execution observe
//! identical noise, and `exists` agrees with `find` by construction. Call
//! order and call site do not enter the key.

use serde::{Deserialize, Serialize};

use crate::scene::{Scene, SceneObject};
use crate::util;

pub use crate::scene::NoiseParams as NoiseModel;

/// A crop region in canvas coordinates. Unlike scene boxes it may be
/// degenerate (zero width or height); degenerate regions contain no objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub left: i64,
    pub upper: i64,
    pub right: i64,
    pub lower: i64,
}

impl Region {
    pub fn full_canvas(scene: &Scene) -> Region {
        Region { left: 0, upper: 0, right: scene.canvas_width, lower: scene.canvas_height }
    }

    pub fn from_bbox(b: &crate::scene::BBox) -> Region {
        Region { left: b.left, upper: b.upper, right: b.right, lower: b.lower }
    }

    pub fn horizontal_center(&self) -> f64 {
        (self.left + self.right) as f64 / 2.0
    }

    pub fn vertical_center(&self) -> f64 {
        (self.upper + self.lower) as f64 / 2.0
    }

    pub fn area(&self) -> i64 {
        (self.right - self.left).max(0) * (self.lower - self.upper).max(0)
    }

    /// Half-open containment of a point; empty regions contain nothing.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.left as f64 && x < self.right as f64 && y >= self.upper as f64 && y < self.lower as f64
    }

    pub fn contains_center(&self, b: &crate::scene::BBox) -> bool {
        self.contains_point(b.horizontal_center(), b.vertical_center())
    }
}

/// A runtime image patch: a crop region, the category label it was found
/// under, and the scene object it is bound to (if produced by `find`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchVal {
    pub region: Region,
    pub category: Option<String>,
    pub bound_object: Option<usize>,
}

impl PatchVal {
    pub fn full(scene: &Scene) -> PatchVal {
        PatchVal { region: Region::full_canvas(scene), category: None, bound_object: None }
    }

    fn bound<'s>(&self, scene: &'s Scene) -> Option<&'s SceneObject> {
        self.bound_object.and_then(|i| scene.objects.get(i))
    }
}

fn noise_unit(noise: &NoiseModel, scene: &Scene, method: &str, args: &str, purpose: &str, extra: u64) -> f64 {
    let h = util::stable_hash(&[
        b"noise",
        &noise.noise_seed.to_le_bytes(),
        &scene.seed.to_le_bytes(),
        method.as_bytes(),
        args.as_bytes(),
        purpose.as_bytes(),
        &extra.to_le_bytes(),
    ]);
    util::unit_float(h)
}

fn find_args(region: &Region, name: &str) -> String {
    format!("{},{},{},{}|{}", region.left, region.upper, region.right, region.lower, name)
}

/// Objects of the category whose box center lies inside the patch, ordered
/// left to right by horizontal center, with noise applied: each true match is
/// dropped with `find_miss_rate`, and with `find_false_positive_rate` one
/// non-matching object in the region is relabeled in.
pub fn api_find(patch: &PatchVal, object_name: &str, scene: &Scene, noise: &NoiseModel) -> Vec<PatchVal> {
    let name = object_name.to_ascii_lowercase();
    let args = find_args(&patch.region, &name);
    let mut hits: Vec<(usize, &SceneObject)> = Vec::new();
    for (idx, obj) in scene.objects.iter().enumerate() {
        if obj.category.eq_ignore_ascii_case(&name) && patch.region.contains_center(&obj.bbox) {
            if noise.find_miss_rate > 0.0 {
                let u = noise_unit(noise, scene, "find", &args, "miss", idx as u64);
                if u < noise.find_miss_rate {
                    continue;
                }
            }
            hits.push((idx, obj));
        }
    }
    if noise.find_false_positive_rate > 0.0 {
        let u = noise_unit(noise, scene, "find", &args, "fp", 0);
        if u < noise.find_false_positive_rate {
            let candidates: Vec<(usize, &SceneObject)> = scene
                .objects
                .iter()
                .enumerate()
                .filter(|(_, o)| {
                    !o.category.eq_ignore_ascii_case(&name) && patch.region.contains_center(&o.bbox)
                })
                .collect();
            if !candidates.is_empty() {
                let pick = noise_unit(noise, scene, "find", &args, "fp_pick", 0);
                let chosen = candidates[(pick * candidates.len() as f64) as usize % candidates.len()];
                hits.push(chosen);
            }
        }
    }
    hits.sort_by(|(ia, a), (ib, b)| {
        a.bbox
            .horizontal_center()
            .partial_cmp(&b.bbox.horizontal_center())
            .unwrap()
            .then(ia.cmp(ib))
    });
    hits.into_iter()
        .map(|(idx, obj)| PatchVal {
            region: Region::from_bbox(&obj.bbox),
            category: Some(name.clone()),
            bound_object: Some(idx),
        })
        .collect()
}

/// Non-emptiness of `api_find` under the same noise draw.
pub fn api_exists(patch: &PatchVal, object_name: &str, scene: &Scene, noise: &NoiseModel) -> bool {
    !api_find(patch, object_name, scene, noise).is_empty()
}

/// Last whitespace token of a property phrase: covers bare values ("green")
/// and phrases whose head is an attribute value ("made of glass").
fn property_token(visual_property: &str) -> String {
    visual_property
        .split_whitespace()
        .last()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_ascii_alphanumeric())
        .to_ascii_lowercase()
}

/// True when the object possesses the visual property; corrupted (flipped)
/// with `query_corruption_rate`.
pub fn api_verify_property(
    patch: &PatchVal,
    object_name: &str,
    visual_property: &str,
    scene: &Scene,
    noise: &NoiseModel,
) -> bool {
    let token = property_token(visual_property);
    let truth = match patch.bound(scene) {
        Some(obj) => obj.has_attribute_value(&token),
        None => {
            // Unbound patch: any matching object in the region with the property.
            let name = object_name.to_ascii_lowercase();
            scene.objects.iter().any(|o| {
                o.category.eq_ignore_ascii_case(&name)
                    && patch.region.contains_center(&o.bbox)
                    && o.has_attribute_value(&token)
            })
        }
    };
    if noise.query_corruption_rate > 0.0 {
        let args = format!(
            "{}|{}|{}",
            find_args(&patch.region, &object_name.to_ascii_lowercase()),
            patch.bound_object.map(|i| i as i64).unwrap_or(-1),
            token
        );
        let u = noise_unit(noise, scene, "verify_property", &args, "flip", 0);
        if u < noise.query_corruption_rate {
            return !truth;
        }
    }
    truth
}

fn objects_in<'s>(scene: &'s Scene, region: &Region) -> Vec<(usize, &'s SceneObject)> {
    scene
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| region.contains_center(&o.bbox))
        .collect()
}

/// The object a "what is ..." query refers to: the bound object if any, the
/// sole object in the region, or the largest object in the region.
fn salient<'s>(patch: &PatchVal, scene: &'s Scene) -> Option<&'s SceneObject> {
    if let Some(obj) = patch.bound(scene) {
        return Some(obj);
    }
    let inside = objects_in(scene, &patch.region);
    match inside.len() {
        0 => None,
        1 => Some(inside[0].1),
        _ => inside.into_iter().max_by_key(|(idx, o)| (o.bbox.area(), std::cmp::Reverse(*idx))).map(|(_, o)| o),
    }
}

fn singularize(word: &str, scene: &Scene) -> String {
    let w = word.to_ascii_lowercase();
    if scene.objects.iter().any(|o| o.category == w) {
        return w;
    }
    if let Some(stripped) = w.strip_suffix('s') {
        return stripped.to_string();
    }
    w
}

/// Answer one of the closed catalogue of basic questions against the scene
/// graph restricted to the patch:
///
/// - `What is this?` -> category of the salient object
/// - `What is the color|material|state?` -> that attribute of the salient object
/// - `Is the <name> <value>?` -> yes/no attribute check
/// - `How many <name>?` -> decimal count in the region
///
/// Anything else returns the fixed string `unknown`. With
/// `query_corruption_rate` the answer is replaced by a uniformly different
/// value of the same kind, drawn from the scene's own vocabulary.
pub fn api_simple_query(patch: &PatchVal, question: &str, scene: &Scene, noise: &NoiseModel) -> String {
    let q = question.trim().trim_end_matches(['?', '.']).to_ascii_lowercase();
    let q = q.trim();
    let mut kind = AnswerKind::Unknown;

    let truth: String = if q == "what is this" || q.is_empty() {
        match salient(patch, scene) {
            Some(o) => {
                kind = AnswerKind::Category;
                o.category.clone()
            }
            None => "unknown".into(),
        }
    } else if let Some(attr) = q
        .strip_prefix("what is the ")
        .filter(|rest| ["color", "material", "state"].contains(rest))
    {
        match salient(patch, scene).and_then(|o| o.attribute(attr)) {
            Some(v) => {
                kind = AnswerKind::Attribute(attr.to_string());
                v.to_string()
            }
            None => "unknown".into(),
        }
    } else if let Some(rest) = q.strip_prefix("is the ").or_else(|| q.strip_prefix("is this ")) {
        let words: Vec<&str> = rest.split_whitespace().collect();
        if words.len() == 2 {
            kind = AnswerKind::YesNo;
            let name = singularize(words[0], scene);
            let value = words[1];
            let hit = match patch.bound(scene) {
                Some(o) if o.category == name => o.has_attribute_value(value),
                _ => scene.objects.iter().any(|o| {
                    o.category == name
                        && patch.region.contains_center(&o.bbox)
                        && o.has_attribute_value(value)
                }),
            };
            if hit { "yes".into() } else { "no".into() }
        } else {
            "unknown".into()
        }
    } else if let Some(rest) = q.strip_prefix("how many ") {
        let noun = rest.split_whitespace().next().unwrap_or("");
        let name = singularize(noun, scene);
        kind = AnswerKind::Count;
        scene
            .objects
            .iter()
            .filter(|o| o.category == name && patch.region.contains_center(&o.bbox))
            .count()
            .to_string()
    } else {
        "unknown".into()
    };

    if noise.query_corruption_rate > 0.0 && !matches!(kind, AnswerKind::Unknown) {
        let args = format!(
            "{},{},{},{}|{}|{}",
            patch.region.left,
            patch.region.upper,
            patch.region.right,
            patch.region.lower,
            patch.bound_object.map(|i| i as i64).unwrap_or(-1),
            q
        );
        let u = noise_unit(noise, scene, "simple_query", &args, "corrupt", 0);
        if u < noise.query_corruption_rate {
            let pick = noise_unit(noise, scene, "simple_query", &args, "corrupt_pick", 0);
            return corrupt(&truth, &kind, scene, pick);
        }
    }
    truth
}

enum AnswerKind {
    Unknown,
    YesNo,
    Count,
    Category,
    Attribute(String),
}

fn corrupt(truth: &str, kind: &AnswerKind, scene: &Scene, pick: f64) -> String {
    let choose = |options: Vec<String>| -> String {
        if options.is_empty() {
            "unknown".to_string()
        } else {
            options[(pick * options.len() as f64) as usize % options.len()].clone()
        }
    };
    match kind {
        AnswerKind::Unknown => "unknown".into(),
        AnswerKind::YesNo => if truth == "yes" { "no" } else { "yes" }.into(),
        AnswerKind::Count => {
            let n: i64 = truth.parse().unwrap_or(0);
            let ceiling = (n + 2).max(3);
            let options: Vec<String> =
                (0..=ceiling).filter(|k| *k != n).map(|k| k.to_string()).collect();
            choose(options)
        }
        AnswerKind::Category => {
            let mut cats: Vec<String> = scene
                .objects
                .iter()
                .map(|o| o.category.clone())
                .filter(|c| c != truth)
                .collect();
            cats.sort();
            cats.dedup();
            choose(cats)
        }
        AnswerKind::Attribute(attr) => {
            let mut vals: Vec<String> = scene
                .objects
                .iter()
                .filter_map(|o| o.attribute(attr))
                .map(String::from)
                .filter(|v| v != truth)
                .collect();
            vals.sort();
            vals.dedup();
            choose(vals)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CropDirection {
    Left,
    Right,
    Above,
    Below,
}

/// Directional crop relative to a given box: `LEFT` keeps the area left of
/// the box at the patch's own vertical extent, and so on. Degenerate regions
/// are legal and contain no objects.
pub fn api_crop_directional(
    patch: &PatchVal,
    direction: CropDirection,
    bbox: (i64, i64, i64, i64),
    scene: &Scene,
) -> PatchVal {
    let (left, upper, right, lower) = bbox;
    let clamp_x = |v: i64| v.clamp(0, scene.canvas_width);
    let clamp_y = |v: i64| v.clamp(0, scene.canvas_height);
    let region = match direction {
        CropDirection::Left => Region {
            left: 0,
            upper: patch.region.upper,
            right: clamp_x(left),
            lower: patch.region.lower,
        },
        CropDirection::Right => Region {
            left: clamp_x(right),
            upper: patch.region.upper,
            right: scene.canvas_width,
            lower: patch.region.lower,
        },
        CropDirection::Above => Region {
            left: patch.region.left,
            upper: 0,
            right: patch.region.right,
            lower: clamp_y(upper),
        },
        CropDirection::Below => Region {
            left: patch.region.left,
            upper: clamp_y(lower),
            right: patch.region.right,
            lower: scene.canvas_height,
        },
    };
    PatchVal { region, category: None, bound_object: None }
}

pub fn bool_to_yesno(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}
