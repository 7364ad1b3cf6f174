//! Question-type catalogue, gold-answer oracle, and stratified task
//! instantiation.
//!
//! The oracle evaluates question semantics exhaustively over the scene graph
//! and is kept independent of the program executor, so it can serve as a test
//! oracle for executed programs.
//!
//! Tie rules (all documented here and relied on by the witness programs):
//! - "on the right of the picture": horizontal center strictly greater than
//!   half the canvas width; exact halves answer "no" (same for "left").
//! - side queries answer "right" iff strictly right of center, else "left".
//! - "left of the X" (detection form): target center strictly left of the
//!   box's left edge; "right of": center at or beyond the right edge. This
//!   matches directional-crop containment exactly.
//! - pair relations ("is A left of B"): strict comparison of centers.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Scene, SceneObject, TaskInstance, TaskKind, Taxonomy, WorldConfig, WorldError, FORMAT_VERSION};
use crate::reward::Answer;
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn word(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    fn parse(s: &str) -> Option<Side> {
        match s {
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            _ => None,
        }
    }
}

/// A fully bound question over a scene. One variant per catalogue entry,
/// except `itm` and `detect`, which each have an attribute form and a
/// relation form.
#[derive(Debug, Clone, PartialEq)]
pub enum QuestionSpec {
    Exist { category: String },
    ExistC { category: String },
    ExistAttrNot { category: String, value: String },
    ExistAttrNotC { category: String, value: String },
    ExistStateNot { category: String, value: String },
    ExistMaterial { category: String, value: String },
    VerifyAttrs { category: String, color: String, state: String },
    PositionVerify { category: String, side: Side },
    TwoDifferent { cat_a: String, cat_b: String },
    TwoSame { cat_a: String, cat_b: String },
    GroupDifferent { group: String },
    GroupSame { group: String },
    LeftOf { cat_a: String, cat_b: String },
    RightOf { cat_a: String, cat_b: String },
    Count { category: String },
    ColorQuery { category: String },
    StateChoose { category: String, option_a: String, option_b: String },
    MaterialChoose { category: String, option_a: String, option_b: String },
    SideQuery { category: String },
    LargestAttr { category: String },
    SmallestAttr { category: String },
    ItmAttr { color: String, category: String },
    ItmRel { cat_a: String, side: Side, cat_b: String },
    DetectAttr { color: String, category: String },
    DetectRel { color: String, category: String, side: Side, anchor: String },
}

/// Catalogue order is stable; it is the order types appear in task files.
pub fn question_catalogue() -> &'static [&'static str] {
    &[
        "exist",
        "existC",
        "existAttrNot",
        "existAttrNotC",
        "existStateNot",
        "existMaterialC",
        "verifyAttrsC",
        "positionVerifyC",
        "twoDifferent",
        "twoSame",
        "diffAnimals",
        "sameVehicles",
        "leftOf",
        "rightOf",
        "count",
        "colorQuery",
        "stateChoose",
        "materialChoose",
        "relO",
        "largestAttr",
        "smallestAttr",
        "itm",
        "detect",
    ]
}

/// Types whose gold answers are yes/no.
pub fn boolean_types() -> &'static [&'static str] {
    &[
        "exist",
        "existC",
        "existAttrNot",
        "existAttrNotC",
        "existStateNot",
        "existMaterialC",
        "verifyAttrsC",
        "positionVerifyC",
        "twoDifferent",
        "twoSame",
        "diffAnimals",
        "sameVehicles",
        "leftOf",
        "rightOf",
        "itm",
    ]
}

pub fn default_types() -> Vec<String> {
    question_catalogue().iter().map(|s| s.to_string()).collect()
}

impl QuestionSpec {
    pub fn type_name(&self) -> &'static str {
        match self {
            QuestionSpec::Exist { .. } => "exist",
            QuestionSpec::ExistC { .. } => "existC",
            QuestionSpec::ExistAttrNot { .. } => "existAttrNot",
            QuestionSpec::ExistAttrNotC { .. } => "existAttrNotC",
            QuestionSpec::ExistStateNot { .. } => "existStateNot",
            QuestionSpec::ExistMaterial { .. } => "existMaterialC",
            QuestionSpec::VerifyAttrs { .. } => "verifyAttrsC",
            QuestionSpec::PositionVerify { .. } => "positionVerifyC",
            QuestionSpec::TwoDifferent { .. } => "twoDifferent",
            QuestionSpec::TwoSame { .. } => "twoSame",
            QuestionSpec::GroupDifferent { .. } => "diffAnimals",
            QuestionSpec::GroupSame { .. } => "sameVehicles",
            QuestionSpec::LeftOf { .. } => "leftOf",
            QuestionSpec::RightOf { .. } => "rightOf",
            QuestionSpec::Count { .. } => "count",
            QuestionSpec::ColorQuery { .. } => "colorQuery",
            QuestionSpec::StateChoose { .. } => "stateChoose",
            QuestionSpec::MaterialChoose { .. } => "materialChoose",
            QuestionSpec::SideQuery { .. } => "relO",
            QuestionSpec::LargestAttr { .. } => "largestAttr",
            QuestionSpec::SmallestAttr { .. } => "smallestAttr",
            QuestionSpec::ItmAttr { .. } | QuestionSpec::ItmRel { .. } => "itm",
            QuestionSpec::DetectAttr { .. } | QuestionSpec::DetectRel { .. } => "detect",
        }
    }

    pub fn task_kind(&self) -> TaskKind {
        match self {
            QuestionSpec::ItmAttr { .. } | QuestionSpec::ItmRel { .. } => TaskKind::Itm,
            QuestionSpec::DetectAttr { .. } | QuestionSpec::DetectRel { .. } => TaskKind::Detection,
            _ => TaskKind::Vqa,
        }
    }

    /// Query text shown to the policy. Formats are fixed; slot extraction
    /// depends only on taxonomy membership of the words, not on these shapes.
    pub fn query(&self) -> String {
        let plural = |c: &str| format!("{c}s");
        match self {
            QuestionSpec::Exist { category } => format!("Are there {}?", plural(category)),
            QuestionSpec::ExistC { category } => {
                format!("Are there any {} in this picture?", plural(category))
            }
            QuestionSpec::ExistAttrNot { category, value } => {
                format!("Is there a {category} that is not {value}?")
            }
            QuestionSpec::ExistAttrNotC { category, value } => {
                format!("Is there a {category} in the scene that is not {value}?")
            }
            QuestionSpec::ExistStateNot { category, value } => {
                format!("Is there a {category} that is not {value}?")
            }
            QuestionSpec::ExistMaterial { category, value } => {
                format!("Is there a {category} that is made of {value}?")
            }
            QuestionSpec::VerifyAttrs { category, color, state } => {
                format!("Is the {category} {color} and {state}?")
            }
            QuestionSpec::PositionVerify { category, side } => {
                format!("Is the {category} on the {} of the picture?", side.word())
            }
            QuestionSpec::TwoDifferent { cat_a, cat_b } => {
                format!("Is the {cat_a} a different color than the {cat_b}?")
            }
            QuestionSpec::TwoSame { cat_a, cat_b } => {
                format!("Is the {cat_a} the same color as the {cat_b}?")
            }
            QuestionSpec::GroupDifferent { group } => {
                format!("Are the {} of different kinds?", plural(group))
            }
            QuestionSpec::GroupSame { group } => {
                format!("Are the {} all the same kind?", plural(group))
            }
            QuestionSpec::LeftOf { cat_a, cat_b } => {
                format!("Is the {cat_a} to the left of the {cat_b}?")
            }
            QuestionSpec::RightOf { cat_a, cat_b } => {
                format!("Is the {cat_a} to the right of the {cat_b}?")
            }
            QuestionSpec::Count { category } => format!("How many {} are there?", plural(category)),
            QuestionSpec::ColorQuery { category } => format!("What color is the {category}?"),
            QuestionSpec::StateChoose { category, option_a, option_b } => {
                format!("How is the {category}, {option_a} or {option_b}?")
            }
            QuestionSpec::MaterialChoose { category, option_a, option_b } => {
                format!("What is the {category} made of, {option_a} or {option_b}?")
            }
            QuestionSpec::SideQuery { category } => {
                format!("On which side of the picture is the {category}?")
            }
            QuestionSpec::LargestAttr { category } => {
                format!("What color is the largest {category}?")
            }
            QuestionSpec::SmallestAttr { category } => {
                format!("What color is the smallest {category}?")
            }
            QuestionSpec::ItmAttr { color, category } => format!("a {color} {category}"),
            QuestionSpec::ItmRel { cat_a, side, cat_b } => {
                format!("a {cat_a} to the {} of a {cat_b}", side.word())
            }
            QuestionSpec::DetectAttr { color, category } => format!("{color} {category}"),
            QuestionSpec::DetectRel { color, category, side, anchor } => {
                format!("{color} {category} to the {} of the {anchor}", side.word())
            }
        }
    }

    /// Template bindings recorded on the task instance.
    pub fn slots(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: &str| {
            m.insert(k.to_string(), v.to_string());
        };
        match self {
            QuestionSpec::Exist { category } | QuestionSpec::ExistC { category } => {
                put("category", category)
            }
            QuestionSpec::ExistAttrNot { category, value }
            | QuestionSpec::ExistAttrNotC { category, value }
            | QuestionSpec::ExistStateNot { category, value }
            | QuestionSpec::ExistMaterial { category, value } => {
                put("category", category);
                put("value", value);
            }
            QuestionSpec::VerifyAttrs { category, color, state } => {
                put("category", category);
                put("color", color);
                put("state", state);
            }
            QuestionSpec::PositionVerify { category, side } => {
                put("category", category);
                put("side", side.word());
            }
            QuestionSpec::TwoDifferent { cat_a, cat_b } | QuestionSpec::TwoSame { cat_a, cat_b } => {
                put("cat_a", cat_a);
                put("cat_b", cat_b);
            }
            QuestionSpec::GroupDifferent { group } | QuestionSpec::GroupSame { group } => {
                put("group", group)
            }
            QuestionSpec::LeftOf { cat_a, cat_b } | QuestionSpec::RightOf { cat_a, cat_b } => {
                put("cat_a", cat_a);
                put("cat_b", cat_b);
            }
            QuestionSpec::Count { category }
            | QuestionSpec::ColorQuery { category }
            | QuestionSpec::SideQuery { category }
            | QuestionSpec::LargestAttr { category }
            | QuestionSpec::SmallestAttr { category } => put("category", category),
            QuestionSpec::StateChoose { category, option_a, option_b }
            | QuestionSpec::MaterialChoose { category, option_a, option_b } => {
                put("category", category);
                put("option_a", option_a);
                put("option_b", option_b);
            }
            QuestionSpec::ItmAttr { color, category } => {
                put("form", "attr");
                put("color", color);
                put("category", category);
            }
            QuestionSpec::ItmRel { cat_a, side, cat_b } => {
                put("form", "rel");
                put("cat_a", cat_a);
                put("side", side.word());
                put("cat_b", cat_b);
            }
            QuestionSpec::DetectAttr { color, category } => {
                put("form", "attr");
                put("color", color);
                put("category", category);
            }
            QuestionSpec::DetectRel { color, category, side, anchor } => {
                put("form", "rel");
                put("color", color);
                put("category", category);
                put("side", side.word());
                put("anchor", anchor);
            }
        }
        m
    }
}

/// Rebuild a question spec from a task's recorded slots.
pub fn spec_from_slots(question_type: &str, slots: &BTreeMap<String, String>) -> Option<QuestionSpec> {
    let get = |k: &str| slots.get(k).cloned();
    let spec = match question_type {
        "exist" => QuestionSpec::Exist { category: get("category")? },
        "existC" => QuestionSpec::ExistC { category: get("category")? },
        "existAttrNot" => QuestionSpec::ExistAttrNot { category: get("category")?, value: get("value")? },
        "existAttrNotC" => {
            QuestionSpec::ExistAttrNotC { category: get("category")?, value: get("value")? }
        }
        "existStateNot" => {
            QuestionSpec::ExistStateNot { category: get("category")?, value: get("value")? }
        }
        "existMaterialC" => {
            QuestionSpec::ExistMaterial { category: get("category")?, value: get("value")? }
        }
        "verifyAttrsC" => QuestionSpec::VerifyAttrs {
            category: get("category")?,
            color: get("color")?,
            state: get("state")?,
        },
        "positionVerifyC" => QuestionSpec::PositionVerify {
            category: get("category")?,
            side: Side::parse(&get("side")?)?,
        },
        "twoDifferent" => QuestionSpec::TwoDifferent { cat_a: get("cat_a")?, cat_b: get("cat_b")? },
        "twoSame" => QuestionSpec::TwoSame { cat_a: get("cat_a")?, cat_b: get("cat_b")? },
        "diffAnimals" => QuestionSpec::GroupDifferent { group: get("group")? },
        "sameVehicles" => QuestionSpec::GroupSame { group: get("group")? },
        "leftOf" => QuestionSpec::LeftOf { cat_a: get("cat_a")?, cat_b: get("cat_b")? },
        "rightOf" => QuestionSpec::RightOf { cat_a: get("cat_a")?, cat_b: get("cat_b")? },
        "count" => QuestionSpec::Count { category: get("category")? },
        "colorQuery" => QuestionSpec::ColorQuery { category: get("category")? },
        "stateChoose" => QuestionSpec::StateChoose {
            category: get("category")?,
            option_a: get("option_a")?,
            option_b: get("option_b")?,
        },
        "materialChoose" => QuestionSpec::MaterialChoose {
            category: get("category")?,
            option_a: get("option_a")?,
            option_b: get("option_b")?,
        },
        "relO" => QuestionSpec::SideQuery { category: get("category")? },
        "largestAttr" => QuestionSpec::LargestAttr { category: get("category")? },
        "smallestAttr" => QuestionSpec::SmallestAttr { category: get("category")? },
        "itm" => match get("form")?.as_str() {
            "attr" => QuestionSpec::ItmAttr { color: get("color")?, category: get("category")? },
            "rel" => QuestionSpec::ItmRel {
                cat_a: get("cat_a")?,
                side: Side::parse(&get("side")?)?,
                cat_b: get("cat_b")?,
            },
            _ => return None,
        },
        "detect" => match get("form")?.as_str() {
            "attr" => QuestionSpec::DetectAttr { color: get("color")?, category: get("category")? },
            "rel" => QuestionSpec::DetectRel {
                color: get("color")?,
                category: get("category")?,
                side: Side::parse(&get("side")?)?,
                anchor: get("anchor")?,
            },
            _ => return None,
        },
        _ => return None,
    };
    Some(spec)
}

fn yesno(b: bool) -> Answer {
    Answer::Text(if b { "yes" } else { "no" }.to_string())
}

fn first_of<'a>(scene: &'a Scene, category: &str) -> Option<&'a SceneObject> {
    scene.objects_of(category).next()
}

fn attr_of<'a>(obj: &'a SceneObject, name: &str) -> &'a str {
    obj.attribute(name).unwrap_or("")
}

fn distinct_group_categories(scene: &Scene, taxonomy: &Taxonomy, group: &str) -> usize {
    let Some(g) = taxonomy.group(group) else { return 0 };
    let mut present = std::collections::BTreeSet::new();
    for obj in &scene.objects {
        if g.members.iter().any(|m| m == &obj.category) {
            present.insert(obj.category.clone());
        }
    }
    present.len()
}

/// Gold-answer oracle: a deterministic, pure function of the scene graph.
///
/// Unsatisfiable predicates yield the semantically correct negative answer
/// (or an empty box list for detection); the oracle never fails.
pub fn oracle_answer(scene: &Scene, taxonomy: &Taxonomy, spec: &QuestionSpec) -> Answer {
    let half_w = scene.canvas_width as f64 / 2.0;
    match spec {
        QuestionSpec::Exist { category } | QuestionSpec::ExistC { category } => {
            yesno(first_of(scene, category).is_some())
        }
        QuestionSpec::ExistAttrNot { category, value }
        | QuestionSpec::ExistAttrNotC { category, value }
        | QuestionSpec::ExistStateNot { category, value } => {
            yesno(scene.objects_of(category).any(|o| !o.has_attribute_value(value)))
        }
        QuestionSpec::ExistMaterial { category, value } => {
            yesno(scene.objects_of(category).any(|o| o.has_attribute_value(value)))
        }
        QuestionSpec::VerifyAttrs { category, color, state } => match first_of(scene, category) {
            Some(o) => yesno(attr_of(o, "color") == color && attr_of(o, "state") == state),
            None => yesno(false),
        },
        QuestionSpec::PositionVerify { category, side } => match first_of(scene, category) {
            Some(o) => {
                let hc = o.bbox.horizontal_center();
                yesno(match side {
                    Side::Right => hc > half_w,
                    Side::Left => hc < half_w,
                })
            }
            None => yesno(false),
        },
        QuestionSpec::TwoDifferent { cat_a, cat_b } => {
            match (first_of(scene, cat_a), first_of(scene, cat_b)) {
                (Some(a), Some(b)) => yesno(attr_of(a, "color") != attr_of(b, "color")),
                _ => yesno(false),
            }
        }
        QuestionSpec::TwoSame { cat_a, cat_b } => {
            match (first_of(scene, cat_a), first_of(scene, cat_b)) {
                (Some(a), Some(b)) => yesno(attr_of(a, "color") == attr_of(b, "color")),
                _ => yesno(false),
            }
        }
        QuestionSpec::GroupDifferent { group } => {
            yesno(distinct_group_categories(scene, taxonomy, group) > 1)
        }
        QuestionSpec::GroupSame { group } => {
            yesno(distinct_group_categories(scene, taxonomy, group) == 1)
        }
        QuestionSpec::LeftOf { cat_a, cat_b } => {
            match (first_of(scene, cat_a), first_of(scene, cat_b)) {
                (Some(a), Some(b)) => {
                    yesno(a.bbox.horizontal_center() < b.bbox.horizontal_center())
                }
                _ => yesno(false),
            }
        }
        QuestionSpec::RightOf { cat_a, cat_b } => {
            match (first_of(scene, cat_a), first_of(scene, cat_b)) {
                (Some(a), Some(b)) => {
                    yesno(a.bbox.horizontal_center() > b.bbox.horizontal_center())
                }
                _ => yesno(false),
            }
        }
        QuestionSpec::Count { category } => {
            Answer::Text(scene.objects_of(category).count().to_string())
        }
        QuestionSpec::ColorQuery { category } => match first_of(scene, category) {
            Some(o) => Answer::Text(attr_of(o, "color").to_string()),
            None => Answer::Text("unknown".to_string()),
        },
        QuestionSpec::StateChoose { category, .. } => match first_of(scene, category) {
            Some(o) => Answer::Text(attr_of(o, "state").to_string()),
            None => Answer::Text("unknown".to_string()),
        },
        QuestionSpec::MaterialChoose { category, .. } => match first_of(scene, category) {
            Some(o) => Answer::Text(attr_of(o, "material").to_string()),
            None => Answer::Text("unknown".to_string()),
        },
        QuestionSpec::SideQuery { category } => match first_of(scene, category) {
            Some(o) => Answer::Text(
                if o.bbox.horizontal_center() > half_w { "right" } else { "left" }.to_string(),
            ),
            None => Answer::Text("unknown".to_string()),
        },
        QuestionSpec::LargestAttr { category } => {
            let best = scene.objects_of(category).max_by_key(|o| o.bbox.area());
            match best {
                Some(o) => Answer::Text(attr_of(o, "color").to_string()),
                None => Answer::Text("unknown".to_string()),
            }
        }
        QuestionSpec::SmallestAttr { category } => {
            let best = scene.objects_of(category).min_by_key(|o| o.bbox.area());
            match best {
                Some(o) => Answer::Text(attr_of(o, "color").to_string()),
                None => Answer::Text("unknown".to_string()),
            }
        }
        QuestionSpec::ItmAttr { color, category } => {
            yesno(scene.objects_of(category).any(|o| o.has_attribute_value(color)))
        }
        QuestionSpec::ItmRel { cat_a, side, cat_b } => {
            let mut found = false;
            for a in scene.objects_of(cat_a) {
                for b in scene.objects_of(cat_b) {
                    let (ha, hb) = (a.bbox.horizontal_center(), b.bbox.horizontal_center());
                    let ok = match side {
                        Side::Left => ha < hb,
                        Side::Right => ha > hb,
                    };
                    if ok {
                        found = true;
                    }
                }
            }
            yesno(found)
        }
        QuestionSpec::DetectAttr { color, category } => {
            let boxes = scene
                .objects_of(category)
                .filter(|o| o.has_attribute_value(color))
                .map(|o| o.bbox)
                .collect();
            Answer::Boxes(boxes)
        }
        QuestionSpec::DetectRel { color, category, side, anchor } => {
            let Some(anchor_obj) = first_of(scene, anchor) else {
                return Answer::Boxes(vec![]);
            };
            let boxes = scene
                .objects_of(category)
                .filter(|o| o.has_attribute_value(color))
                .filter(|o| {
                    let cx = o.bbox.horizontal_center();
                    match side {
                        Side::Left => cx < anchor_obj.bbox.left as f64,
                        Side::Right => cx >= anchor_obj.bbox.right as f64,
                    }
                })
                .map(|o| o.bbox)
                .collect();
            Answer::Boxes(boxes)
        }
    }
}

fn is_boolean(answer: &Answer) -> Option<bool> {
    match answer {
        Answer::Text(t) if t == "yes" => Some(true),
        Answer::Text(t) if t == "no" => Some(false),
        _ => None,
    }
}

/// Categories with exactly one instance in the scene.
fn unique_categories(scene: &Scene) -> Vec<&str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &scene.objects {
        *counts.entry(o.category.as_str()).or_insert(0) += 1;
    }
    counts.into_iter().filter(|(_, n)| *n == 1).map(|(c, _)| c).collect()
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> Option<&'a T> {
    items.choose(rng)
}

/// One instantiation attempt for a question type on a random scene.
/// Returns the scene index and a bound spec, without checking polarity.
fn draw_spec(
    qtype: &str,
    scenes: &[Scene],
    taxonomy: &Taxonomy,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, QuestionSpec)> {
    let si = rng.gen_range(0..scenes.len());
    let scene = &scenes[si];
    let cats: Vec<String> = taxonomy.categories().iter().map(|s| s.to_string()).collect();
    let colors = taxonomy.attribute_values("color");
    let materials = taxonomy.attribute_values("material");
    let states = taxonomy.attribute_values("state");
    let present: Vec<String> = {
        let mut set = std::collections::BTreeSet::new();
        for o in &scene.objects {
            set.insert(o.category.clone());
        }
        set.into_iter().collect()
    };
    let unique: Vec<String> = unique_categories(scene).into_iter().map(String::from).collect();

    let spec = match qtype {
        "exist" => QuestionSpec::Exist { category: pick(rng, &cats)?.clone() },
        "existC" => QuestionSpec::ExistC { category: pick(rng, &cats)?.clone() },
        "existAttrNot" => QuestionSpec::ExistAttrNot {
            category: pick(rng, &present)?.clone(),
            value: pick(rng, colors)?.clone(),
        },
        "existAttrNotC" => QuestionSpec::ExistAttrNotC {
            category: pick(rng, &present)?.clone(),
            value: pick(rng, colors)?.clone(),
        },
        "existStateNot" => QuestionSpec::ExistStateNot {
            category: pick(rng, &present)?.clone(),
            value: pick(rng, states)?.clone(),
        },
        "existMaterialC" => QuestionSpec::ExistMaterial {
            category: pick(rng, &present)?.clone(),
            value: pick(rng, materials)?.clone(),
        },
        "verifyAttrsC" => {
            let category = pick(rng, &unique)?.clone();
            let obj = first_of(scene, &category)?;
            // Half the draws keep the true attributes, half corrupt one.
            let (mut color, mut state) =
                (attr_of(obj, "color").to_string(), attr_of(obj, "state").to_string());
            if rng.gen_bool(0.5) {
                if rng.gen_bool(0.5) {
                    color = pick(rng, colors)?.clone();
                } else {
                    state = pick(rng, states)?.clone();
                }
            }
            QuestionSpec::VerifyAttrs { category, color, state }
        }
        "positionVerifyC" => QuestionSpec::PositionVerify {
            category: pick(rng, &unique)?.clone(),
            side: if rng.gen_bool(0.5) { Side::Left } else { Side::Right },
        },
        "twoDifferent" | "twoSame" => {
            if unique.len() < 2 {
                return None;
            }
            let mut idx: Vec<usize> = (0..unique.len()).collect();
            idx.shuffle(rng);
            let (a, b) = (unique[idx[0]].clone(), unique[idx[1]].clone());
            if qtype == "twoDifferent" {
                QuestionSpec::TwoDifferent { cat_a: a, cat_b: b }
            } else {
                QuestionSpec::TwoSame { cat_a: a, cat_b: b }
            }
        }
        "diffAnimals" | "sameVehicles" => {
            let group = if qtype == "diffAnimals" { "animal" } else { "vehicle" };
            let g = taxonomy.group(group)?;
            let members_in_scene = scene
                .objects
                .iter()
                .filter(|o| g.members.iter().any(|m| m == &o.category))
                .count();
            if members_in_scene < 2 {
                return None;
            }
            if qtype == "diffAnimals" {
                QuestionSpec::GroupDifferent { group: group.to_string() }
            } else {
                QuestionSpec::GroupSame { group: group.to_string() }
            }
        }
        "leftOf" | "rightOf" => {
            if unique.len() < 2 {
                return None;
            }
            let mut idx: Vec<usize> = (0..unique.len()).collect();
            idx.shuffle(rng);
            let (a, b) = (unique[idx[0]].clone(), unique[idx[1]].clone());
            if qtype == "leftOf" {
                QuestionSpec::LeftOf { cat_a: a, cat_b: b }
            } else {
                QuestionSpec::RightOf { cat_a: a, cat_b: b }
            }
        }
        "count" => {
            let category =
                if rng.gen_bool(0.7) && !present.is_empty() { pick(rng, &present)? } else { pick(rng, &cats)? };
            QuestionSpec::Count { category: category.clone() }
        }
        "colorQuery" => QuestionSpec::ColorQuery { category: pick(rng, &unique)?.clone() },
        "stateChoose" | "materialChoose" => {
            let category = pick(rng, &unique)?.clone();
            let obj = first_of(scene, &category)?;
            let (attr, values) = if qtype == "stateChoose" { ("state", states) } else { ("material", materials) };
            let actual = attr_of(obj, attr).to_string();
            let others: Vec<String> = values.iter().filter(|v| **v != actual).cloned().collect();
            let other = pick(rng, &others)?.clone();
            let (option_a, option_b) =
                if rng.gen_bool(0.5) { (actual.clone(), other) } else { (other, actual.clone()) };
            if qtype == "stateChoose" {
                QuestionSpec::StateChoose { category, option_a, option_b }
            } else {
                QuestionSpec::MaterialChoose { category, option_a, option_b }
            }
        }
        "relO" => QuestionSpec::SideQuery { category: pick(rng, &unique)?.clone() },
        "largestAttr" | "smallestAttr" => {
            // Needs >= 2 instances with a strict area extreme.
            let mut eligible: Vec<String> = Vec::new();
            for c in &present {
                let areas: Vec<i64> = scene.objects_of(c).map(|o| o.bbox.area()).collect();
                if areas.len() < 2 {
                    continue;
                }
                let max = areas.iter().max().unwrap();
                let min = areas.iter().min().unwrap();
                let strict_max = areas.iter().filter(|a| *a == max).count() == 1;
                let strict_min = areas.iter().filter(|a| *a == min).count() == 1;
                if (qtype == "largestAttr" && strict_max) || (qtype == "smallestAttr" && strict_min) {
                    eligible.push(c.clone());
                }
            }
            let category = pick(rng, &eligible)?.clone();
            if qtype == "largestAttr" {
                QuestionSpec::LargestAttr { category }
            } else {
                QuestionSpec::SmallestAttr { category }
            }
        }
        "itm" => {
            if rng.gen_bool(0.5) {
                // Attribute caption; draw from a real object half the time.
                let (color, category) = if rng.gen_bool(0.5) && !scene.objects.is_empty() {
                    let o = &scene.objects[rng.gen_range(0..scene.objects.len())];
                    (attr_of(o, "color").to_string(), o.category.clone())
                } else {
                    (pick(rng, colors)?.clone(), pick(rng, &present)?.clone())
                };
                QuestionSpec::ItmAttr { color, category }
            } else {
                if present.len() < 2 {
                    return None;
                }
                let mut idx: Vec<usize> = (0..present.len()).collect();
                idx.shuffle(rng);
                QuestionSpec::ItmRel {
                    cat_a: present[idx[0]].clone(),
                    side: if rng.gen_bool(0.5) { Side::Left } else { Side::Right },
                    cat_b: present[idx[1]].clone(),
                }
            }
        }
        "detect" => {
            if scene.objects.is_empty() {
                return None;
            }
            let target = &scene.objects[rng.gen_range(0..scene.objects.len())];
            let color = attr_of(target, "color").to_string();
            let category = target.category.clone();
            if rng.gen_bool(0.5) {
                QuestionSpec::DetectAttr { color, category }
            } else {
                // Relation form: anchor must be a distinct, unique category.
                let anchors: Vec<String> =
                    unique.iter().filter(|c| **c != category).cloned().collect();
                let anchor = pick(rng, &anchors)?.clone();
                let anchor_obj = first_of(scene, &anchor)?;
                let cx = target.bbox.horizontal_center();
                let side = if cx < anchor_obj.bbox.left as f64 {
                    Side::Left
                } else if cx >= anchor_obj.bbox.right as f64 {
                    Side::Right
                } else {
                    return None;
                };
                QuestionSpec::DetectRel { color, category, side, anchor }
            }
        }
        _ => return None,
    };
    Some((si, spec))
}

fn acceptable(spec: &QuestionSpec, answer: &Answer, target: Option<bool>) -> bool {
    // Detection instances must have at least one gold box so that the task is
    // not solvable by returning an empty list.
    if let Answer::Boxes(bs) = answer {
        if bs.is_empty() {
            return false;
        }
    }
    // Choose questions must offer the true value among the options.
    match spec {
        QuestionSpec::StateChoose { option_a, option_b, .. }
        | QuestionSpec::MaterialChoose { option_a, option_b, .. } => {
            if let Answer::Text(t) = answer {
                if t != option_a && t != option_b {
                    return false;
                }
            }
        }
        _ => {}
    }
    match target {
        None => true,
        Some(want) => is_boolean(answer) == Some(want),
    }
}

pub(super) fn generate_tasks_impl(
    config: &WorldConfig,
    scenes: &[Scene],
    per_type: usize,
    seed: u64,
) -> Result<Vec<TaskInstance>, WorldError> {
    if scenes.is_empty() {
        return Err(WorldError::InvalidConfig("no scenes provided".into()));
    }
    let taxonomy = &config.taxonomy;
    let mut tasks = Vec::with_capacity(config.question_types.len() * per_type);
    for qtype in &config.question_types {
        let balanced = boolean_types().contains(&qtype.as_str());
        for i in 0..per_type {
            let mut rng =
                util::rng_from_seed(util::derive_seed(seed, &["task", qtype, &i.to_string()]));
            let target = if balanced { Some(i % 2 == 0) } else { None };
            let mut found: Option<(usize, QuestionSpec, Answer)> = None;
            // First pass honors the polarity target, second pass relaxes it.
            'search: for pass_target in [target, None] {
                for _ in 0..240 {
                    if let Some((si, spec)) = draw_spec(qtype, scenes, taxonomy, &mut rng) {
                        let answer = oracle_answer(&scenes[si], taxonomy, &spec);
                        if acceptable(&spec, &answer, pass_target) {
                            found = Some((si, spec, answer));
                            break 'search;
                        }
                    }
                }
            }
            let Some((si, spec, gold)) = found else {
                return Err(WorldError::TemplateUnsatisfiable { question_type: qtype.clone() });
            };
            tasks.push(TaskInstance {
                format_version: FORMAT_VERSION.to_string(),
                id: format!("{qtype}-{i:04}"),
                scene_ref: scenes[si].id(),
                query: spec.query(),
                question_type: qtype.clone(),
                task_kind: spec.task_kind(),
                gold,
                slots: spec.slots(),
            });
        }
    }
    Ok(tasks)
}
