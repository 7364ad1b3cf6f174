//! Prompt assembly shared by every policy kind.
//!
//! The rendered prompt is the API specification, the fixed instruction
//! header, the in-context examples in order, and the target query, ending in
//! `Program:` so a completion starts at the program body. All text is
//! LF-normalized so identical inputs render identical bytes on every
//! platform.

use serde::{Deserialize, Serialize};

use super::PolicyError;
use crate::scene::{TaskInstance, TaskKind};
use crate::util;

/// Instruction block between the API spec and the examples. The fine-tune
/// export reuses it verbatim.
pub const INSTRUCTION_HEADER: &str = "Write a function using Python and the ImagePatch class \
(above) that could be executed to provide an answer to the query.\n\nConsider the following \
guidelines:\n- Use base Python (comparison, sorting) for basic logical operations, \
left/right/up/down, math, etc.\n\n";

/// The bundled default API specification text.
pub fn default_api_spec() -> &'static str {
    include_str!("../../assets/imagepatch_api.txt")
}

/// Instruction text for one query, up to and including `Program:`; this is
/// the instruction field of fine-tune records.
pub fn instruction_text(query: &str) -> String {
    format!("<s>{INSTRUCTION_HEADER}Query: {query}\nProgram:")
}

/// Sampling parameters attached to a prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptParams {
    pub temperature: f64,
    pub top_p: f64,
    /// 0 disables top-k filtering.
    pub top_k: u32,
    pub max_new_tokens: u32,
}

impl Default for PromptParams {
    fn default() -> Self {
        PromptParams { temperature: 0.7, top_p: 0.9, top_k: 0, max_new_tokens: 320 }
    }
}

impl PromptParams {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.temperature <= 0.0 {
            return Err(PolicyError::InvalidParam("temperature must be positive".into()));
        }
        if !(0.0 < self.top_p && self.top_p <= 1.0) {
            return Err(PolicyError::InvalidParam("top_p must be in (0, 1]".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(PolicyError::InvalidParam("max_new_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub api_spec: String,
    /// (query, program) pairs, in prompt order.
    pub examples: Vec<(String, String)>,
    pub query: String,
    pub params: PromptParams,
}

impl PromptBundle {
    /// Render the prompt bytes sent to a policy.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(self.api_spec.trim_end());
        out.push_str("\n\n");
        out.push_str(INSTRUCTION_HEADER);
        for (query, program) in &self.examples {
            out.push_str("Query: ");
            out.push_str(query);
            out.push_str("\nProgram:\n");
            out.push_str(program.trim_end());
            out.push_str("\n\n");
        }
        out.push_str("Query: ");
        out.push_str(&self.query);
        out.push_str("\nProgram:\n");
        out
    }

    pub fn render_hash(&self) -> String {
        util::hex64(util::fnv1a(self.render().as_bytes()))
    }
}

/// Assemble the prompt for a task. Deterministic; fails only on an empty API
/// spec. The expected example count (3, or 5 for detection) is enforced by
/// the run configuration, not here, so tests can assemble smaller prompts.
pub fn assemble_prompt(
    api_spec: &str,
    examples: &[(String, String)],
    task: &TaskInstance,
    params: &PromptParams,
) -> Result<PromptBundle, PolicyError> {
    if api_spec.trim().is_empty() {
        return Err(PolicyError::MissingApiSpec);
    }
    params.validate()?;
    let normalize = |s: &str| util::normalize_newlines(s);
    Ok(PromptBundle {
        api_spec: normalize(api_spec),
        examples: examples.iter().map(|(q, p)| (normalize(q), normalize(p))).collect(),
        query: normalize(&task.query).trim().to_string(),
        params: params.clone(),
    })
}

/// Built-in default in-context examples: 3 for VQA and ITM, 5 for detection.
/// Every program is legal VPL.
pub fn default_examples(kind: TaskKind) -> Vec<(String, String)> {
    let pair = |q: &str, p: &str| (q.to_string(), p.to_string());
    match kind {
        TaskKind::Vqa => vec![
            pair(
                "Are there dogs?",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    return bool_to_yesno(image_patch.exists(\"dog\"))\n",
            ),
            pair(
                "What color is the largest truck?",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"truck\")\n    patches.sort(key=lambda x: x.area)\n    patch = patches[-1]\n    return patch.simple_query(\"What is the color?\")\n",
            ),
            pair(
                "How many mugs are there?",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"mug\")\n    return len(patches)\n",
            ),
        ],
        TaskKind::Itm => vec![
            pair(
                "a green truck",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"truck\")\n    answer = False\n    for patch in patches:\n        if patch.verify_property(\"truck\", \"green\"):\n            answer = True\n    return bool_to_yesno(answer)\n",
            ),
            pair(
                "a dog to the left of a cat",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    first_patches = image_patch.find(\"dog\")\n    second_patches = image_patch.find(\"cat\")\n    answer = False\n    for first in first_patches:\n        for second in second_patches:\n            if first.horizontal_center < second.horizontal_center:\n                answer = True\n    return bool_to_yesno(answer)\n",
            ),
            pair(
                "a red ball",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"ball\")\n    answer = False\n    for patch in patches:\n        if patch.verify_property(\"ball\", \"red\"):\n            answer = True\n    return bool_to_yesno(answer)\n",
            ),
        ],
        TaskKind::Detection => vec![
            pair(
                "green truck",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"truck\")\n    result = []\n    for patch in patches:\n        if patch.verify_property(\"truck\", \"green\"):\n            result.append(patch)\n    return result\n",
            ),
            pair(
                "red mug",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"mug\")\n    result = []\n    for patch in patches:\n        if patch.verify_property(\"mug\", \"red\"):\n            result.append(patch)\n    return result\n",
            ),
            pair(
                "blue car to the left of the dog",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    anchor = image_patch.find(\"dog\")[0]\n    region = image_patch.crop_left_of_bbox(anchor.left, anchor.upper, anchor.right, anchor.lower)\n    patches = region.find(\"car\")\n    result = []\n    for patch in patches:\n        if patch.verify_property(\"car\", \"blue\"):\n            result.append(patch)\n    return result\n",
            ),
            pair(
                "yellow bird",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"bird\")\n    result = []\n    for patch in patches:\n        if patch.verify_property(\"bird\", \"yellow\"):\n            result.append(patch)\n    return result\n",
            ),
            pair(
                "black chair to the right of the table",
                "def execute_command(image):\n    image_patch = ImagePatch(image)\n    anchor = image_patch.find(\"table\")[0]\n    region = image_patch.crop_right_of_bbox(anchor.left, anchor.upper, anchor.right, anchor.lower)\n    patches = region.find(\"chair\")\n    result = []\n    for patch in patches:\n        if patch.verify_property(\"chair\", \"black\"):\n            result.append(patch)\n    return result\n",
            ),
        ],
    }
}
