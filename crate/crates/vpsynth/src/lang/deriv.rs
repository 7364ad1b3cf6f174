//! Program grammar: a finite set of program templates with typed slots, the
//! derivation representation, and extraction of derivations from parsed
//! programs.
//!
//! A derivation is the ordered list of grammar choices (nonterminal,
//! production id) plus the slot fillers; replaying it through the grammar
//! rebuilds the program with canonical variable names. Extraction works on
//! normalized trees, so two programs that differ only in variable naming
//! yield the same derivation. Programs legal in VPL but not covered by any
//! template (chained arithmetic, ad-hoc shapes) are `OutOfGrammar`: still
//! executable, just not clonable by the grammar policy.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::ast::{build as b, BinOp, Expr, Program, Stmt};
use super::normalize::normalize;
use crate::scene::Taxonomy;
use crate::util;

/// Bump when template shapes or ids change.
pub const GRAMMAR_REVISION: u32 = 1;

/// Marker prefix for string-slot placeholders during matching. Control
/// character, so it cannot collide with taxonomy words.
const MARKER: char = '\u{1}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    ObjectName,
    AttrValue,
    Question,
    Direction,
    Extreme,
    Group,
}

impl SlotKind {
    pub fn all() -> &'static [SlotKind] {
        &[
            SlotKind::ObjectName,
            SlotKind::AttrValue,
            SlotKind::Question,
            SlotKind::Direction,
            SlotKind::Extreme,
            SlotKind::Group,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            SlotKind::ObjectName => "object_name",
            SlotKind::AttrValue => "attr_value",
            SlotKind::Question => "question",
            SlotKind::Direction => "direction",
            SlotKind::Extreme => "extreme",
            SlotKind::Group => "group",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotFiller {
    pub kind: SlotKind,
    pub value: String,
}

/// Grammar choices plus slot fillers; uniquely reconstructs a program
/// modulo variable naming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub grammar_version: String,
    /// `(nonterminal, production id)` pairs in derivation order.
    pub steps: Vec<(String, u32)>,
    pub fillers: Vec<SlotFiller>,
}

impl Derivation {
    pub fn template_id(&self) -> Option<u32> {
        self.steps.iter().find(|(nt, _)| nt == NT_BODY).map(|(_, id)| *id)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DeriveError {
    #[error("program is outside the policy grammar")]
    OutOfGrammar,
    #[error("grammar version mismatch: derivation has {derivation}, grammar is {grammar}")]
    VersionMismatch { derivation: String, grammar: String },
    #[error("malformed derivation: {0}")]
    Malformed(String),
}

/// Nonterminal names as they appear in derivations and weight tables.
pub const NT_PROGRAM: &str = "program";
pub const NT_BODY: &str = "body";

pub struct TemplateInfo {
    pub id: u32,
    pub name: &'static str,
    pub slots: &'static [SlotKind],
}

use SlotKind::{AttrValue as V, Direction as D, Extreme as E, Group as G, ObjectName as O, Question as Q};

pub const TEMPLATES: &[TemplateInfo] = &[
    TemplateInfo { id: 0, name: "const_yes", slots: &[] },
    TemplateInfo { id: 1, name: "const_no", slots: &[] },
    TemplateInfo { id: 2, name: "exists_yesno", slots: &[O] },
    TemplateInfo { id: 3, name: "exists_attr_yesno", slots: &[O, V] },
    TemplateInfo { id: 4, name: "exists_not_attr_yesno", slots: &[O, V] },
    TemplateInfo { id: 5, name: "verify_two_attrs", slots: &[O, V, V] },
    TemplateInfo { id: 6, name: "position_side_verify", slots: &[O, D] },
    TemplateInfo { id: 7, name: "choose_via_query", slots: &[O, Q] },
    TemplateInfo { id: 8, name: "two_query_different", slots: &[O, O, Q] },
    TemplateInfo { id: 9, name: "two_query_same", slots: &[O, O, Q] },
    TemplateInfo { id: 10, name: "group_kinds_different", slots: &[G] },
    TemplateInfo { id: 11, name: "group_kinds_same", slots: &[G] },
    TemplateInfo { id: 12, name: "count_len", slots: &[O] },
    TemplateInfo { id: 13, name: "side_query", slots: &[O] },
    TemplateInfo { id: 14, name: "extreme_query", slots: &[O, E, Q] },
    TemplateInfo { id: 15, name: "pair_relation_verify", slots: &[O, D, O] },
    TemplateInfo { id: 16, name: "any_pair_relation", slots: &[O, D, O] },
    TemplateInfo { id: 17, name: "detect_all", slots: &[O] },
    TemplateInfo { id: 18, name: "detect_attr_filter", slots: &[O, V] },
    TemplateInfo { id: 19, name: "detect_attr_rel_crop", slots: &[O, V, D, O] },
];

/// The closed catalogue of sub-questions usable with `simple_query`.
pub const SUB_QUESTIONS: &[&str] = &[
    "What is this?",
    "What is the color?",
    "What is the material?",
    "What is the state?",
];

pub const DIRECTIONS: &[&str] = &["left", "right"];
pub const EXTREMES: &[&str] = &["largest", "smallest"];

/// The policy grammar bound to a taxonomy (group expansions and slot
/// vocabularies come from it).
#[derive(Debug, Clone)]
pub struct Grammar {
    version: String,
    groups: Vec<(String, Vec<String>)>,
    /// Attribute name -> its value vocabulary, in taxonomy order.
    attributes: Vec<(String, Vec<String>)>,
    categories: Vec<String>,
    attr_values: Vec<String>,
    questions: Vec<String>,
    directions: Vec<String>,
    extremes: Vec<String>,
    group_names: Vec<String>,
}

impl Grammar {
    pub fn new(taxonomy: &Taxonomy) -> Grammar {
        let groups: Vec<(String, Vec<String>)> =
            taxonomy.groups.iter().map(|g| (g.name.clone(), g.members.clone())).collect();
        let attributes: Vec<(String, Vec<String>)> =
            taxonomy.attributes.iter().map(|a| (a.name.clone(), a.values.clone())).collect();
        let categories: Vec<String> = taxonomy.categories().iter().map(|s| s.to_string()).collect();
        let attr_values: Vec<String> =
            taxonomy.all_attribute_values().iter().map(|s| s.to_string()).collect();
        let questions: Vec<String> = SUB_QUESTIONS.iter().map(|s| s.to_string()).collect();
        let version = format!(
            "vpl-grammar-{GRAMMAR_REVISION}/{}",
            util::hex64(taxonomy.content_hash())
        );
        Grammar {
            version,
            group_names: groups.iter().map(|(n, _)| n.clone()).collect(),
            groups,
            attributes,
            categories,
            attr_values,
            questions,
            directions: DIRECTIONS.iter().map(|s| s.to_string()).collect(),
            extremes: EXTREMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Attribute names with their value vocabularies.
    pub fn attributes(&self) -> &[(String, Vec<String>)] {
        &self.attributes
    }

    pub fn templates() -> &'static [TemplateInfo] {
        TEMPLATES
    }

    pub fn template(id: u32) -> Option<&'static TemplateInfo> {
        TEMPLATES.get(id as usize)
    }

    pub fn template_count() -> usize {
        TEMPLATES.len()
    }

    /// Full vocabulary for a slot kind.
    pub fn slot_vocab(&self, kind: SlotKind) -> &[String] {
        match kind {
            SlotKind::ObjectName => &self.categories,
            SlotKind::AttrValue => &self.attr_values,
            SlotKind::Question => &self.questions,
            SlotKind::Direction => &self.directions,
            SlotKind::Extreme => &self.extremes,
            SlotKind::Group => &self.group_names,
        }
    }

    pub fn group_members(&self, name: &str) -> Option<&[String]> {
        self.groups.iter().find(|(n, _)| n == name).map(|(_, m)| m.as_slice())
    }

    /// Build the program for a template id and filler values.
    pub fn build_template(&self, id: u32, fillers: &[String]) -> Result<Program, DeriveError> {
        let info = Grammar::template(id)
            .ok_or_else(|| DeriveError::Malformed(format!("unknown template id {id}")))?;
        if fillers.len() != info.slots.len() {
            return Err(DeriveError::Malformed(format!(
                "template {} expects {} fillers, got {}",
                info.name,
                info.slots.len(),
                fillers.len()
            )));
        }
        let f = |i: usize| fillers[i].as_str();
        let cmp_for = |dir: &str| -> Result<BinOp, DeriveError> {
            match dir {
                "left" => Ok(BinOp::Lt),
                "right" => Ok(BinOp::Gt),
                other => Err(DeriveError::Malformed(format!("bad direction `{other}`"))),
            }
        };

        let prelude = || b::assign("image_patch", b::call("ImagePatch", vec![b::ident("image")]));
        let find = |name: &str| b::method(b::ident("image_patch"), "find", vec![b::string(name)]);
        let first = |name: &str| b::index(find(name), b::int(0));
        let yesno = |e: Expr| b::ret(b::call("bool_to_yesno", vec![e]));

        let body: Vec<Stmt> = match id {
            0 => vec![b::ret(b::string("yes"))],
            1 => vec![b::ret(b::string("no"))],
            2 => vec![
                prelude(),
                yesno(b::method(b::ident("image_patch"), "exists", vec![b::string(f(0))])),
            ],
            3 | 4 => {
                let check = b::method(
                    b::ident("patch"),
                    "verify_property",
                    vec![b::string(f(0)), b::string(f(1))],
                );
                let cond = if id == 4 { b::not(check) } else { check };
                vec![
                    prelude(),
                    b::assign("patches", find(f(0))),
                    b::assign("answer", b::boolean(false)),
                    b::for_loop(
                        "patch",
                        b::ident("patches"),
                        vec![b::if_stmt(cond, vec![b::assign("answer", b::boolean(true))])],
                    ),
                    yesno(b::ident("answer")),
                ]
            }
            5 => vec![
                prelude(),
                b::assign("patches", find(f(0))),
                b::assign("patch", b::index(b::ident("patches"), b::int(0))),
                yesno(b::binary(
                    BinOp::And,
                    b::method(
                        b::ident("patch"),
                        "verify_property",
                        vec![b::string(f(0)), b::string(f(1))],
                    ),
                    b::method(
                        b::ident("patch"),
                        "verify_property",
                        vec![b::string(f(0)), b::string(f(2))],
                    ),
                )),
            ],
            6 => vec![
                prelude(),
                b::assign("patch", first(f(0))),
                yesno(b::binary(
                    cmp_for(f(1))?,
                    b::attr(b::ident("patch"), "horizontal_center"),
                    b::attr(b::ident("image_patch"), "horizontal_center"),
                )),
            ],
            7 => vec![
                prelude(),
                b::assign("patch", first(f(0))),
                b::ret(b::method(b::ident("patch"), "simple_query", vec![b::string(f(1))])),
            ],
            8 | 9 => {
                let op = if id == 8 { BinOp::Ne } else { BinOp::Eq };
                vec![
                    prelude(),
                    b::assign("first", first(f(0))),
                    b::assign("second", first(f(1))),
                    yesno(b::binary(
                        op,
                        b::method(b::ident("first"), "simple_query", vec![b::string(f(2))]),
                        b::method(b::ident("second"), "simple_query", vec![b::string(f(2))]),
                    )),
                ]
            }
            10 | 11 => {
                let members = self
                    .group_members(f(0))
                    .ok_or_else(|| DeriveError::Malformed(format!("unknown group `{}`", f(0))))?;
                if members.is_empty() {
                    return Err(DeriveError::Malformed(format!("group `{}` is empty", f(0))));
                }
                let mut body = vec![prelude(), b::assign("kinds", b::int(0))];
                for m in members {
                    body.push(b::if_stmt(
                        b::method(b::ident("image_patch"), "exists", vec![b::string(m)]),
                        vec![b::assign(
                            "kinds",
                            b::binary(BinOp::Add, b::ident("kinds"), b::int(1)),
                        )],
                    ));
                }
                let cond = if id == 10 {
                    b::binary(BinOp::Gt, b::ident("kinds"), b::int(1))
                } else {
                    b::binary(BinOp::Eq, b::ident("kinds"), b::int(1))
                };
                body.push(yesno(cond));
                body
            }
            12 => vec![
                prelude(),
                b::assign("patches", find(f(0))),
                b::ret(b::call("len", vec![b::ident("patches")])),
            ],
            13 => vec![
                prelude(),
                b::assign("patch", first(f(0))),
                b::if_stmt(
                    b::binary(
                        BinOp::Gt,
                        b::attr(b::ident("patch"), "horizontal_center"),
                        b::attr(b::ident("image_patch"), "horizontal_center"),
                    ),
                    vec![b::ret(b::string("right"))],
                ),
                b::ret(b::string("left")),
            ],
            14 => {
                let idx = match f(1) {
                    "largest" => b::neg(b::int(1)),
                    "smallest" => b::int(0),
                    other => {
                        return Err(DeriveError::Malformed(format!("bad extreme `{other}`")))
                    }
                };
                vec![
                    prelude(),
                    b::assign("patches", find(f(0))),
                    b::expr_stmt(b::sort_by(b::ident("patches"), "area")),
                    b::assign("patch", b::index(b::ident("patches"), idx)),
                    b::ret(b::method(b::ident("patch"), "simple_query", vec![b::string(f(2))])),
                ]
            }
            15 => vec![
                prelude(),
                b::assign("first", first(f(0))),
                b::assign("second", first(f(2))),
                yesno(b::binary(
                    cmp_for(f(1))?,
                    b::attr(b::ident("first"), "horizontal_center"),
                    b::attr(b::ident("second"), "horizontal_center"),
                )),
            ],
            16 => vec![
                prelude(),
                b::assign("first_patches", find(f(0))),
                b::assign("second_patches", find(f(2))),
                b::assign("answer", b::boolean(false)),
                b::for_loop(
                    "first",
                    b::ident("first_patches"),
                    vec![b::for_loop(
                        "second",
                        b::ident("second_patches"),
                        vec![b::if_stmt(
                            b::binary(
                                cmp_for(f(1))?,
                                b::attr(b::ident("first"), "horizontal_center"),
                                b::attr(b::ident("second"), "horizontal_center"),
                            ),
                            vec![b::assign("answer", b::boolean(true))],
                        )],
                    )],
                ),
                yesno(b::ident("answer")),
            ],
            17 => vec![prelude(), b::ret(find(f(0)))],
            18 => vec![
                prelude(),
                b::assign("patches", find(f(0))),
                b::assign("result", b::list(vec![])),
                b::for_loop(
                    "patch",
                    b::ident("patches"),
                    vec![b::if_stmt(
                        b::method(
                            b::ident("patch"),
                            "verify_property",
                            vec![b::string(f(0)), b::string(f(1))],
                        ),
                        vec![b::expr_stmt(b::method(
                            b::ident("result"),
                            "append",
                            vec![b::ident("patch")],
                        ))],
                    )],
                ),
                b::ret(b::ident("result")),
            ],
            19 => {
                let crop = match f(2) {
                    "left" => "crop_left_of_bbox",
                    "right" => "crop_right_of_bbox",
                    other => {
                        return Err(DeriveError::Malformed(format!("bad direction `{other}`")))
                    }
                };
                vec![
                    prelude(),
                    b::assign("anchor", first(f(3))),
                    b::assign(
                        "region",
                        b::method(
                            b::ident("image_patch"),
                            crop,
                            vec![
                                b::attr(b::ident("anchor"), "left"),
                                b::attr(b::ident("anchor"), "upper"),
                                b::attr(b::ident("anchor"), "right"),
                                b::attr(b::ident("anchor"), "lower"),
                            ],
                        ),
                    ),
                    b::assign("patches", b::method(b::ident("region"), "find", vec![b::string(f(0))])),
                    b::assign("result", b::list(vec![])),
                    b::for_loop(
                        "patch",
                        b::ident("patches"),
                        vec![b::if_stmt(
                            b::method(
                                b::ident("patch"),
                                "verify_property",
                                vec![b::string(f(0)), b::string(f(1))],
                            ),
                            vec![b::expr_stmt(b::method(
                                b::ident("result"),
                                "append",
                                vec![b::ident("patch")],
                            ))],
                        )],
                    ),
                    b::ret(b::ident("result")),
                ]
            }
            _ => return Err(DeriveError::Malformed(format!("unknown template id {id}"))),
        };
        Ok(b::program("image", body))
    }

    /// Rebuild a program from a derivation. The inverse of [`Grammar::derive`]
    /// modulo variable naming.
    pub fn replay(&self, derivation: &Derivation) -> Result<Program, DeriveError> {
        if derivation.grammar_version != self.version {
            return Err(DeriveError::VersionMismatch {
                derivation: derivation.grammar_version.clone(),
                grammar: self.version.clone(),
            });
        }
        let expected_shape = derivation.steps.len() == 2
            && derivation.steps[0] == (NT_PROGRAM.to_string(), 0)
            && derivation.steps[1].0 == NT_BODY;
        if !expected_shape {
            return Err(DeriveError::Malformed("unexpected derivation steps".into()));
        }
        let id = derivation.steps[1].1;
        let info =
            Grammar::template(id).ok_or_else(|| DeriveError::Malformed(format!("bad body id {id}")))?;
        if derivation.fillers.len() != info.slots.len() {
            return Err(DeriveError::Malformed("filler count mismatch".into()));
        }
        for (filler, kind) in derivation.fillers.iter().zip(info.slots) {
            if filler.kind != *kind {
                return Err(DeriveError::Malformed(format!(
                    "filler kind mismatch: expected {}, got {}",
                    kind.name(),
                    filler.kind.name()
                )));
            }
        }
        let values: Vec<String> = derivation.fillers.iter().map(|f| f.value.clone()).collect();
        self.build_template(id, &values)
    }

    /// Extract the derivation of a parsed program, if the grammar covers it.
    pub fn derive(&self, program: &Program) -> Result<Derivation, DeriveError> {
        let input = normalize(program).program;
        for info in TEMPLATES {
            for variant in self.variant_fillers(info) {
                let template = match self.build_template(info.id, &variant) {
                    Ok(t) => t,
                    Err(_) => continue,
                };
                let template = normalize(&template).program;
                let mut bindings: BTreeMap<String, String> = BTreeMap::new();
                if unify_program(&template, &input, &mut bindings) {
                    let mut fillers = Vec::with_capacity(info.slots.len());
                    let mut ok = true;
                    for (i, kind) in info.slots.iter().enumerate() {
                        let value = if variant[i].starts_with(MARKER) {
                            match bindings.get(&variant[i]) {
                                Some(v) => v.clone(),
                                None => {
                                    ok = false;
                                    break;
                                }
                            }
                        } else {
                            variant[i].clone()
                        };
                        fillers.push(SlotFiller { kind: *kind, value });
                    }
                    if ok {
                        return Ok(Derivation {
                            grammar_version: self.version.clone(),
                            steps: vec![
                                (NT_PROGRAM.to_string(), 0),
                                (NT_BODY.to_string(), info.id),
                            ],
                            fillers,
                        });
                    }
                }
            }
        }
        Err(DeriveError::OutOfGrammar)
    }

    /// Candidate filler vectors for matching: string slots get markers, while
    /// structure-determining slots (direction, extreme, group) are enumerated.
    fn variant_fillers(&self, info: &TemplateInfo) -> Vec<Vec<String>> {
        let mut variants: Vec<Vec<String>> = vec![Vec::new()];
        for (i, kind) in info.slots.iter().enumerate() {
            let options: Vec<String> = match kind {
                SlotKind::Direction => self.directions.clone(),
                SlotKind::Extreme => self.extremes.clone(),
                SlotKind::Group => self.group_names.clone(),
                _ => vec![format!("{MARKER}{i}")],
            };
            let mut next = Vec::with_capacity(variants.len() * options.len());
            for v in &variants {
                for opt in &options {
                    let mut nv = v.clone();
                    nv.push(opt.clone());
                    next.push(nv);
                }
            }
            variants = next;
        }
        variants
    }
}

fn unify_program(template: &Program, input: &Program, bind: &mut BTreeMap<String, String>) -> bool {
    template.param == input.param && unify_block(&template.body, &input.body, bind)
}

fn unify_block(t: &[Stmt], i: &[Stmt], bind: &mut BTreeMap<String, String>) -> bool {
    t.len() == i.len() && t.iter().zip(i).all(|(ts, is)| unify_stmt(ts, is, bind))
}

fn unify_stmt(t: &Stmt, i: &Stmt, bind: &mut BTreeMap<String, String>) -> bool {
    match (t, i) {
        (Stmt::Assign { target: tt, value: tv, .. }, Stmt::Assign { target: it, value: iv, .. }) => {
            tt == it && unify_expr(tv, iv, bind)
        }
        (Stmt::ExprStmt { expr: te, .. }, Stmt::ExprStmt { expr: ie, .. }) => unify_expr(te, ie, bind),
        (
            Stmt::For { var: tv, iterable: ti, body: tb, .. },
            Stmt::For { var: iv, iterable: ii, body: ib, .. },
        ) => tv == iv && unify_expr(ti, ii, bind) && unify_block(tb, ib, bind),
        (
            Stmt::If { arms: ta, else_body: te, .. },
            Stmt::If { arms: ia, else_body: ie, .. },
        ) => {
            if ta.len() != ia.len() {
                return false;
            }
            for ((tc, tb), (ic, ib)) in ta.iter().zip(ia) {
                if !unify_expr(tc, ic, bind) || !unify_block(tb, ib, bind) {
                    return false;
                }
            }
            match (te, ie) {
                (None, None) => true,
                (Some(tb), Some(ib)) => unify_block(tb, ib, bind),
                _ => false,
            }
        }
        (Stmt::Return { value: tv, .. }, Stmt::Return { value: iv, .. }) => unify_expr(tv, iv, bind),
        _ => false,
    }
}

fn unify_expr(t: &Expr, i: &Expr, bind: &mut BTreeMap<String, String>) -> bool {
    match (t, i) {
        (Expr::Str { value: tv, .. }, Expr::Str { value: iv, .. }) => {
            if tv.starts_with(MARKER) {
                match bind.get(tv) {
                    Some(existing) => existing == iv,
                    None => {
                        bind.insert(tv.clone(), iv.clone());
                        true
                    }
                }
            } else {
                tv == iv
            }
        }
        (Expr::Ident { name: tn, .. }, Expr::Ident { name: in_, .. }) => tn == in_,
        (Expr::Int { value: tv, .. }, Expr::Int { value: iv, .. }) => tv == iv,
        (Expr::Float { value: tv, .. }, Expr::Float { value: iv, .. }) => tv == iv,
        (Expr::Bool { value: tv, .. }, Expr::Bool { value: iv, .. }) => tv == iv,
        (Expr::List { items: ti, .. }, Expr::List { items: ii, .. }) => {
            ti.len() == ii.len() && ti.iter().zip(ii).all(|(a, b)| unify_expr(a, b, bind))
        }
        (Expr::Attr { obj: to, name: tn, .. }, Expr::Attr { obj: io, name: in_, .. }) => {
            tn == in_ && unify_expr(to, io, bind)
        }
        (Expr::Index { obj: to, index: tx, .. }, Expr::Index { obj: io, index: ix, .. }) => {
            unify_expr(to, io, bind) && unify_expr(tx, ix, bind)
        }
        (Expr::Call { func: tf, args: ta, .. }, Expr::Call { func: if_, args: ia, .. }) => {
            tf == if_
                && ta.len() == ia.len()
                && ta.iter().zip(ia).all(|(a, b)| unify_expr(a, b, bind))
        }
        (
            Expr::MethodCall { obj: to, method: tm, args: ta, .. },
            Expr::MethodCall { obj: io, method: im, args: ia, .. },
        ) => {
            tm == im
                && unify_expr(to, io, bind)
                && ta.len() == ia.len()
                && ta.iter().zip(ia).all(|(a, b)| unify_expr(a, b, bind))
        }
        (
            Expr::SortBy { obj: to, key_attr: tk, .. },
            Expr::SortBy { obj: io, key_attr: ik, .. },
        ) => tk == ik && unify_expr(to, io, bind),
        (
            Expr::Unary { op: top, operand: to, .. },
            Expr::Unary { op: iop, operand: io, .. },
        ) => top == iop && unify_expr(to, io, bind),
        (
            Expr::Binary { op: top, lhs: tl, rhs: tr, .. },
            Expr::Binary { op: iop, lhs: il, rhs: ir, .. },
        ) => top == iop && unify_expr(tl, il, bind) && unify_expr(tr, ir, bind),
        _ => false,
    }
}
