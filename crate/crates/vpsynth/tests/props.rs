//! Property tests over the language and policy invariants, driven by the
//! grammar sampler as the program generator.

use proptest::prelude::*;

use vpsynth::exec::{api_exists, api_find, NoiseModel, PatchVal};
use vpsynth::lang::deriv::Grammar;
use vpsynth::lang::{normalize, parse, pretty_print};
use vpsynth::policy::{sample, ContextWeights, PolicyCheckpoint, SamplePlan};
use vpsynth::reward::Answer;
use vpsynth::scene::{generate_scene, question_catalogue, TaskInstance, TaskKind, Taxonomy, WorldConfig};

fn grammar() -> Grammar {
    Grammar::new(&Taxonomy::default())
}

fn task_for(question_type: &str, query: &str) -> TaskInstance {
    TaskInstance {
        format_version: "1".into(),
        id: "prop".into(),
        scene_ref: "s".into(),
        query: query.into(),
        question_type: question_type.into(),
        task_kind: TaskKind::Vqa,
        gold: Answer::Text("yes".into()),
        slots: Default::default(),
    }
}

/// A spread of queries that exercises every slot kind.
const QUERIES: &[(&str, &str)] = &[
    ("exist", "Are there dogs?"),
    ("existAttrNotC", "Is there a truck in the scene that is not green?"),
    ("verifyAttrsC", "Is the mug yellow and new?"),
    ("positionVerifyC", "Is the cat on the right of the picture?"),
    ("largestAttr", "What color is the largest truck?"),
    ("diffAnimals", "Are the animals of different kinds?"),
    ("detect", "green truck to the left of the dog"),
    ("count", "How many mugs are there?"),
];

fn sample_program(seed: u64, query_index: usize) -> String {
    let g = grammar();
    let ckpt = PolicyCheckpoint::initial(&g, 0.0, 1, "prop");
    let (qtype, query) = QUERIES[query_index % QUERIES.len()];
    let task = task_for(qtype, query);
    sample(&ckpt, &g, &task, None, &SamplePlan::default(), seed)
        .expect("uniform checkpoint always samples")
        .text
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Round trip: parsing the pretty-printed form reproduces the tree, and
    /// pretty-printing is a fixpoint after one pass.
    #[test]
    fn parse_pretty_roundtrip(seed in any::<u64>(), qi in 0usize..QUERIES.len()) {
        let text = sample_program(seed, qi);
        let ast = parse(&text).expect("sampled programs parse");
        let printed = pretty_print(&ast);
        let reparsed = parse(&printed).expect("printed programs parse");
        prop_assert!(ast.structurally_eq(&reparsed));
        prop_assert_eq!(printed.clone(), pretty_print(&reparsed));
    }

    /// Normalization is invariant under bijective variable renaming.
    #[test]
    fn normalize_renaming_invariance(seed in any::<u64>(), qi in 0usize..QUERIES.len(), salt in 1u32..999) {
        let text = sample_program(seed, qi);
        let ast = parse(&text).unwrap();
        let renamed = rename_vars(&ast, salt);
        prop_assert_eq!(normalize(&ast).hash, normalize(&renamed).hash);
    }

    /// Derivations replay to the same normalized tree.
    #[test]
    fn derive_replay_fixpoint(seed in any::<u64>(), qi in 0usize..QUERIES.len()) {
        let g = grammar();
        let text = sample_program(seed, qi);
        let ast = parse(&text).unwrap();
        let derivation = g.derive(&ast).expect("sampled programs are in-grammar");
        let replayed = g.replay(&derivation).unwrap();
        prop_assert_eq!(normalize(&replayed).hash, normalize(&ast).hash);
    }

    /// `exists` equals non-emptiness of `find` under the same noise draw,
    /// and the yes/no composition matches.
    #[test]
    fn exists_agrees_with_find(scene_seed in 0u64..500, noise_seed in any::<u64>(),
                               miss in 0.0f64..1.0, fp in 0.0f64..1.0, name_i in 0usize..6) {
        let config = WorldConfig::default();
        let scene = generate_scene(&config, scene_seed).unwrap();
        let noise = NoiseModel {
            find_miss_rate: miss,
            find_false_positive_rate: fp,
            query_corruption_rate: 0.0,
            noise_seed,
        };
        let names = ["dog", "cat", "truck", "mug", "lamp", "squirrel"];
        let name = names[name_i];
        let full = PatchVal::full(&scene);
        let found = api_find(&full, name, &scene, &noise);
        let exists = api_exists(&full, name, &scene, &noise);
        prop_assert_eq!(exists, !found.is_empty());
        let yesno = vpsynth::exec::bool_to_yesno(exists);
        prop_assert_eq!(yesno == "yes", !found.is_empty());
    }
}

/// Apply a bijective renaming to every variable in the program.
fn rename_vars(ast: &vpsynth::lang::ast::Program, salt: u32) -> vpsynth::lang::ast::Program {
    use vpsynth::lang::ast::{Expr, Program, Stmt};
    fn map_name(name: &str, salt: u32) -> String {
        format!("ren{salt}_{name}")
    }
    fn expr(e: &Expr, salt: u32) -> Expr {
        match e {
            Expr::Ident { name, span } => Expr::Ident { name: map_name(name, salt), span: *span },
            Expr::Str { .. } | Expr::Int { .. } | Expr::Float { .. } | Expr::Bool { .. } => e.clone(),
            Expr::List { items, span } => {
                Expr::List { items: items.iter().map(|i| expr(i, salt)).collect(), span: *span }
            }
            Expr::Attr { obj, name, span } => Expr::Attr {
                obj: Box::new(expr(obj, salt)),
                name: name.clone(),
                span: *span,
            },
            Expr::Index { obj, index, span } => Expr::Index {
                obj: Box::new(expr(obj, salt)),
                index: Box::new(expr(index, salt)),
                span: *span,
            },
            Expr::Call { func, args, span } => Expr::Call {
                func: func.clone(),
                args: args.iter().map(|a| expr(a, salt)).collect(),
                span: *span,
            },
            Expr::MethodCall { obj, method, args, span } => Expr::MethodCall {
                obj: Box::new(expr(obj, salt)),
                method: method.clone(),
                args: args.iter().map(|a| expr(a, salt)).collect(),
                span: *span,
            },
            Expr::SortBy { obj, key_attr, span } => Expr::SortBy {
                obj: Box::new(expr(obj, salt)),
                key_attr: key_attr.clone(),
                span: *span,
            },
            Expr::Unary { op, operand, span } => {
                Expr::Unary { op: *op, operand: Box::new(expr(operand, salt)), span: *span }
            }
            Expr::Binary { op, lhs, rhs, span } => Expr::Binary {
                op: *op,
                lhs: Box::new(expr(lhs, salt)),
                rhs: Box::new(expr(rhs, salt)),
                span: *span,
            },
        }
    }
    fn stmt(s: &Stmt, salt: u32) -> Stmt {
        match s {
            Stmt::Assign { target, value, span } => Stmt::Assign {
                target: map_name(target, salt),
                value: expr(value, salt),
                span: *span,
            },
            Stmt::ExprStmt { expr: e, span } => Stmt::ExprStmt { expr: expr(e, salt), span: *span },
            Stmt::For { var, iterable, body, span } => Stmt::For {
                var: map_name(var, salt),
                iterable: expr(iterable, salt),
                body: body.iter().map(|s| stmt(s, salt)).collect(),
                span: *span,
            },
            Stmt::If { arms, else_body, span } => Stmt::If {
                arms: arms
                    .iter()
                    .map(|(c, b)| (expr(c, salt), b.iter().map(|s| stmt(s, salt)).collect()))
                    .collect(),
                else_body: else_body.as_ref().map(|b| b.iter().map(|s| stmt(s, salt)).collect()),
                span: *span,
            },
            Stmt::Return { value, span } => Stmt::Return { value: expr(value, salt), span: *span },
        }
    }
    Program {
        param: map_name(&ast.param, salt),
        body: ast.body.iter().map(|s| stmt(s, salt)).collect(),
        span: ast.span,
    }
}

/// Empirical production frequencies from many samples match the smoothed
/// normalized weights within 3-sigma binomial bounds.
#[test]
fn sampling_matches_weights_within_3_sigma() {
    let g = grammar();
    let mut ckpt = PolicyCheckpoint::initial(&g, 0.0, 1, "freq");
    let mut body = vec![0.0; Grammar::template_count()];
    // An uneven handful of productions.
    body[0] = 4.0;
    body[1] = 1.0;
    body[2] = 2.0;
    body[12] = 3.0;
    ckpt.weights.contexts.insert("exist".into(), ContextWeights { body: body.clone() });
    let task = task_for("exist", "Are there dogs?");
    let plan = SamplePlan { temperature: 1.0, ..Default::default() };

    let n = 100_000u32;
    let mut counts = vec![0u32; Grammar::template_count()];
    for seed in 0..n {
        let s = sample(&ckpt, &g, &task, None, &plan, seed as u64).unwrap();
        counts[s.derivation.unwrap().template_id().unwrap() as usize] += 1;
    }
    let total: f64 = body.iter().sum();
    for (i, w) in body.iter().enumerate() {
        let p = w / total;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let observed = counts[i] as f64 / n as f64;
        assert!(
            (observed - p).abs() <= 3.0 * sigma + 1e-12,
            "production {i}: observed {observed:.5}, expected {p:.5}, sigma {sigma:.5}"
        );
    }
}

/// Every question type of the catalogue is exercised by the sampler without
/// error on a matching query.
#[test]
fn sampler_covers_every_question_type_context() {
    let g = grammar();
    let ckpt = PolicyCheckpoint::initial(&g, 0.0, 1, "cover");
    for (i, qtype) in question_catalogue().iter().enumerate() {
        let task = task_for(qtype, "Are there dogs in the picture?");
        let s = sample(&ckpt, &g, &task, None, &SamplePlan::default(), i as u64).unwrap();
        parse(&s.text).unwrap();
    }
}
