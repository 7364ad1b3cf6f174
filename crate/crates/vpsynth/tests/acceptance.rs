//! Acceptance suite: one test per criterion, each printing a pass line with
//! the measured numbers and asserting its stated tolerance and runtime
//! budget (run with `cargo test --test acceptance -- --nocapture` to see the
//! lines).

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use common::{fixture_scene, spawn_mock_endpoint};

use vpsynth::exec::{
    api_crop_directional, api_find, execute, CropDirection, ExecLimits, ExecOutcome, ExecStatus,
    NoiseModel, PatchVal, Region,
};
use vpsynth::lang::deriv::Grammar;
use vpsynth::lang::{normalize, parse};
use vpsynth::policy::{improve_mle, nll, CloneExample, PolicyCheckpoint, SamplePlan};
use vpsynth::reward::{compare_detection, macro_f1, reward, Answer, RewardValue};
use vpsynth::scene::{
    generate_scene, BBox, Scene, TaskInstance, TaskKind, Taxonomy, WorldConfig,
};
use vpsynth::selftrain::{
    filter, grow, iterate, trajectories_to_jsonl, GrowContext, PolicyKind, RunConfig, Trajectory,
    World,
};
use vpsynth::util;

fn budget(name: &str, elapsed: Duration, limit: Duration) {
    assert!(
        elapsed <= limit,
        "{name} exceeded its runtime budget: {elapsed:?} > {limit:?}"
    );
}

fn make_task(
    id: &str,
    scene: &Scene,
    query: &str,
    question_type: &str,
    task_kind: TaskKind,
    gold: Answer,
) -> TaskInstance {
    TaskInstance {
        format_version: "1".into(),
        id: id.into(),
        scene_ref: scene.id(),
        query: query.into(),
        question_type: question_type.into(),
        task_kind,
        gold,
        slots: Default::default(),
    }
}

fn run_program(text: &str, scene: &Scene, limits: &ExecLimits) -> ExecOutcome {
    match parse(text) {
        Ok(ast) => execute(&ast, scene, limits, &NoiseModel::default()),
        Err(e) => ExecOutcome::parse_failure(e.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Criterion 1: reward exactness on 50 hand-derived triples.
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_reward_exactness() {
    let started = Instant::now();
    let scene = fixture_scene();

    // Program texts, each hand-traced against the fixture scene.
    let exists = |name: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    return bool_to_yesno(image_patch.exists(\"{name}\"))\n"
        )
    };
    let exists_raw_bool = |name: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    return image_patch.exists(\"{name}\")\n"
        )
    };
    let count = |name: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    return len(image_patch.find(\"{name}\"))\n"
        )
    };
    let query_first = |name: &str, q: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    return image_patch.find(\"{name}\")[0].simple_query(\"{q}\")\n"
        )
    };
    let extreme_color = |name: &str, index: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"{name}\")\n    patches.sort(key=lambda x: x.area)\n    return patches[{index}].simple_query(\"What is the color?\")\n"
        )
    };
    let exists_attr = |name: &str, value: &str, negate: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"{name}\")\n    answer = False\n    for patch in patches:\n        if {negate}patch.verify_property(\"{name}\", \"{value}\"):\n            answer = True\n    return bool_to_yesno(answer)\n"
        )
    };
    let verify_two = |name: &str, a: &str, b: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patch = image_patch.find(\"{name}\")[0]\n    return bool_to_yesno(patch.verify_property(\"{name}\", \"{a}\") and patch.verify_property(\"{name}\", \"{b}\"))\n"
        )
    };
    let position = |name: &str, op: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patch = image_patch.find(\"{name}\")[0]\n    return bool_to_yesno(patch.horizontal_center {op} image_patch.horizontal_center)\n"
        )
    };
    let side = |name: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patch = image_patch.find(\"{name}\")[0]\n    if patch.horizontal_center > image_patch.horizontal_center:\n        return \"right\"\n    return \"left\"\n"
        )
    };
    let pair = |a: &str, op: &str, b: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    first = image_patch.find(\"{a}\")[0]\n    second = image_patch.find(\"{b}\")[0]\n    return bool_to_yesno(first.horizontal_center {op} second.horizontal_center)\n"
        )
    };
    let two_colors_differ = |a: &str, b: &str, op: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    first = image_patch.find(\"{a}\")[0]\n    second = image_patch.find(\"{b}\")[0]\n    return bool_to_yesno(first.simple_query(\"What is the color?\") {op} second.simple_query(\"What is the color?\"))\n"
        )
    };
    let group_kinds = |members: &[&str], cond: &str| {
        let mut body = String::from(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    kinds = 0\n",
        );
        for m in members {
            body.push_str(&format!(
                "    if image_patch.exists(\"{m}\"):\n        kinds = kinds + 1\n"
            ));
        }
        body.push_str(&format!("    return bool_to_yesno(kinds {cond})\n"));
        body
    };
    let detect_all = |name: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    return image_patch.find(\"{name}\")\n"
        )
    };
    let detect_attr = |name: &str, value: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"{name}\")\n    result = []\n    for patch in patches:\n        if patch.verify_property(\"{name}\", \"{value}\"):\n            result.append(patch)\n    return result\n"
        )
    };
    let detect_rel_crop = |name: &str, value: &str, crop: &str, anchor: &str| {
        format!(
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    anchor = image_patch.find(\"{anchor}\")[0]\n    region = image_patch.{crop}(anchor.left, anchor.upper, anchor.right, anchor.lower)\n    patches = region.find(\"{name}\")\n    result = []\n    for patch in patches:\n        if patch.verify_property(\"{name}\", \"{value}\"):\n            result.append(patch)\n    return result\n"
        )
    };

    let t = |s: &str| Answer::Text(s.into());
    let dog = BBox::new(5, 40, 25, 60);
    let truck_small = BBox::new(35, 5, 55, 25);
    let truck_big = BBox::new(60, 70, 90, 95);

    // (label, program, task kind, gold, expected reward)
    let mut triples: Vec<(&str, String, TaskKind, Answer, u8)> = vec![
        ("exists dog yes", exists("dog"), TaskKind::Vqa, t("yes"), 1),
        ("exists dog vs no", exists("dog"), TaskKind::Vqa, t("no"), 0),
        ("exists squirrel no", exists("squirrel"), TaskKind::Vqa, t("no"), 1),
        ("exists squirrel vs yes", exists("squirrel"), TaskKind::Vqa, t("yes"), 0),
        ("raw bool true vs yes", exists_raw_bool("dog"), TaskKind::Vqa, t("yes"), 1),
        ("raw bool false vs no", exists_raw_bool("squirrel"), TaskKind::Vqa, t("no"), 1),
        ("count trucks 2", count("truck"), TaskKind::Vqa, t("2"), 1),
        ("count trucks vs 3", count("truck"), TaskKind::Vqa, t("3"), 0),
        ("count birds 0", count("bird"), TaskKind::Vqa, t("0"), 1),
        ("mug color", query_first("mug", "What is the color?"), TaskKind::Vqa, t("yellow"), 1),
        (
            "mug color vs padded gold",
            query_first("mug", "What is the color?"),
            TaskKind::Vqa,
            t(" Yellow "),
            1,
        ),
        ("mug color vs red", query_first("mug", "What is the color?"), TaskKind::Vqa, t("red"), 0),
        ("largest truck color", extreme_color("truck", "-1"), TaskKind::Vqa, t("green"), 1),
        ("smallest truck color", extreme_color("truck", "0"), TaskKind::Vqa, t("green"), 1),
        ("no non-green truck", exists_attr("truck", "green", "not "), TaskKind::Vqa, t("no"), 1),
        ("non-green truck vs yes", exists_attr("truck", "green", "not "), TaskKind::Vqa, t("yes"), 0),
        ("non-clean truck yes", exists_attr("truck", "clean", "not "), TaskKind::Vqa, t("yes"), 1),
        ("glass mug yes", exists_attr("mug", "glass", ""), TaskKind::Vqa, t("yes"), 1),
        ("mug yellow and new", verify_two("mug", "yellow", "new"), TaskKind::Vqa, t("yes"), 1),
        ("mug yellow and old", verify_two("mug", "yellow", "old"), TaskKind::Vqa, t("no"), 1),
        ("cat right of picture", position("cat", ">"), TaskKind::Vqa, t("yes"), 1),
        ("dog right of picture", position("dog", ">"), TaskKind::Vqa, t("no"), 1),
        ("dog side left", side("dog"), TaskKind::Vqa, t("left"), 1),
        ("cat side right", side("cat"), TaskKind::Vqa, t("right"), 1),
        ("dog left of cat", pair("dog", "<", "cat"), TaskKind::Vqa, t("yes"), 1),
        ("cat left of dog no", pair("cat", "<", "dog"), TaskKind::Vqa, t("no"), 1),
        ("dog cat differ yes", two_colors_differ("dog", "cat", "!="), TaskKind::Vqa, t("yes"), 1),
        ("dog cat same no", two_colors_differ("dog", "cat", "=="), TaskKind::Vqa, t("no"), 1),
        (
            "animals different",
            group_kinds(&["dog", "cat", "horse", "bird"], "> 1"),
            TaskKind::Vqa,
            t("yes"),
            1,
        ),
        (
            "vehicles same",
            group_kinds(&["truck", "car", "van", "boat"], "== 1"),
            TaskKind::Vqa,
            t("yes"),
            1,
        ),
        (
            "out-of-catalogue query",
            query_first("mug", "Why is the sky blue?"),
            TaskKind::Vqa,
            t("blue"),
            0,
        ),
        (
            "no return value",
            "def execute_command(image):\n    x = 1\n".to_string(),
            TaskKind::Vqa,
            t("yes"),
            0,
        ),
        ("list result vs text", detect_all("dog"), TaskKind::Vqa, t("yes"), 0),
        (
            "index out of range",
            "def execute_command(image):\n    image_patch = ImagePatch(image)\n    return image_patch.find(\"dog\")[5]\n"
                .to_string(),
            TaskKind::Vqa,
            t("yes"),
            0,
        ),
        // ITM triples.
        ("itm green truck yes", exists_attr("truck", "green", ""), TaskKind::Itm, t("yes"), 1),
        ("itm green truck vs no", exists_attr("truck", "green", ""), TaskKind::Itm, t("no"), 0),
        ("itm red truck no", exists_attr("truck", "red", ""), TaskKind::Itm, t("no"), 1),
        (
            "itm dog left of cat",
            {
                let a = "dog";
                let b = "cat";
                format!(
                    "def execute_command(image):\n    image_patch = ImagePatch(image)\n    first_patches = image_patch.find(\"{a}\")\n    second_patches = image_patch.find(\"{b}\")\n    answer = False\n    for first in first_patches:\n        for second in second_patches:\n            if first.horizontal_center < second.horizontal_center:\n                answer = True\n    return bool_to_yesno(answer)\n"
                )
            },
            TaskKind::Itm,
            t("yes"),
            1,
        ),
        ("itm cat left of dog no", pair("cat", "<", "dog"), TaskKind::Itm, t("no"), 1),
        (
            "itm maybe vs no",
            "def execute_command(image):\n    return \"maybe\"\n".to_string(),
            TaskKind::Itm,
            t("no"),
            0,
        ),
        // Detection triples.
        (
            "detect both trucks",
            detect_all("truck"),
            TaskKind::Detection,
            Answer::Boxes(vec![truck_small, truck_big]),
            1,
        ),
        (
            "detect trucks vs single gold",
            detect_all("truck"),
            TaskKind::Detection,
            Answer::Boxes(vec![truck_small]),
            0,
        ),
        (
            "detect green trucks",
            detect_attr("truck", "green"),
            TaskKind::Detection,
            Answer::Boxes(vec![truck_small, truck_big]),
            1,
        ),
        (
            "detect red trucks vs gold",
            detect_attr("truck", "red"),
            TaskKind::Detection,
            Answer::Boxes(vec![truck_small]),
            0,
        ),
        (
            "detect red trucks vs empty gold",
            detect_attr("truck", "red"),
            TaskKind::Detection,
            Answer::Boxes(vec![]),
            1,
        ),
        (
            "detect green truck left of cat",
            detect_rel_crop("truck", "green", "crop_left_of_bbox", "cat"),
            TaskKind::Detection,
            Answer::Boxes(vec![truck_small]),
            1,
        ),
        (
            // IoU = 240 / 560 = 3/7 < 0.5 against the shifted gold box.
            "detect dog vs shifted box",
            detect_all("dog"),
            TaskKind::Detection,
            Answer::Boxes(vec![BBox::new(13, 40, 33, 60)]),
            0,
        ),
        ("detect dog exact", detect_all("dog"), TaskKind::Detection, Answer::Boxes(vec![dog]), 1),
    ];
    // A parse failure is a reward-0 outcome for any task kind.
    triples.push((
        "parse error vs text",
        "def execute_command(image): while True\n".to_string(),
        TaskKind::Vqa,
        t("yes"),
        0,
    ));
    triples.push((
        "parse error vs boxes",
        "import os\n".to_string(),
        TaskKind::Detection,
        Answer::Boxes(vec![dog]),
        0,
    ));

    assert_eq!(triples.len(), 50, "the fixture suite holds exactly 50 triples");

    let limits = ExecLimits::default();
    for (i, (label, program, kind, gold, expected)) in triples.iter().enumerate() {
        let task = make_task(&format!("fix-{i:02}"), &scene, "q", "fixture", *kind, gold.clone());
        let outcome = run_program(program, &scene, &limits);
        let r = reward(&outcome, &task);
        assert!(r.0 == 0 || r.0 == 1, "reward is binary");
        assert_eq!(
            r.0, *expected,
            "triple {i} ({label}): status {:?}, result {:?}",
            outcome.status,
            outcome.result.as_ref().map(|v| v.summary())
        );
    }

    let elapsed = started.elapsed();
    budget("criterion 1", elapsed, Duration::from_secs(1));
    println!("[PASS] criterion 1: reward exactness on 50 hand-derived triples ({elapsed:?})");
}

// ---------------------------------------------------------------------------
// Criterion 2: filter/clone correctness and MLE optimality.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_filter_and_clone() {
    let started = Instant::now();
    let config = WorldConfig {
        question_types: vec![
            "exist".into(),
            "existAttrNot".into(),
            "count".into(),
            "colorQuery".into(),
            "positionVerifyC".into(),
            "largestAttr".into(),
            "detect".into(),
            "itm".into(),
        ],
        ..Default::default()
    };
    let world = World::generate(&config, 32, 20, 4, 99).unwrap();
    let grammar = Grammar::new(&world.config.taxonomy);
    let checkpoint = PolicyCheckpoint::initial(&grammar, 0.0, 7, "c2");
    let ctx = GrowContext {
        grammar: &grammar,
        scenes: &world.scenes,
        bank: None,
        plan: SamplePlan::default(),
        prompt_params: Default::default(),
        api_spec: vpsynth::policy::default_api_spec(),
        noise: NoiseModel::default(),
        limits: ExecLimits::default(),
        policy: PolicyKind::Grammar,
        endpoint: None,
        workers: 2,
    };

    let mut rng = util::rng_from_seed(4242);
    use rand::Rng;
    let mut total_checked = 0usize;
    for batch_seed in [11u64, 22, 33] {
        let trajectories = grow(&checkpoint, &world.train, 2, batch_seed, 1, &ctx);
        let kept = filter(&trajectories);

        // Subset: every kept trajectory is literally an element of the batch.
        for k in &kept.trajectories {
            assert!(trajectories.contains(k), "filtered set must be a subset of the batch");
            assert_eq!(k.reward, 1);
        }

        // Re-execution of every kept trajectory reproduces reward 1.
        let task_by_id: BTreeMap<&str, &TaskInstance> =
            world.train.iter().map(|t| (t.id.as_str(), t)).collect();
        for k in &kept.trajectories {
            let task = task_by_id[k.task_id.as_str()];
            let scene = &world.scenes[&task.scene_ref];
            let ast = parse(&k.program.text).expect("kept programs parse");
            let replayed = execute(
                &ast,
                scene,
                &ctx.limits,
                &NoiseModel::default().with_seed(k.noise_seed),
            );
            assert_eq!(reward(&replayed, task), RewardValue::ONE, "task {}", k.task_id);
            total_checked += 1;
        }

        // Improve with alpha = 0, lambda = 0: mean NLL of the filtered set
        // does not increase, and no perturbation of the updated weights
        // lowers the total NLL.
        let examples: Vec<CloneExample> = kept
            .trajectories
            .iter()
            .map(|t| CloneExample {
                question_type: &t.question_type,
                query: &t.query,
                derivation: t.program.derivation.as_ref(),
            })
            .collect();
        let (improved, stats) = improve_mle(&checkpoint, &grammar, &examples, 0.0, 0.0).unwrap();
        assert!(stats.used > 0, "batches sample in-grammar programs");

        let total_nll = |ckpt: &PolicyCheckpoint| -> f64 {
            kept.trajectories
                .iter()
                .map(|t| {
                    let task = task_by_id[t.task_id.as_str()];
                    nll(ckpt, &grammar, t.program.derivation.as_ref().unwrap(), task).unwrap()
                })
                .sum()
        };
        let before = total_nll(&checkpoint);
        let after = total_nll(&improved);
        let n = kept.len() as f64;
        assert!(
            after / n <= before / n + 1e-9,
            "post-improve mean NLL {} must not exceed pre-improve {}",
            after / n,
            before / n
        );

        for _ in 0..100 {
            let mut perturbed = improved.clone();
            for ctxw in perturbed.weights.contexts.values_mut() {
                for w in &mut ctxw.body {
                    if *w > 0.0 {
                        *w *= (rng.gen_range(-0.3f64..0.3)).exp();
                    }
                }
            }
            for sw in perturbed.weights.slot_sources.values_mut() {
                if sw.query > 0.0 {
                    sw.query *= (rng.gen_range(-0.3f64..0.3)).exp();
                }
                if sw.taxonomy > 0.0 {
                    sw.taxonomy *= (rng.gen_range(-0.3f64..0.3)).exp();
                }
            }
            assert!(
                total_nll(&perturbed) >= after - 1e-9,
                "a weight perturbation lowered the total NLL below the MLE"
            );
        }
    }
    assert!(total_checked > 50, "enough kept trajectories were re-executed");

    let elapsed = started.elapsed();
    budget("criterion 2", elapsed, Duration::from_secs(30));
    println!(
        "[PASS] criterion 2: filter subset, replay-to-reward-1 ({total_checked} checked), MLE \
         optimality under 300 perturbations ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: self-improvement dynamics.
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_self_improvement_dynamics() {
    let started = Instant::now();
    let config = WorldConfig {
        question_types: vpsynth::scene::question_catalogue()
            .iter()
            .take(20)
            .map(|s| s.to_string())
            .collect(),
        ..Default::default()
    };
    let world_dir = tempfile::tempdir().unwrap();
    let world = World::generate(&config, 64, 100, 15, 42).unwrap();
    world.save(world_dir.path()).unwrap();

    let out_dir = tempfile::tempdir().unwrap();
    let run = RunConfig {
        world_dir: world_dir.path().to_path_buf(),
        out_dir: out_dir.path().to_path_buf(),
        iterations: 5,
        tasks_per_type: 100,
        passes_per_task: 1,
        temperature: 0.7,
        seed: 11,
        alpha: 0.25,
        eval_runs: 5,
        workers: 2,
        ..Default::default()
    };
    let state = iterate(&run).unwrap();
    let baseline = state.record(0).unwrap();
    let last = state.record(5).unwrap();
    let gain = last.val_mean - baseline.val_mean;
    assert!(
        gain >= 0.10,
        "final validation accuracy {:.4} must exceed the iteration-0 accuracy {:.4} by >= 10 points",
        last.val_mean,
        baseline.val_mean
    );

    let elapsed = started.elapsed();
    budget("criterion 3", elapsed, Duration::from_secs(300));
    println!(
        "[PASS] criterion 3: 20 types x 100 tasks, 5 iterations: {:.4} +/- {:.4} -> {:.4} +/- {:.4} \
         (gain {:+.1} points) ({elapsed:?})",
        baseline.val_mean,
        baseline.val_std,
        last.val_mean,
        last.val_std,
        gain * 100.0
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: correction stabilization on an adversarial boolean mix.
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_correction_stabilization() {
    let started = Instant::now();
    // 12 of 14 types are balanced boolean (86%).
    let types = [
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
        "leftOf",
        "itm",
        "colorQuery",
        "count",
    ];
    let boolean: usize = types
        .iter()
        .filter(|t| vpsynth::scene::boolean_types().contains(&t.to_string().as_str()))
        .count();
    assert!(boolean as f64 / types.len() as f64 >= 0.70, "the mix must be >= 70% boolean");

    let config = WorldConfig {
        question_types: types.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    let world_dir = tempfile::tempdir().unwrap();
    World::generate(&config, 48, 30, 12, 5).unwrap().save(world_dir.path()).unwrap();

    let noise = NoiseModel {
        find_miss_rate: 0.1,
        find_false_positive_rate: 0.0,
        query_corruption_rate: 0.1,
        noise_seed: 9,
    };
    let run_with = |corrections: bool, out: &Path| -> vpsynth::selftrain::RunState {
        let run = RunConfig {
            world_dir: world_dir.path().to_path_buf(),
            out_dir: out.to_path_buf(),
            iterations: 8,
            tasks_per_type: 10,
            passes_per_task: 1,
            temperature: 0.7,
            seed: 31,
            alpha: 0.1,
            eval_runs: 5,
            corrections,
            noise: noise.clone(),
            workers: 2,
            ..Default::default()
        };
        iterate(&run).unwrap()
    };

    let off_dir = tempfile::tempdir().unwrap();
    let on_dir = tempfile::tempdir().unwrap();
    let uncorrected = run_with(false, off_dir.path());
    let corrected = run_with(true, on_dir.path());

    let final_off = uncorrected.record(8).unwrap().val_mean;
    let final_on = corrected.record(8).unwrap().val_mean;
    assert!(
        final_on >= final_off,
        "corrected final accuracy {final_on:.4} must be >= uncorrected {final_off:.4}"
    );
    let hard_entered: Vec<&str> = uncorrected
        .iterations
        .iter()
        .flat_map(|r| r.q_hard.iter().map(String::as_str))
        .collect();
    assert!(
        !hard_entered.is_empty(),
        "at least one question type must enter Q_hard in the uncorrected run"
    );

    let elapsed = started.elapsed();
    budget("criterion 4", elapsed, Duration::from_secs(600));
    println!(
        "[PASS] criterion 4: corrections {:.4} >= uncorrected {:.4}; Q_hard entered: {:?} ({elapsed:?})",
        final_on,
        final_off,
        uncorrected
            .iterations
            .iter()
            .find(|r| !r.q_hard.is_empty())
            .map(|r| (r.iteration, r.q_hard.clone()))
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: the boolean-pathology statistic.
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_boolean_pathology_statistic() {
    let started = Instant::now();
    let config = WorldConfig {
        question_types: vec!["exist".into(), "existC".into(), "leftOf".into(), "rightOf".into()],
        ..Default::default()
    };
    let world = World::generate(&config, 48, 250, 1, 77).unwrap();
    assert_eq!(world.train.len(), 1000);

    let constant_yes = "def execute_command(image):\n    return \"yes\"\n";
    let ast = parse(constant_yes).unwrap();
    let limits = ExecLimits::default();
    let quiet = NoiseModel::default();
    let mut filtered_in = 0usize;
    for task in &world.train {
        let scene = &world.scenes[&task.scene_ref];
        let outcome = execute(&ast, scene, &limits, &quiet);
        if reward(&outcome, task).is_hit() {
            filtered_in += 1;
        }
    }
    let n = world.train.len() as f64;
    let rate = filtered_in as f64 / n;
    let sigma = (0.25 / n).sqrt();
    assert!(
        (rate - 0.5).abs() <= 3.0 * sigma,
        "constant-yes filter-in rate {rate:.4} outside 0.5 +/- {:.4}",
        3.0 * sigma
    );

    let elapsed = started.elapsed();
    budget("criterion 5", elapsed, Duration::from_secs(10));
    println!(
        "[PASS] criterion 5: constant-yes filtered in at {rate:.4} of {n} balanced boolean tasks \
         (band 0.5 +/- {:.4}) ({elapsed:?})",
        3.0 * sigma
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: data-scarcity mitigation shape (100x1 vs 10x10).
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_budget_shapes() {
    let started = Instant::now();
    // A representative 10-type slice; the same per-iteration sample budget of
    // 1000 under both configurations.
    let config = WorldConfig {
        question_types: vec![
            "exist".into(),
            "existAttrNot".into(),
            "existMaterialC".into(),
            "positionVerifyC".into(),
            "count".into(),
            "colorQuery".into(),
            "relO".into(),
            "largestAttr".into(),
            "smallestAttr".into(),
            "detect".into(),
        ],
        ..Default::default()
    };
    let world_dir = tempfile::tempdir().unwrap();
    World::generate(&config, 64, 100, 20, 13).unwrap().save(world_dir.path()).unwrap();

    let run_shape = |tasks_per_type: usize, passes: u32, out: &Path| -> f64 {
        let run = RunConfig {
            world_dir: world_dir.path().to_path_buf(),
            out_dir: out.to_path_buf(),
            iterations: 8,
            tasks_per_type,
            passes_per_task: passes,
            temperature: 0.7,
            seed: 23,
            alpha: 0.25,
            eval_runs: 5,
            workers: 2,
            ..Default::default()
        };
        let state = iterate(&run).unwrap();
        state.record(8).unwrap().val_mean
    };

    let a_dir = tempfile::tempdir().unwrap();
    let b_dir = tempfile::tempdir().unwrap();
    let wide = run_shape(100, 1, a_dir.path());
    let deep = run_shape(10, 10, b_dir.path());
    let diff = (wide - deep).abs();
    assert!(
        diff <= 0.05,
        "100x1 ({wide:.4}) and 10x10 ({deep:.4}) final accuracies differ by {:.1} points (> 5)",
        diff * 100.0
    );

    let elapsed = started.elapsed();
    budget("criterion 6", elapsed, Duration::from_secs(600));
    println!(
        "[PASS] criterion 6: equal 1000-sample budgets: 100x1 {wide:.4} vs 10x10 {deep:.4} \
         (diff {:.1} points) ({elapsed:?})",
        diff * 100.0
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: interpreter and geometry suite.
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_interpreter_and_geometry() {
    let started = Instant::now();
    let config = WorldConfig::default();

    // Determinism under fixed seeds, with noise on.
    let scene = generate_scene(&config, 3).unwrap();
    let noisy = NoiseModel {
        find_miss_rate: 0.4,
        find_false_positive_rate: 0.4,
        query_corruption_rate: 0.4,
        noise_seed: 5,
    };
    let program = parse(
        "def execute_command(image):\n    image_patch = ImagePatch(image)\n    patches = image_patch.find(\"dog\")\n    return bool_to_yesno(image_patch.exists(\"dog\") and len(patches) >= 0)\n",
    )
    .unwrap();
    let a = execute(&program, &scene, &ExecLimits::default(), &noisy);
    let b = execute(&program, &scene, &ExecLimits::default(), &noisy);
    assert_eq!(a, b, "execution must be a pure function of its arguments");

    // Step-limit termination.
    let runaway = parse(
        "def execute_command(image):\n    xs = [1]\n    for x in xs:\n        xs.append(x)\n    return 0\n",
    )
    .unwrap();
    let limits = ExecLimits { max_steps: 5_000, max_list_length: usize::MAX };
    let out = execute(&runaway, &scene, &limits, &NoiseModel::default());
    assert_eq!(out.status, ExecStatus::StepLimitExceeded);
    assert_eq!(out.steps_used, 5_000);

    // Geometry identities on 10^4 random patches.
    let mut rng = util::rng_from_seed(888);
    use rand::Rng;
    for _ in 0..10_000 {
        let left = rng.gen_range(0i64..990);
        let upper = rng.gen_range(0i64..990);
        let width = rng.gen_range(1i64..=200);
        let height = rng.gen_range(1i64..=200);
        let r = Region { left, upper, right: left + width, lower: upper + height };
        assert_eq!(r.horizontal_center(), (r.left + r.right) as f64 / 2.0);
        assert_eq!(r.vertical_center(), (r.upper + r.lower) as f64 / 2.0);
        assert_eq!(r.area(), (r.right - r.left) * (r.lower - r.upper));
    }

    // Crop-direction containment laws over random scenes and boxes.
    let quiet = NoiseModel::default();
    for seed in 0..50u64 {
        let scene = generate_scene(&config, seed).unwrap();
        let full = PatchVal::full(&scene);
        let bbox = (
            rng.gen_range(0i64..=scene.canvas_width),
            rng.gen_range(0i64..=scene.canvas_height),
            rng.gen_range(0i64..=scene.canvas_width),
            rng.gen_range(0i64..=scene.canvas_height),
        );
        for (direction, check) in [
            (CropDirection::Left, 0usize),
            (CropDirection::Right, 1),
            (CropDirection::Above, 2),
            (CropDirection::Below, 3),
        ] {
            let cropped = api_crop_directional(&full, direction, bbox, &scene);
            let region = cropped.region;
            assert!(region.left >= 0 && region.right <= scene.canvas_width);
            assert!(region.upper >= 0 && region.lower <= scene.canvas_height);
            for category in ["dog", "truck", "mug"] {
                for found in api_find(&cropped, category, &scene, &quiet) {
                    let cx = found.region.horizontal_center();
                    let cy = found.region.vertical_center();
                    assert!(region.contains_point(cx, cy));
                    match check {
                        0 => assert!(cx < bbox.0.max(0) as f64),
                        1 => assert!(cx >= bbox.2.min(scene.canvas_width) as f64),
                        2 => assert!(cy < bbox.1.max(0) as f64),
                        _ => assert!(cy >= bbox.3.min(scene.canvas_height) as f64),
                    }
                }
            }
            if region.area() == 0 {
                assert!(api_find(&cropped, "dog", &scene, &quiet).is_empty());
            }
        }
    }

    // Fuzz: 10^5 random token streams never crash the parser; whatever
    // parses never crashes the executor. Three stream shapes: raw token
    // soup, statement-shaped lines under a valid header, and byte-level
    // mutations of valid sampled programs (most of which still parse).
    let vocab: &[&str] = &[
        "def", "execute_command", "image", "(", ")", ":", "\n", "    ", "return", "if", "elif",
        "else", "for", "in", "not", "and", "or", "True", "False", "lambda", "image_patch", ".",
        "find", "exists", "verify_property", "simple_query", "sort", "append", "key", "=", "==",
        "!=", "<", ">", "<=", ">=", "+", "-", "*", "/", "[", "]", ",", "\"dog\"", "\"green\"",
        "'x'", "0", "1", "7", "2.5", "xs", "x", "ImagePatch", "bool_to_yesno", "len", "abs",
        "while", "import", "#", "crop_left_of_bbox", "area", "horizontal_center",
    ];
    let statements: &[&str] = &[
        "image_patch = ImagePatch(image)",
        "xs = image_patch.find(\"dog\")",
        "xs.sort(key=lambda x: x.area)",
        "x = xs[-1]",
        "x = xs[0] + 1",
        "return bool_to_yesno(image_patch.exists(\"dog\"))",
        "return len(xs)",
        "return x.simple_query(\"What is the color?\")",
        "return xs",
        "xs.append(x)",
        "x = x.area * 2 - 1",
        "x = not True",
        "x = image_patch.crop_left_of_bbox(1, 2, 3, 4)",
        "return \"yes\"",
        "x = [1, 2.5, \"a\"]",
        "return xs[99]",
        "return 1 / 0",
        "return image.find(\"dog\")",
    ];
    let taxonomy = Taxonomy::default();
    let grammar = Grammar::new(&taxonomy);
    let fuzz_ckpt = PolicyCheckpoint::initial(&grammar, 0.0, 1, "fuzz");
    let seed_task = make_task(
        "fz",
        &scene,
        "Is there a truck in the scene that is not green?",
        "existAttrNotC",
        TaskKind::Vqa,
        Answer::Text("yes".into()),
    );
    let mut parsed = 0usize;
    let fuzz_scene = generate_scene(&config, 1).unwrap();
    let fuzz_limits = ExecLimits { max_steps: 2_000, max_list_length: 100 };
    for i in 0..100_000u64 {
        let mut rng = util::rng_from_seed(util::derive_seed(0xf022, &["fuzz", &i.to_string()]));
        let text = match i % 3 {
            0 => {
                // Raw token soup.
                let len = rng.gen_range(1..=40);
                let mut text = String::new();
                for _ in 0..len {
                    text.push_str(vocab[rng.gen_range(0..vocab.len())]);
                    if rng.gen_bool(0.5) {
                        text.push(' ');
                    }
                }
                text
            }
            1 => {
                // Statement-shaped bodies under a valid header.
                let mut text = String::from("def execute_command(image):\n");
                for _ in 0..rng.gen_range(1..=6) {
                    text.push_str("    ");
                    text.push_str(statements[rng.gen_range(0..statements.len())]);
                    text.push('\n');
                }
                text
            }
            _ => {
                // Byte-level mutation of a valid sampled program.
                let sampled = vpsynth::policy::sample(
                    &fuzz_ckpt,
                    &grammar,
                    &seed_task,
                    None,
                    &SamplePlan::default(),
                    i,
                )
                .unwrap();
                let mut bytes: Vec<u8> = sampled.text.into_bytes();
                for _ in 0..rng.gen_range(0..=3) {
                    if bytes.is_empty() {
                        break;
                    }
                    let at = rng.gen_range(0..bytes.len());
                    match rng.gen_range(0..3) {
                        0 => {
                            bytes.remove(at);
                        }
                        1 => bytes.insert(at, b"()[]:.,=<>+-*/ 01xz\"'\n"[rng.gen_range(0..22)]),
                        _ => bytes[at] = b"()[]:.,=<>+-*/ 01xz\"'\n"[rng.gen_range(0..22)],
                    }
                }
                String::from_utf8_lossy(&bytes).into_owned()
            }
        };
        if let Ok(ast) = parse(&text) {
            parsed += 1;
            let _ = execute(&ast, &fuzz_scene, &fuzz_limits, &NoiseModel::default());
        }
    }
    assert!(parsed > 5_000, "the fuzz corpus must exercise the executor (parsed {parsed})");

    let elapsed = started.elapsed();
    budget("criterion 7", elapsed, Duration::from_secs(60));
    println!(
        "[PASS] criterion 7: determinism, step limits, 10^4 geometry identities, crop laws, \
         10^5 fuzz streams ({parsed} parsed) ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: normalization suite.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_normalization_suite() {
    let started = Instant::now();
    let taxonomy = Taxonomy::default();
    let grammar = Grammar::new(&taxonomy);
    let checkpoint = PolicyCheckpoint::initial(&grammar, 0.0, 3, "c8");
    let queries = [
        ("exist", "Are there dogs?"),
        ("existAttrNotC", "Is there a truck in the scene that is not green?"),
        ("largestAttr", "What color is the largest mug?"),
        ("detect", "green truck to the left of the dog"),
        ("diffAnimals", "Are the animals of different kinds?"),
    ];

    // Alpha-renaming invariance on 1000 random programs.
    use rand::Rng;
    let mut rng = util::rng_from_seed(515);
    for i in 0..1000u64 {
        let (qtype, query) = queries[i as usize % queries.len()];
        let task = make_task(
            "n",
            &fixture_scene(),
            query,
            qtype,
            TaskKind::Vqa,
            Answer::Text("yes".into()),
        );
        let sampled =
            vpsynth::policy::sample(&checkpoint, &grammar, &task, None, &SamplePlan::default(), i)
                .unwrap();
        let ast = parse(&sampled.text).unwrap();
        let salt: u32 = rng.gen_range(1..1_000_000);
        let renamed_text = sampled
            .text
            .replace("image_patch", &format!("v{salt}a"))
            .replace("patches", &format!("v{salt}b"))
            .replace("image", &format!("v{salt}c"))
            .replace("patch", &format!("v{salt}d"))
            .replace("answer", &format!("v{salt}e"))
            .replace("result", &format!("v{salt}f"))
            .replace("first", &format!("v{salt}g"))
            .replace("second", &format!("v{salt}h"))
            .replace("anchor", &format!("v{salt}i"))
            .replace("region", &format!("v{salt}j"))
            .replace("kinds", &format!("v{salt}k"));
        let renamed = parse(&renamed_text).unwrap_or_else(|e| {
            panic!("renamed program must parse: {e}\n{renamed_text}");
        });
        assert_eq!(
            normalize(&ast).hash,
            normalize(&renamed).hash,
            "renaming must not change the normalized hash:\n{}",
            sampled.text
        );
    }

    // Literal sensitivity.
    let a = parse("def execute_command(image):\n    return ImagePatch(image).find(\"dog\")\n").unwrap();
    let b = parse("def execute_command(image):\n    return ImagePatch(image).find(\"cat\")\n").unwrap();
    assert_ne!(normalize(&a).hash, normalize(&b).hash);

    // Census and intersection laws over a 10-iteration dump.
    let dump_dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for iteration in 1..=10u32 {
        let mut trajectories = Vec::new();
        for j in 0..120u64 {
            let (qtype, query) = queries[(j % 5) as usize];
            let task = make_task(
                "c",
                &fixture_scene(),
                query,
                qtype,
                TaskKind::Vqa,
                Answer::Text("yes".into()),
            );
            let seed = util::derive_seed(iteration as u64, &["dump", &j.to_string()]);
            let program =
                vpsynth::policy::sample(&checkpoint, &grammar, &task, None, &SamplePlan::default(), seed)
                    .unwrap();
            trajectories.push(Trajectory {
                task_id: task.id.clone(),
                question_type: task.question_type.clone(),
                query: task.query.clone(),
                iteration,
                pass_index: 0,
                program,
                prompt_hash: "0".repeat(16),
                noise_seed: 0,
                outcome: ExecOutcome::parse_failure("not executed".into()),
                reward: 0,
            });
        }
        let path = dump_dir.path().join(format!("iter-{iteration:04}.jsonl"));
        std::fs::write(&path, trajectories_to_jsonl(&trajectories).unwrap()).unwrap();
        paths.push(path);
    }
    let census = vpsynth::analytics::census(&paths).unwrap();
    assert_eq!(census.iterations.len(), 10);
    for row in &census.iterations {
        assert_eq!(row.hashes.values().sum::<usize>() + row.unparseable, row.total);
    }
    let matrix = vpsynth::analytics::intersections(&census);
    assert_eq!(matrix.labels.len(), 10);
    for i in 0..10 {
        assert_eq!(matrix.counts[i][i], census.iterations[i].unique());
        for j in 0..10 {
            assert_eq!(matrix.counts[i][j], matrix.counts[j][i], "symmetry at ({i},{j})");
            assert!(
                matrix.counts[i][j] <= matrix.counts[i][i].min(matrix.counts[j][j]),
                "diagonal dominance at ({i},{j})"
            );
        }
    }

    let elapsed = started.elapsed();
    budget("criterion 8", elapsed, Duration::from_secs(30));
    println!(
        "[PASS] criterion 8: renaming invariance x1000, literal sensitivity, census laws on a \
         10-iteration dump ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: detection metrics against hand-computed fixtures.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_detection_metrics() {
    let started = Instant::now();
    let b = |l, u, r, lo| BBox::new(l, u, r, lo);

    // Hand fixture: intersection 50, union 150, IoU = 1/3 < 0.5.
    let patch = |bb: BBox| {
        vpsynth::exec::RuntimeValue::Patch(PatchVal {
            region: Region { left: bb.left, upper: bb.upper, right: bb.right, lower: bb.lower },
            category: None,
            bound_object: None,
        })
    };
    let one_third = vpsynth::exec::RuntimeValue::List(vec![patch(b(0, 0, 10, 10))]);
    assert!(!compare_detection(&one_third, &[b(5, 0, 15, 10)], 0.5));
    assert!((b(0, 0, 10, 10).iou(&b(5, 0, 15, 10)) - 1.0 / 3.0).abs() < 1e-12);

    // F1 = 2/3 for TP=1, FP=1, FN=0; paired with a perfect instance the
    // macro average is 5/6.
    let perfect = (vec![b(0, 0, 10, 10)], vec![b(0, 0, 10, 10)]);
    let one_fp = (vec![b(0, 0, 10, 10), b(50, 50, 60, 60)], vec![b(0, 0, 10, 10)]);
    assert!((macro_f1(std::slice::from_ref(&one_fp), 0.5).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((macro_f1(&[perfect, one_fp], 0.5).unwrap() - 5.0 / 6.0).abs() < 1e-12);

    // Permutation invariance over 1000 shuffles.
    use rand::seq::SliceRandom;
    let mut rng = util::rng_from_seed(909);
    let gold = vec![b(0, 0, 10, 10), b(20, 20, 40, 40), b(60, 0, 80, 30), b(50, 60, 70, 90)];
    let predicted_boxes = gold.clone();
    let reference = {
        let listed = vpsynth::exec::RuntimeValue::List(
            predicted_boxes.iter().map(|bb| patch(*bb)).collect(),
        );
        compare_detection(&listed, &gold, 0.5)
    };
    assert!(reference);
    let f1_reference = macro_f1(&[(predicted_boxes.clone(), gold.clone())], 0.5).unwrap();
    for _ in 0..1000 {
        let mut p = predicted_boxes.clone();
        let mut g = gold.clone();
        p.shuffle(&mut rng);
        g.shuffle(&mut rng);
        let listed = vpsynth::exec::RuntimeValue::List(p.iter().map(|bb| patch(*bb)).collect());
        assert_eq!(compare_detection(&listed, &g, 0.5), reference);
        assert_eq!(macro_f1(&[(p, g)], 0.5).unwrap(), f1_reference);
    }

    let elapsed = started.elapsed();
    budget("criterion 9", elapsed, Duration::from_secs(5));
    println!(
        "[PASS] criterion 9: IoU 1/3 fixture, F1 2/3 and macro 5/6, 1000-shuffle invariance \
         ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 10: export fidelity.
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_export_fidelity() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("finetune.jsonl");

    let program_text = "def execute_command(image):\n    image_patch = ImagePatch(image)\n    return bool_to_yesno(image_patch.exists(\"dog\"))\n";
    let set = vpsynth::selftrain::FilteredSet {
        trajectories: vec![Trajectory {
            task_id: "t".into(),
            question_type: "exist".into(),
            query: "Are there dogs?".into(),
            iteration: 1,
            pass_index: 0,
            program: vpsynth::policy::SampledProgram {
                text: program_text.into(),
                derivation: None,
                nll: None,
                sample_seed: 0,
            },
            prompt_hash: "0".repeat(16),
            noise_seed: 0,
            outcome: ExecOutcome {
                status: ExecStatus::Ok,
                result: Some(vpsynth::exec::RuntimeValue::Str("yes".into())),
                steps_used: 3,
                error: None,
                trace: None,
            },
            reward: 1,
        }],
    };
    let n = vpsynth::selftrain::export_finetune(&set, &path).unwrap();
    assert_eq!(n, 1);

    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "one metadata record plus one data record");

    // The instruction template, byte-exact around the substituted query.
    let record: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    let expected_instruction = "<s>Write a function using Python and the ImagePatch class (above) \
that could be executed to provide an answer to the query.\n\nConsider the following guidelines:\n\
- Use base Python (comparison, sorting) for basic logical operations, left/right/up/down, math, \
etc.\n\nQuery: Are there dogs?\nProgram:";
    assert_eq!(record["instruction"].as_str().unwrap(), expected_instruction);
    assert_eq!(record["program"].as_str().unwrap(), program_text);
    assert_eq!(record["query"].as_str().unwrap(), "Are there dogs?");

    // The metadata record carries the training settings verbatim.
    let metadata: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(metadata["record"], "metadata");
    assert_eq!(metadata["lora_rank"], 16);
    assert_eq!(metadata["batch_size"], 4);
    assert_eq!(metadata["learning_rate"], 0.0002);
    assert_eq!(metadata["warmup_ratio"], 0.1);
    assert_eq!(metadata["epochs"], 1);

    // Round trip.
    let (meta, examples) = vpsynth::selftrain::read_finetune(&path).unwrap();
    assert_eq!(meta.lora_rank, 16);
    assert_eq!(examples, vec![("Are there dogs?".to_string(), program_text.to_string())]);

    let elapsed = started.elapsed();
    budget("criterion 10", elapsed, Duration::from_secs(1));
    println!("[PASS] criterion 10: export template byte-exact, metadata verbatim, round trip ({elapsed:?})");
}

// ---------------------------------------------------------------------------
// Criterion 11: remote-policy plumbing against a local mock endpoint.
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_remote_policy_plumbing() {
    let started = Instant::now();
    let valid = "Sure, here you go:\ndef execute_command(image):\n    image_patch = ImagePatch(image)\n    return bool_to_yesno(image_patch.exists(\"dog\"))\n".to_string();
    let malformed = "I am sorry, I cannot write that program.".to_string();
    let (url, counter) = spawn_mock_endpoint(vec![valid, malformed]);

    let config = WorldConfig {
        question_types: vec!["exist".into(), "count".into()],
        ..Default::default()
    };
    let world_dir = tempfile::tempdir().unwrap();
    World::generate(&config, 16, 3, 2, 8).unwrap().save(world_dir.path()).unwrap();

    let endpoint = vpsynth::policy::EndpointConfig {
        url,
        timeout_ms: 10_000,
        max_in_flight: 2,
        ..Default::default()
    };
    let remote_out = tempfile::tempdir().unwrap();
    let remote_cfg = RunConfig {
        world_dir: world_dir.path().to_path_buf(),
        out_dir: remote_out.path().to_path_buf(),
        iterations: 1,
        passes_per_task: 1,
        eval_runs: 1,
        seed: 3,
        policy: PolicyKind::Remote,
        endpoint: Some(endpoint),
        workers: 1,
        ..Default::default()
    };
    let state = iterate(&remote_cfg).unwrap();
    assert_eq!(state.last_iteration(), Some(1), "the remote run completes");
    assert!(counter.load(std::sync::atomic::Ordering::SeqCst) > 0, "the endpoint was called");

    // Malformed completions became reward-0 parse-failure trajectories.
    let dump = std::fs::read_to_string(remote_out.path().join("trajectories/iter-0001.jsonl")).unwrap();
    let trajectories = vpsynth::selftrain::trajectories_from_jsonl(&dump).unwrap();
    let failures: Vec<&Trajectory> = trajectories
        .iter()
        .filter(|t| t.outcome.status == ExecStatus::ParseError && t.reward == 0)
        .collect();
    assert!(!failures.is_empty(), "malformed completions must become reward-0 trajectories");
    assert!(
        trajectories.iter().any(|t| t.outcome.status == ExecStatus::Ok),
        "valid completions execute"
    );

    // Prompts are byte-identical across policy kinds: the same config run
    // with the grammar policy records the same prompt hash per (task, pass).
    let grammar_out = tempfile::tempdir().unwrap();
    let grammar_cfg = RunConfig {
        policy: PolicyKind::Grammar,
        endpoint: None,
        out_dir: grammar_out.path().to_path_buf(),
        ..remote_cfg.clone()
    };
    let state2 = iterate(&grammar_cfg).unwrap();
    assert_eq!(state2.last_iteration(), Some(1));
    let dump2 =
        std::fs::read_to_string(grammar_out.path().join("trajectories/iter-0001.jsonl")).unwrap();
    let grammar_trajectories = vpsynth::selftrain::trajectories_from_jsonl(&dump2).unwrap();
    let key = |t: &Trajectory| (t.task_id.clone(), t.pass_index);
    let remote_prompts: BTreeMap<_, _> =
        trajectories.iter().map(|t| (key(t), t.prompt_hash.clone())).collect();
    let grammar_prompts: BTreeMap<_, _> =
        grammar_trajectories.iter().map(|t| (key(t), t.prompt_hash.clone())).collect();
    assert_eq!(remote_prompts, grammar_prompts, "prompts must not depend on the policy kind");

    let elapsed = started.elapsed();
    budget("criterion 11", elapsed, Duration::from_secs(30));
    println!(
        "[PASS] criterion 11: remote run completed, {} malformed completions became reward-0 \
         trajectories, prompts byte-identical across policy kinds ({elapsed:?})",
        failures.len()
    );
}
