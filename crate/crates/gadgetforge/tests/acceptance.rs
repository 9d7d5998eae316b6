//! End-to-end acceptance criteria, one test per criterion. Each test prints a
//! single `criterion NN PASS` line on success (run with `--nocapture` to see
//! them; a failing test reports the criterion in its name).

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::rc::Rc;

use gadgetforge::host::{HostRegistry, SinkCategory};
use gadgetforge::interp::{Interp, NoopHooks, PackageSource, RunOutcome};
use gadgetforge::pipeline::sarif::{to_sarif_string, validate_sarif};
use gadgetforge::pipeline::{
    analyze_package, load_package, verify_with_pollution, AnalysisResult, Budgets,
    ExecutionStrategy, LoadedPackage,
};
use gadgetforge::taint::{
    default_value, unwrap_deep, FlowKind, RunMode, SinkMode, TaintHooks, TaintState, TypeTag,
};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name)
}

fn analyze(name: &str) -> AnalysisResult {
    analyze_with(name, &Budgets::default())
}

fn analyze_with(name: &str, budgets: &Budgets) -> AnalysisResult {
    let pkg = load_package(&corpus(name)).expect("corpus package loads");
    let registry = Rc::new(HostRegistry::standard());
    analyze_package(&pkg, &ExecutionStrategy::default(), &registry, budgets)
}

fn total_runs(analysis: &AnalysisResult) -> usize {
    analysis
        .report
        .runs_meta
        .iter()
        .map(|m| m.plan.index)
        .max()
        .map(|i| i + 1)
        .unwrap_or(0)
}

/// Unintrusive instrumented pass over one entry file of a loaded package.
fn instrumented_run(pkg: &LoadedPackage, entry: &str) -> (RunOutcome, Rc<RefCell<TaintState>>) {
    let registry = Rc::new(HostRegistry::standard());
    let state = Rc::new(RefCell::new(TaintState::new()));
    state.borrow_mut().begin_run(0, RunMode::Unintrusive);
    state.borrow_mut().begin_command();
    let mut it = Interp::new(pkg.source.clone(), registry, 5_000_000);
    let mut hooks = TaintHooks::new(state.clone());
    let out = it.run_command(entry, &mut hooks);
    (out, state)
}

fn plain_run(pkg: &LoadedPackage, entry: &str) -> RunOutcome {
    let registry = Rc::new(HostRegistry::standard());
    let mut it = Interp::new(pkg.source.clone(), registry, 5_000_000);
    it.run_command(entry, &mut NoopHooks)
}

/// Run an inline single-file program unintrusively, returning the taint state.
fn run_inline(src: &str) -> Rc<RefCell<TaintState>> {
    let pkg = LoadedPackage {
        manifest: serde_json::from_str(r#"{"name":"inline"}"#).unwrap(),
        source: Rc::new(PackageSource::single("inline", "test/main.js", src)),
        version: "local".to_string(),
        dir: PathBuf::new(),
    };
    let (out, state) = instrumented_run(&pkg, "test/main.js");
    assert!(out.error.is_none(), "inline program failed: {:?}", out.error);
    state
}

fn pollutions(pairs: &[(&str, serde_json::Value)]) -> BTreeMap<String, serde_json::Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn verify(name: &str, pairs: &[(&str, serde_json::Value)]) -> RunOutcome {
    let pkg = load_package(&corpus(name)).expect("corpus package loads");
    let registry = Rc::new(HostRegistry::standard());
    let entry = ExecutionStrategy::default()
        .allowed_entries(&pkg.manifest)
        .into_iter()
        .next()
        .expect("package has a test entry");
    verify_with_pollution(
        &pkg,
        &registry,
        &Budgets::default(),
        &pollutions(pairs),
        &entry,
    )
    .expect("verify runs")
}

#[test]
fn criterion_01_running_example_single_standard_aci_hit() {
    let started = std::time::Instant::now();
    let analysis = analyze("gadget-example");
    let report = &analysis.report;
    assert_eq!(report.skipped, None);
    assert_eq!(report.hits.len(), 1, "exactly one deduplicated hit");
    let hit = &report.hits[0];
    assert_eq!(hit.mode, SinkMode::Standard);
    assert_eq!(hit.category, SinkCategory::Aci);
    assert_eq!(hit.sources[0].property, "bin");
    assert_eq!(hit.sink_module, "child_process");
    assert_eq!(hit.sink_name, "execSync");
    assert!(
        hit.flow
            .iter()
            .any(|s| s.kind == FlowKind::Read && s.detail == "bin"),
        "code flow has the opts.bin read step"
    );
    assert!(
        hit.flow
            .iter()
            .any(|s| s.kind == FlowKind::BinaryOp && s.detail.contains('+')),
        "code flow has the `+` concatenation step"
    );
    assert_eq!(total_runs(&analysis), 2, "1 unintrusive + 1 forced");
    let forced = report
        .runs_meta
        .iter()
        .find(|m| m.plan.index == 1)
        .expect("forced run recorded");
    assert_eq!(
        forced.plan.forced_props,
        ["newProcess".to_string()].into_iter().collect()
    );
    // the forced run's first hit comes from test 1 (`run({})`), whose guard
    // had to be flipped
    assert!(forced.hits[0].after_forced_flip);
    assert!(
        started.elapsed() < std::time::Duration::from_secs(1),
        "runtime under one second"
    );
    println!("criterion 01 PASS — running example: one Standard/ACI hit, bin -> execSync, 2 runs");
}

#[test]
fn criterion_02_delayed_injection_preserves_natural_semantics() {
    let pkg = load_package(&corpus("gadget-example")).unwrap();
    let (out, state) = instrumented_run(&pkg, "test/test.js");
    let st = state.borrow();
    let bin = st
        .taints
        .iter()
        .find(|t| t.borrow().primary_property() == "bin")
        .expect("a taint for `bin` was injected");
    assert!(
        matches!(&bin.borrow().underlying, gadgetforge::interp::Value::Text(s) if s == "./default.exe"),
        "delayed injection adopted the `||` fallback as underlying value"
    );
    let plain = plain_run(&pkg, "test/test.js");
    assert_eq!(out.effects_log, plain.effects_log);
    assert_eq!(out.stdout_log, plain.stdout_log);
    println!("criterion 02 PASS — delayed injection: underlying \"./default.exe\", effects match plain run");
}

#[test]
fn criterion_03_non_interference_corpus_and_generated() {
    // the full corpus: the unintrusive instrumented pass must be
    // behavior-identical to the plain pass
    let corpus_root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut dirs: Vec<_> = std::fs::read_dir(&corpus_root)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    assert!(dirs.len() >= 12);
    let strategy = ExecutionStrategy::default();
    for dir in &dirs {
        let pkg = load_package(dir).unwrap();
        for entry in strategy.allowed_entries(&pkg.manifest) {
            let plain = plain_run(&pkg, &entry);
            let (instrumented, _) = instrumented_run(&pkg, &entry);
            assert_eq!(
                plain, instrumented,
                "non-interference violated in {} ({entry})",
                pkg.manifest.name
            );
        }
    }
    // 200 generated taint-free programs (no undefined-property reads)
    for seed in 0..200u64 {
        let src = generated::program(seed);
        let pkg = LoadedPackage {
            manifest: serde_json::from_str(r#"{"name":"gen"}"#).unwrap(),
            source: Rc::new(PackageSource::single("gen", "test/main.js", &src)),
            version: "gen".to_string(),
            dir: PathBuf::new(),
        };
        let plain = plain_run(&pkg, "test/main.js");
        let (instrumented, state) = instrumented_run(&pkg, "test/main.js");
        assert_eq!(plain, instrumented, "seed {seed} diverged:\n{src}");
        assert_eq!(
            state.borrow().injections,
            0,
            "seed {seed} unexpectedly injected a taint:\n{src}"
        );
    }
    println!("criterion 03 PASS — non-interference on full corpus + 200 generated programs");
}

#[test]
fn criterion_04_special_sinks_both_directions() {
    let special_hits = |options: &str| {
        let src = format!("std.child_process.spawn('node', ['f.js'], {options});\n");
        let state = run_inline(&src);
        let st = state.borrow();
        st.hits
            .iter()
            .filter(|h| h.mode == SinkMode::Special)
            .count()
    };
    // both groups pollutable -> hit, with zero sources
    let state = run_inline("std.child_process.spawn('node', ['f.js'], {});\n");
    {
        let st = state.borrow();
        let hit = st
            .hits
            .iter()
            .find(|h| h.mode == SinkMode::Special)
            .expect("special hit on bare options");
        assert!(hit.sources.is_empty(), "special hits carry zero sources");
        assert_eq!(hit.category, SinkCategory::Aci);
    }
    // defining shell kills both groups ([shell,env] and [shell,NODE_OPTIONS])
    assert_eq!(special_hits("{ shell: false }"), 0);
    // defining shell and env also leaves no satisfiable group
    assert_eq!(special_hits("{ shell: false, env: {} }"), 0);
    // defining only env: [shell,NODE_OPTIONS] is still fully pollutable
    assert_eq!(special_hits("{ env: {} }"), 1);
    // defining only NODE_OPTIONS: [shell,env] is still fully pollutable
    assert_eq!(special_hits("{ NODE_OPTIONS: '' }"), 1);
    // corpus package: runNode (bare options) hits, runPinned does not
    let analysis = analyze("spawn-options");
    let specials: Vec<_> = analysis
        .report
        .hits
        .iter()
        .filter(|h| h.mode == SinkMode::Special)
        .collect();
    assert_eq!(specials.len(), 1);
    assert_eq!(specials[0].sink_loc.file, "lib/runner.js");
    println!("criterion 04 PASS — special sinks: group satisfaction asserted in both directions");
}

#[test]
fn criterion_05_name_matched_mailer_shape() {
    let analysis = analyze("mailer-shaped");
    let name_matched = analysis
        .report
        .hits
        .iter()
        .find(|h| h.mode == SinkMode::NameMatched)
        .expect("name-matched hit on _spawn");
    assert_eq!(name_matched.sink_name, "_spawn");
    assert!(
        name_matched.sources.iter().any(|s| s.property == "path"),
        "source set includes `path`"
    );
    let out = verify(
        "mailer-shaped",
        &[
            ("sendmail", serde_json::json!(1)),
            ("path", serde_json::json!("X")),
            ("args", serde_json::json!(["-e", "M"])),
        ],
    );
    let spawn = out
        .effects_log
        .iter()
        .find(|e| e.module == "child_process" && e.name == "spawn")
        .expect("spawn intent under pollution");
    assert!(spawn.detail.contains('X') && spawn.detail.contains('M'));
    println!("criterion 05 PASS — name-matched _spawn with source `path`; verified spawn intent");
}

#[test]
fn criterion_06_scheduler_expansion_and_budget() {
    let analysis = analyze("chain-reveal");
    assert_eq!(analysis.report.hits.len(), 1, "guarded sink found");
    assert_eq!(analysis.report.hits[0].category, SinkCategory::Aci);
    let expected: std::collections::BTreeSet<String> =
        ["fast".to_string(), "target".to_string()].into_iter().collect();
    assert!(
        analysis
            .report
            .runs_meta
            .iter()
            .any(|m| m.plan.forced_props == expected),
        "the sink was reached with plan {{fast, target}}"
    );
    assert!(total_runs(&analysis) <= 4);
    let capped = analyze_with(
        "chain-reveal",
        &Budgets {
            max_runs: 1,
            step_budget: 5_000_000,
        },
    );
    assert!(capped.report.hits.is_empty(), "maxRuns=1 allows no forced runs");
    assert_eq!(total_runs(&capped), 1);
    println!("criterion 06 PASS — scheduler: {{fast,target}} in <=4 runs; maxRuns=1 finds nothing");
}

#[test]
fn criterion_07_type_inference_table() {
    let tag_of = |src: &str, prop: &str| -> TypeTag {
        let state = run_inline(src);
        let st = state.borrow();
        let t = st
            .taints
            .iter()
            .find(|t| t.borrow().primary_property() == prop)
            .unwrap_or_else(|| panic!("no taint for `{prop}`"));
        let tag = t.borrow().inferred;
        tag
    };
    // rule 1: fallback value of `||` fixes the type
    assert_eq!(tag_of("let o = {};\nlet x = o.a || 5;\n", "a"), TypeTag::Number);
    assert_eq!(tag_of("let o = {};\nlet x = o.a || 'd';\n", "a"), TypeTag::Text);
    // rule 2: `+` that produced text marks Unknown operands as text
    assert_eq!(tag_of("let o = {};\nlet y = o.b + 'suffix';\n", "b"), TypeTag::Text);
    // rule 3: method names
    assert_eq!(tag_of("let o = {};\no.c.substring(1);\n", "c"), TypeTag::Text);
    assert_eq!(tag_of("let o = {};\no.d.push(1);\n", "d"), TypeTag::Array);
    // rule 4: arithmetic coercion hint
    assert_eq!(tag_of("let o = {};\nlet z = o.e - 1;\n", "e"), TypeTag::Number);
    // rule 5: typeof comparison yields a typed default candidate
    let state = run_inline("let o = {};\nif (typeof o.f === 'number') { }\n");
    {
        let st = state.borrow();
        let c = st.candidates.get("f").expect("candidate for `f`");
        assert_eq!(c.tag, TypeTag::Number);
    }
    // rule 6: literal comparison yields a concrete candidate value
    let state = run_inline("let o = {};\nif (o.g === 'admin') { }\n");
    {
        let st = state.borrow();
        let c = st.candidates.get("g").expect("candidate for `g`");
        assert_eq!(c.tag, TypeTag::Text);
        assert_eq!(
            c.value,
            gadgetforge::taint::CandidateLit::Text("admin".to_string())
        );
    }
    // Unknown defaults to text at unwrap
    let pkg = Rc::new(PackageSource::single("t", "test/main.js", ""));
    let mut it = Interp::new(pkg, Rc::new(HostRegistry::standard()), 1_000);
    assert!(matches!(
        default_value(&mut it, TypeTag::Unknown),
        gadgetforge::interp::Value::Text(s) if s.is_empty()
    ));
    let state = run_inline("let o = {};\nstd.console.log(o.h);\n");
    assert_eq!(state.borrow().hits.len(), 0); // console is not a sink
    println!("criterion 07 PASS — all six type-inference rules; Unknown unwraps to text");
}

#[test]
fn criterion_08_sarif_validates_and_is_byte_stable() {
    for name in [
        "gadget-example",
        "mailer-shaped",
        "chain-reveal",
        "code-eval",
        "plugin-loader",
        "spawn-options",
    ] {
        let analysis = analyze(name);
        let text = to_sarif_string(&analysis.report);
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        validate_sarif(&doc).unwrap_or_else(|e| panic!("{name}: invalid SARIF: {e}"));
    }
    let first = to_sarif_string(&analyze("gadget-example").report);
    let second = to_sarif_string(&analyze("gadget-example").report);
    assert_eq!(first, second, "SARIF is byte-identical across repeated runs");
    assert_eq!(
        serde_json::from_str::<serde_json::Value>(&first).unwrap()["runs"][0]["results"]
            .as_array()
            .unwrap()
            .len(),
        1
    );
    println!("criterion 08 PASS — SARIF validates and is byte-stable");
}

#[test]
fn criterion_09_oracle_agreement_flow_and_verify() {
    // (package, pollutions, expected effect substring)
    let cases: Vec<(&str, Vec<(&str, serde_json::Value)>, &str)> = vec![
        (
            "gadget-example",
            vec![
                ("bin", serde_json::json!("evil.exe")),
                ("newProcess", serde_json::json!(true)),
            ],
            "evil.exe --flag",
        ),
        (
            "spawn-options",
            vec![("shell", serde_json::json!(true))],
            "shell=true",
        ),
        (
            "code-eval",
            vec![("greeting", serde_json::json!("std.console.log('pwned');"))],
            "pwned",
        ),
        (
            "template-fn",
            vec![("body", serde_json::json!("return 'pwned';"))],
            "return 'pwned';",
        ),
        (
            "plugin-loader",
            vec![("plugin", serde_json::json!("evil"))],
            "evil.js",
        ),
        (
            "mailer-shaped",
            vec![
                ("sendmail", serde_json::json!(true)),
                ("path", serde_json::json!("evil-mailer")),
            ],
            "evil-mailer",
        ),
        (
            "chain-reveal",
            vec![
                ("fast", serde_json::json!(true)),
                ("target", serde_json::json!("owned")),
            ],
            "handle owned",
        ),
    ];
    for (name, pairs, expected) in cases {
        let analysis = analyze(name);
        assert!(
            !analysis.report.hits.is_empty(),
            "{name}: taint analysis reports a flow"
        );
        let out = verify(name, &pairs);
        let fired = out
            .effects_log
            .iter()
            .find(|e| e.category != SinkCategory::None && e.detail.contains(expected));
        assert!(
            fired.is_some(),
            "{name}: expected a sink effect containing {expected:?}, got {:?}",
            out.effects_log
        );
    }
    // the mock sink demonstrates its intent on stdout instead of a host effect
    let analysis = analyze("exec-mock");
    assert!(analysis
        .report
        .hits
        .iter()
        .any(|h| h.mode == SinkMode::NameMatched));
    let out = verify("exec-mock", &[("command", serde_json::json!("evil-cmd"))]);
    assert!(out
        .stdout_log
        .iter()
        .any(|l| l.contains("would run: evil-cmd")));
    println!("criterion 09 PASS — 8/8 corpus gadgets: flow reported and pollution fires the sink");
}

#[test]
fn criterion_10_determinism_across_full_passes() {
    let corpus_root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut dirs: Vec<_> = std::fs::read_dir(&corpus_root)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let pass = || -> Vec<String> {
        dirs.iter()
            .map(|d| {
                let analysis = {
                    let pkg = load_package(d).unwrap();
                    let registry = Rc::new(HostRegistry::standard());
                    analyze_package(
                        &pkg,
                        &ExecutionStrategy::default(),
                        &registry,
                        &Budgets::default(),
                    )
                };
                serde_json::to_string(&analysis.report).unwrap()
            })
            .collect()
    };
    assert_eq!(pass(), pass(), "report lines identical across full passes");
    println!("criterion 10 PASS — two full analysis passes produce identical report lines");
}

/// Deterministic generator for taint-free MiniJS programs: every property
/// read targets a property that was written first, so no source can fire.
mod generated {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn program(seed: u64) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut src = String::new();
        let mut num_vars: Vec<String> = Vec::new();
        let mut text_vars: Vec<String> = Vec::new();
        let mut next = 0usize;
        let mut fresh = |prefix: &str| {
            next += 1;
            format!("{prefix}{next}")
        };
        let statements = rng.gen_range(5..15);
        for _ in 0..statements {
            match rng.gen_range(0..8) {
                0 => {
                    let v = fresh("n");
                    src.push_str(&format!("let {v} = {};\n", rng.gen_range(-50..50)));
                    num_vars.push(v);
                }
                1 => {
                    let v = fresh("s");
                    src.push_str(&format!("let {v} = 'w{}';\n", rng.gen_range(0..100)));
                    text_vars.push(v);
                }
                2 if !num_vars.is_empty() => {
                    let a = &num_vars[rng.gen_range(0..num_vars.len())];
                    let b = &num_vars[rng.gen_range(0..num_vars.len())];
                    let op = ["+", "-", "*"][rng.gen_range(0..3)];
                    let v = fresh("n");
                    src.push_str(&format!("let {v} = {a} {op} {b};\n"));
                    num_vars.push(v);
                }
                3 if !text_vars.is_empty() => {
                    let a = &text_vars[rng.gen_range(0..text_vars.len())];
                    let v = fresh("s");
                    src.push_str(&format!("let {v} = {a} + '!';\n"));
                    text_vars.push(v);
                }
                4 => {
                    // object with defined properties, read back immediately
                    let o = fresh("o");
                    let v = fresh("n");
                    src.push_str(&format!(
                        "let {o} = {{ a: {}, b: 'x' }};\nlet {v} = {o}.a;\n",
                        rng.gen_range(0..10)
                    ));
                    num_vars.push(v);
                }
                5 if !num_vars.is_empty() => {
                    let a = &num_vars[rng.gen_range(0..num_vars.len())];
                    src.push_str(&format!(
                        "if ({a} > 0) {{ std.console.log('pos'); }} else {{ std.console.log('neg'); }}\n"
                    ));
                }
                6 => {
                    let i = fresh("i");
                    let bound = rng.gen_range(1..5);
                    src.push_str(&format!(
                        "let {i} = 0;\nwhile ({i} < {bound}) {{ {i} = {i} + 1; }}\nstd.console.log({i});\n"
                    ));
                }
                _ => {
                    if !text_vars.is_empty() {
                        let a = &text_vars[rng.gen_range(0..text_vars.len())];
                        src.push_str(&format!("std.console.log({a}.toUpperCase());\n"));
                    } else {
                        src.push_str("std.console.log('noop');\n");
                    }
                }
            }
        }
        src.push_str("std.test.assert(true, 'generated');\n");
        src
    }
}

// keep the unused-import lint honest: unwrap_deep is exercised via the
// pipeline; reference it here so acceptance covers its public signature too
#[test]
fn unwrap_is_reexported_and_idempotent_on_plain_values() {
    let pkg = Rc::new(PackageSource::single("t", "test/main.js", ""));
    let mut it = Interp::new(pkg, Rc::new(HostRegistry::standard()), 1_000);
    let (v, found) = unwrap_deep(&mut it, &gadgetforge::interp::Value::Num(3.0), 4);
    assert!(found.is_empty());
    assert!(matches!(v, gadgetforge::interp::Value::Num(n) if n == 3.0));
}
