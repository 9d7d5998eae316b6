//! Proxy-based tainting: source records, the taint wrapper with type
//! inference, flow tracking, deep unwrap, and the per-analysis taint state.

pub mod hooks;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::frontend::SourceLocation;
use crate::host::SinkCategory;
use crate::interp::value::TaintRef;
use crate::interp::{Interp, Value};

pub use hooks::TaintHooks;

/// Inferred runtime type of a taint wrapper. Transitions only ever go
/// Unknown -> concrete or concrete -> concrete (rules 1-6), never back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TypeTag {
    Unknown,
    Text,
    Number,
    Boolean,
    Array,
    Object,
    Function,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InjectionMode {
    Immediate,
    DelayedConditional,
}

/// Where and how a taint was injected.
#[derive(Debug, Clone, Serialize)]
pub struct SourceRecord {
    pub property: String,
    pub loc: SourceLocation,
    /// Injection precondition; always true for injected sources.
    pub base_has_root_proto: bool,
    pub mode: InjectionMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowKind {
    Read,
    BinaryOp,
    UnaryOp,
    Coercion,
    BuiltinPropagation,
    ConditionTest,
    SinkArg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStep {
    pub kind: FlowKind,
    pub detail: String,
    pub loc: SourceLocation,
}

/// The taint wrapper payload. `underlying` is never itself Tainted.
pub struct TaintData {
    pub id: u64,
    pub underlying: Value,
    pub inferred: TypeTag,
    /// Primary source first; merged on binary propagation.
    pub sources: Vec<Rc<SourceRecord>>,
    pub flow: Vec<FlowStep>,
    /// Awaiting delayed injection (conditional-assignment position).
    pub pending: bool,
    /// Other pending taints to finalize with the same fallback value.
    pub linked: Vec<TaintRef>,
    /// Set when this taint is the result of `typeof` on a taint: the source
    /// properties the observation refers to (inference rule 5).
    pub typeof_of: Option<Vec<String>>,
    /// A rule-6 candidate value was substituted for this run.
    pub candidate_applied: bool,
}

impl TaintData {
    pub fn primary_property(&self) -> String {
        self.sources
            .first()
            .map(|s| s.property.clone())
            .unwrap_or_default()
    }

    pub fn props(&self) -> BTreeSet<String> {
        self.sources.iter().map(|s| s.property.clone()).collect()
    }
}

pub fn tag_of_value(v: &Value) -> TypeTag {
    match v {
        Value::Text(_) => TypeTag::Text,
        Value::Num(_) => TypeTag::Number,
        Value::Bool(_) => TypeTag::Boolean,
        Value::Array(_) => TypeTag::Array,
        Value::Object(_) => TypeTag::Object,
        Value::Function(_) | Value::Host(_) => TypeTag::Function,
        _ => TypeTag::Unknown,
    }
}

/// The per-type default table; Unknown is treated as Text.
pub fn default_value(it: &mut Interp, tag: TypeTag) -> Value {
    match tag {
        TypeTag::Unknown | TypeTag::Text => Value::Text(String::new()),
        TypeTag::Number => Value::Num(0.0),
        TypeTag::Boolean => Value::Bool(false),
        TypeTag::Array => Value::Array(it.heap.alloc_array(Vec::new())),
        TypeTag::Object => Value::Object(it.heap.alloc_object()),
        TypeTag::Function => Value::Function(Rc::new(crate::interp::FunctionValue {
            name: None,
            params: Vec::new(),
            body: Rc::new(Vec::new()),
            env: crate::interp::env::root_scope(),
            file: "<default>".to_string(),
        })),
    }
}

/// Taint found by a deep unwrap, with the access path it was found at.
#[derive(Clone)]
pub struct FoundTaint {
    pub path: Vec<String>,
    pub taint: TaintRef,
}

/// Structurally replace every taint wrapper (up to `max_depth`) by its
/// underlying value (or the type default when the underlying is Undefined).
/// Taint-free values pass through by reference identity.
pub fn unwrap_deep(it: &mut Interp, v: &Value, max_depth: usize) -> (Value, Vec<FoundTaint>) {
    let mut found = Vec::new();
    let mut path = Vec::new();
    let plain = unwrap_walk(it, v, max_depth, &mut path, &mut found);
    (plain, found)
}

fn unwrap_walk(
    it: &mut Interp,
    v: &Value,
    depth: usize,
    path: &mut Vec<String>,
    out: &mut Vec<FoundTaint>,
) -> Value {
    match v {
        Value::Tainted(t) => {
            out.push(FoundTaint {
                path: path.clone(),
                taint: t.clone(),
            });
            let (underlying, inferred) = {
                let td = t.borrow();
                (td.underlying.clone(), td.inferred)
            };
            match underlying {
                Value::Undefined => default_value(it, inferred),
                other if depth > 0 => unwrap_walk(it, &other, depth - 1, path, out),
                other => other,
            }
        }
        Value::Object(r) if depth > 0 => {
            if !crate::host::contains_taint(it, v, depth) {
                return v.clone();
            }
            let (props, proto) = {
                let rec = it.heap.get(*r);
                (rec.props.clone(), rec.proto)
            };
            let copy = it.heap.alloc_object_with_proto(proto);
            for (k, pv) in props.iter() {
                path.push(k.clone());
                let unwrapped = unwrap_walk(it, pv, depth - 1, path, out);
                path.pop();
                it.heap.set_prop(copy, k, unwrapped);
            }
            Value::Object(copy)
        }
        Value::Array(r) if depth > 0 => {
            if !crate::host::contains_taint(it, v, depth) {
                return v.clone();
            }
            let elements = it.heap.get(*r).elements.clone().unwrap_or_default();
            let mut unwrapped = Vec::with_capacity(elements.len());
            for (i, e) in elements.iter().enumerate() {
                path.push(i.to_string());
                unwrapped.push(unwrap_walk(it, e, depth - 1, path, out));
                path.pop();
            }
            Value::Array(it.heap.alloc_array(unwrapped))
        }
        other => other.clone(),
    }
}

/// Non-destructive scan for taint wrappers within `depth` levels.
pub fn find_taints(it: &Interp, v: &Value, depth: usize) -> Vec<TaintRef> {
    let mut out = Vec::new();
    find_walk(it, v, depth, &mut out);
    out
}

fn find_walk(it: &Interp, v: &Value, depth: usize, out: &mut Vec<TaintRef>) {
    match v {
        Value::Tainted(t) => {
            out.push(t.clone());
            if depth > 0 {
                let underlying = t.borrow().underlying.clone();
                find_walk(it, &underlying, depth - 1, out);
            }
        }
        Value::Object(r) | Value::Array(r) if depth > 0 => {
            let rec = it.heap.get(*r);
            let props: Vec<Value> = rec.props.values().cloned().collect();
            let elements = rec.elements.clone().unwrap_or_default();
            for p in props {
                find_walk(it, &p, depth - 1, out);
            }
            for e in elements {
                find_walk(it, &e, depth - 1, out);
            }
        }
        _ => {}
    }
}

// ---- analysis-wide taint state ----

/// A tainted conditional observation; deduped by (loc, props, natural).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub loc: SourceLocation,
    pub props: BTreeSet<String>,
    pub natural: bool,
    pub discovered_in_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunMode {
    Unintrusive,
    Forced(BTreeSet<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CandidateLit {
    Text(String),
    Num(f64),
    Bool(bool),
}

impl CandidateLit {
    pub fn to_value(&self) -> Value {
        match self {
            CandidateLit::Text(s) => Value::Text(s.clone()),
            CandidateLit::Num(n) => Value::Num(*n),
            CandidateLit::Bool(b) => Value::Bool(*b),
        }
    }
}

/// Concrete forcing value for a property, from comparison/typeof observations
/// (rules 5-6).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateValue {
    pub value: CandidateLit,
    pub tag: TypeTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SinkMode {
    Standard,
    NameMatched,
    Special,
}

impl SinkMode {
    pub fn label(self) -> &'static str {
        match self {
            SinkMode::Standard => "standard",
            SinkMode::NameMatched => "name-matched",
            SinkMode::Special => "special",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub property: String,
    pub loc: SourceLocation,
}

/// One recorded source-to-sink flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinkHit {
    pub mode: SinkMode,
    pub sink_module: String,
    pub sink_name: String,
    pub sink_loc: SourceLocation,
    pub category: SinkCategory,
    /// Deduped by property + loc; empty for Special hits.
    pub sources: Vec<SourceSummary>,
    /// Ends with a SinkArg step.
    pub flow: Vec<FlowStep>,
    /// Access path of the tainted argument, or the satisfied special condition.
    pub arg_path: String,
    pub run_index: usize,
    pub forced_props: Vec<String>,
    pub after_forced_flip: bool,
    pub only_from_test_files: bool,
}

impl SinkHit {
    /// Dedup key: (source property, source loc, sink id, sink loc, mode).
    pub fn flow_key(&self) -> String {
        let (prop, src_loc) = match self.sources.first() {
            Some(s) => (s.property.clone(), s.loc.display_key()),
            None => ("-".to_string(), "-".to_string()),
        };
        format!(
            "{prop}|{src_loc}|{}.{}|{}|{}",
            self.sink_module,
            self.sink_name,
            self.sink_loc.display_key(),
            self.mode.label()
        )
    }
}

/// Source keys never injected: engine-internal names that exist on real root
/// prototypes and are not plausible pollution targets.
pub const IGNORED_SOURCE_KEYS: &[&str] = &[
    "toString",
    "valueOf",
    "constructor",
    "prototype",
    "then",
    "length",
    "@@iterator",
];

/// Shared across every run of one package analysis.
pub struct TaintState {
    pub next_id: u64,
    pub run_index: usize,
    pub mode: RunMode,
    pub candidates: BTreeMap<String, CandidateValue>,
    pub records: Vec<BranchRecord>,
    pub hits: Vec<SinkHit>,
    pub pending: HashMap<(String, u32), Vec<TaintRef>>,
    /// Every taint created (inspection / testing).
    pub taints: Vec<TaintRef>,
    /// Forced-outcome negations performed in the current command run.
    pub flips: u32,
    pub injections: u64,
    /// Reads that found a value on an intermediate (non-root) prototype:
    /// logged, never injected.
    pub intermediate_proto_hits: Vec<(String, SourceLocation)>,
}

impl Default for TaintState {
    fn default() -> Self {
        Self::new()
    }
}

impl TaintState {
    pub fn new() -> Self {
        TaintState {
            next_id: 0,
            run_index: 0,
            mode: RunMode::Unintrusive,
            candidates: BTreeMap::new(),
            records: Vec::new(),
            hits: Vec::new(),
            pending: HashMap::new(),
            taints: Vec::new(),
            flips: 0,
            injections: 0,
            intermediate_proto_hits: Vec::new(),
        }
    }

    pub fn begin_run(&mut self, index: usize, mode: RunMode) {
        self.run_index = index;
        self.mode = mode;
    }

    /// Reset per-command bookkeeping (fresh interpreter per test command).
    pub fn begin_command(&mut self) {
        self.flips = 0;
        self.pending.clear();
    }

    pub fn push_record(&mut self, rec: BranchRecord) {
        let dup = self
            .records
            .iter()
            .any(|r| r.loc == rec.loc && r.props == rec.props && r.natural == rec.natural);
        if !dup {
            self.records.push(rec);
        }
    }

    pub fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn forced_props(&self) -> Vec<String> {
        match &self.mode {
            RunMode::Unintrusive => Vec::new(),
            RunMode::Forced(props) => props.iter().cloned().collect(),
        }
    }
}

/// New taint ref helper.
pub fn new_taint(state: &mut TaintState, data: TaintData) -> TaintRef {
    let t = Rc::new(RefCell::new(data));
    state.taints.push(t.clone());
    t
}

/// Merge source lists, deduping by property + location, primary-first.
pub fn merge_sources(lists: &[&[Rc<SourceRecord>]]) -> Vec<Rc<SourceRecord>> {
    let mut out: Vec<Rc<SourceRecord>> = Vec::new();
    for list in lists {
        for s in *list {
            let dup = out
                .iter()
                .any(|o| o.property == s.property && o.loc == s.loc);
            if !dup {
                out.push(s.clone());
            }
        }
    }
    out
}

pub fn sources_to_summaries(sources: &[Rc<SourceRecord>]) -> Vec<SourceSummary> {
    sources
        .iter()
        .map(|s| SourceSummary {
            property: s.property.clone(),
            loc: s.loc.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::HostRegistry;
    use crate::interp::{PackageSource, RunOutcome, RunStatus};

    fn run_with_state(
        src: &str,
        state: Rc<RefCell<TaintState>>,
    ) -> (Rc<RefCell<TaintState>>, RunOutcome) {
        let pkg = PackageSource::single("t", "test/main.mjs", src);
        let registry = Rc::new(HostRegistry::standard());
        let mut it = Interp::new(Rc::new(pkg), registry, 1_000_000);
        let mut hooks = TaintHooks::new(state.clone());
        state.borrow_mut().begin_command();
        let out = it.run_command("test/main.mjs", &mut hooks);
        (state, out)
    }

    fn run_src(src: &str) -> (Rc<RefCell<TaintState>>, RunOutcome) {
        run_with_state(src, Rc::new(RefCell::new(TaintState::new())))
    }

    fn taint_for(state: &Rc<RefCell<TaintState>>, prop: &str) -> TaintRef {
        state
            .borrow()
            .taints
            .iter()
            .find(|t| t.borrow().primary_property() == prop && t.borrow().sources.len() == 1)
            .cloned()
            .unwrap_or_else(|| panic!("no taint injected for `{prop}`"))
    }

    #[test]
    fn rule_1_fallback_value_fixes_type() {
        let (state, out) = run_src("let o = {};\nlet v = o.conf || 'dflt';\n");
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        let t = taint_for(&state, "conf");
        let td = t.borrow();
        assert!(!td.pending);
        assert_eq!(td.inferred, TypeTag::Text);
        assert!(matches!(&td.underlying, Value::Text(s) if s == "dflt"));
        // delayed injections leave no forceable branch records
        assert!(state.borrow().records.is_empty());
    }

    #[test]
    fn rule_2_concat_with_text_infers_text() {
        let (state, out) = run_src("let o = {};\nlet s = o.name + 'x';\n");
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        let t = taint_for(&state, "name");
        assert_eq!(t.borrow().inferred, TypeTag::Text);
        // the result wrapper carries the propagated flow
        let result = state
            .borrow()
            .taints
            .iter()
            .find(|c| c.borrow().flow.last().map(|s| s.kind) == Some(FlowKind::BinaryOp))
            .cloned()
            .expect("binary result taint");
        assert!(matches!(&result.borrow().underlying, Value::Text(s) if s == "x"));
    }

    #[test]
    fn rule_3_method_names_infer_receiver_type() {
        let (state, out) = run_src(
            "let o = {};\nlet t = o.cmd;\nt.substring(0, 1);\nlet u = o.list;\nu.push(1);\n",
        );
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        assert_eq!(taint_for(&state, "cmd").borrow().inferred, TypeTag::Text);
        assert_eq!(taint_for(&state, "list").borrow().inferred, TypeTag::Array);
    }

    #[test]
    fn rule_4_coercion_hint_infers_type() {
        let (state, out) = run_src("let o = {};\nlet n = 3 - o.num;\n");
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        let t = taint_for(&state, "num");
        let td = t.borrow();
        assert_eq!(td.inferred, TypeTag::Number);
        assert!(td.flow.iter().any(|s| s.kind == FlowKind::Coercion));
    }

    #[test]
    fn rule_5_typeof_comparison_yields_typed_candidate() {
        let (state, out) = run_src("let o = {};\nif (typeof o.mode === 'number') { }\n");
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        let st = state.borrow();
        let c = st.candidates.get("mode").expect("candidate for mode");
        assert_eq!(c.tag, TypeTag::Number);
        assert_eq!(c.value, CandidateLit::Num(0.0));
    }

    #[test]
    fn rule_6_literal_comparison_yields_candidate_value() {
        let (state, out) = run_src("let o = {};\nif (o.flag === 'fast') { }\n");
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        let st = state.borrow();
        let c = st.candidates.get("flag").expect("candidate for flag");
        assert_eq!(c.tag, TypeTag::Text);
        assert_eq!(c.value, CandidateLit::Text("fast".to_string()));
    }

    #[test]
    fn chained_fallbacks_delay_all_reads() {
        let (state, out) = run_src("let o = {};\nlet v = o.a || o.b || 'z';\n");
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        for prop in ["a", "b"] {
            let t = taint_for(&state, prop);
            let td = t.borrow();
            assert!(!td.pending, "`{prop}` still pending");
            assert!(matches!(&td.underlying, Value::Text(s) if s == "z"));
        }
        assert!(state.borrow().records.is_empty());
    }

    #[test]
    fn immediate_condition_records_branch_and_negation_forces_it() {
        let src = "let o = {};\nif (o.newProcess) { std.console.log('forced'); }\n";
        let (state, out) = run_src(src);
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        assert!(out.stdout_log.is_empty());
        {
            let st = state.borrow();
            assert_eq!(st.records.len(), 1);
            let rec = &st.records[0];
            assert!(rec.props.contains("newProcess"));
            assert!(!rec.natural);
        }
        // forced run on the recorded property takes the branch
        let forced = Rc::new(RefCell::new(TaintState::new()));
        forced.borrow_mut().begin_run(
            1,
            RunMode::Forced(["newProcess".to_string()].into_iter().collect()),
        );
        let (forced, out2) = run_with_state(src, forced);
        assert_eq!(out2.status, RunStatus::Completed, "{:?}", out2.error);
        assert_eq!(out2.stdout_log, vec!["forced".to_string()]);
        assert_eq!(forced.borrow().flips, 1);
    }

    #[test]
    fn candidate_applied_taints_keep_natural_outcome() {
        let src = "let o = {};\nif (o.flag === 'fast') { std.console.log('fastpath'); }\n";
        let forced = Rc::new(RefCell::new(TaintState::new()));
        forced.borrow_mut().candidates.insert(
            "flag".to_string(),
            CandidateValue {
                value: CandidateLit::Text("fast".to_string()),
                tag: TypeTag::Text,
            },
        );
        forced
            .borrow_mut()
            .begin_run(1, RunMode::Forced(["flag".to_string()].into_iter().collect()));
        let (forced, out) = run_with_state(src, forced);
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        assert_eq!(out.stdout_log, vec!["fastpath".to_string()]);
        assert_eq!(forced.borrow().flips, 0, "candidate runs must not negate");
    }

    #[test]
    fn standard_sink_hit_with_default_unwrap() {
        let (state, out) =
            run_src("let o = {};\nstd.child_process.exec(o.cmd, null);\n");
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        let st = state.borrow();
        assert_eq!(st.hits.len(), 1);
        let hit = &st.hits[0];
        assert_eq!(hit.mode, SinkMode::Standard);
        assert_eq!(hit.category, SinkCategory::Aci);
        assert_eq!(hit.sources.len(), 1);
        assert_eq!(hit.sources[0].property, "cmd");
        assert_eq!(hit.flow.last().unwrap().kind, FlowKind::SinkArg);
        assert!(hit.only_from_test_files);
        // the host saw the unwrapped default (Unknown -> Text -> "")
        assert_eq!(out.effects_log.len(), 1);
        assert_eq!(out.effects_log[0].name, "exec");
    }

    #[test]
    fn name_matched_sink_on_user_function() {
        let src = "function fakeExec(c) { return c; }\nlet o = {};\nfakeExec(o.payload);\n";
        let (state, out) = run_src(src);
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        let st = state.borrow();
        assert_eq!(st.hits.len(), 1);
        let hit = &st.hits[0];
        assert_eq!(hit.mode, SinkMode::NameMatched);
        assert_eq!(hit.sink_module, "user");
        assert_eq!(hit.sink_name, "fakeExec");
        assert_eq!(hit.category, SinkCategory::Aci);
        assert_eq!(hit.sources[0].property, "payload");
    }

    #[test]
    fn ignored_keys_and_defined_props_are_not_sources() {
        let (state, out) = run_src(
            "let o = { x: 1 };\nlet a = o.x;\nlet b = o.toString;\nlet c = o.length;\n",
        );
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        assert_eq!(state.borrow().injections, 0);
    }

    #[test]
    fn bare_objects_never_inject() {
        let (state, out) = run_src("let o = std.obj.bare();\nlet v = o.anything;\n");
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        assert_eq!(state.borrow().injections, 0);
    }

    fn assert_no_taint(it: &Interp, v: &Value, depth: usize) {
        match v {
            Value::Tainted(_) => panic!("taint survived unwrap"),
            Value::Object(r) | Value::Array(r) if depth > 0 => {
                let rec = it.heap.get(*r);
                let children: Vec<Value> = rec
                    .props
                    .values()
                    .cloned()
                    .chain(rec.elements.clone().unwrap_or_default())
                    .collect();
                for c in children {
                    assert_no_taint(it, &c, depth - 1);
                }
            }
            _ => {}
        }
    }

    #[test]
    fn unwrap_deep_replaces_taints_and_is_idempotent() {
        let pkg = PackageSource::single("t", "test/main.mjs", "");
        let registry = Rc::new(HostRegistry::standard());
        let mut it = Interp::new(Rc::new(pkg), registry, 1_000_000);
        let mut state = TaintState::new();
        let mk = |state: &mut TaintState, prop: &str, underlying: Value, tag: TypeTag| {
            let id = state.fresh_id();
            Value::Tainted(new_taint(
                state,
                TaintData {
                    id,
                    underlying,
                    inferred: tag,
                    sources: vec![Rc::new(SourceRecord {
                        property: prop.to_string(),
                        loc: crate::frontend::SourceLocation::synthetic("<test>"),
                        base_has_root_proto: true,
                        mode: InjectionMode::Immediate,
                    })],
                    flow: Vec::new(),
                    pending: false,
                    linked: Vec::new(),
                    typeof_of: None,
                    candidate_applied: false,
                },
            ))
        };
        let inner = it.heap.alloc_object();
        let t_num = mk(&mut state, "n", Value::Undefined, TypeTag::Number);
        it.heap.set_prop(inner, "deep", t_num);
        let arr = it.heap.alloc_array(vec![
            Value::Num(1.0),
            mk(&mut state, "s", Value::Text("v".into()), TypeTag::Text),
        ]);
        let outer = it.heap.alloc_object();
        it.heap.set_prop(outer, "plain", Value::Bool(true));
        it.heap.set_prop(outer, "obj", Value::Object(inner));
        it.heap.set_prop(outer, "arr", Value::Array(arr));
        it.heap
            .set_prop(outer, "top", mk(&mut state, "u", Value::Undefined, TypeTag::Unknown));

        let (plain, found) = unwrap_deep(&mut it, &Value::Object(outer), 4);
        assert_eq!(found.len(), 3);
        assert_no_taint(&it, &plain, 4);
        let paths: Vec<String> = found.iter().map(|f| f.path.join(".")).collect();
        assert!(paths.contains(&"obj.deep".to_string()));
        assert!(paths.contains(&"arr.1".to_string()));
        assert!(paths.contains(&"top".to_string()));
        // independent oracle for the replacement values
        let r = plain.obj_ref().unwrap();
        let (deep_obj, _, _) = it.heap.lookup(r, "obj");
        let (deep, _, _) = it.heap.lookup(deep_obj.obj_ref().unwrap(), "deep");
        assert!(matches!(deep, Value::Num(n) if n == 0.0));
        let (arr_v, _, _) = it.heap.lookup(r, "arr");
        let (el, _, _) = it.heap.lookup(arr_v.obj_ref().unwrap(), "1");
        assert!(matches!(&el, Value::Text(s) if s == "v"));
        let (top, _, _) = it.heap.lookup(r, "top");
        assert!(matches!(&top, Value::Text(s) if s.is_empty()), "Unknown defaults to Text");
        // untouched taint-free values keep identity
        let clean = it.heap.alloc_object();
        it.heap.set_prop(clean, "k", Value::Num(7.0));
        let (same, found2) = unwrap_deep(&mut it, &Value::Object(clean), 4);
        assert!(found2.is_empty());
        assert_eq!(same.obj_ref(), Some(clean));
        // idempotence
        let (again, found3) = unwrap_deep(&mut it, &plain, 4);
        assert!(found3.is_empty());
        assert_eq!(again.obj_ref(), plain.obj_ref());
    }

    #[test]
    fn special_hit_records_pollutable_condition() {
        let (state, out) =
            run_src("std.child_process.spawn('ls', ['-l'], {});\n");
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        let st = state.borrow();
        assert_eq!(st.hits.len(), 1);
        let hit = &st.hits[0];
        assert_eq!(hit.mode, SinkMode::Special);
        assert!(hit.sources.is_empty());
        assert!(hit.arg_path.contains("shell"), "{}", hit.arg_path);
    }

    #[test]
    fn builtin_propagation_keeps_sources() {
        let (state, out) = run_src(
            "let o = {};\nlet joined = ['a', o.part].join('-');\nstd.child_process.exec(joined, null);\n",
        );
        assert_eq!(out.status, RunStatus::Completed, "{:?}", out.error);
        let st = state.borrow();
        assert_eq!(st.hits.len(), 1);
        assert_eq!(st.hits[0].sources[0].property, "part");
        assert!(st.hits[0]
            .flow
            .iter()
            .any(|s| s.kind == FlowKind::BuiltinPropagation));
    }
}
