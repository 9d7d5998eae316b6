//! The instrumentation hook set that performs taint injection, propagation,
//! type inference, forced-branch negation, and sink-hit recording.

use std::cell::RefCell;
use std::rc::Rc;

use crate::frontend::ast::{AstNode, BinaryOp, LiteralValue, NodeKind, UnaryOp};
use crate::host::{self, SinkCategory};
use crate::interp::machine::{is_array_builtin, is_string_builtin};
use crate::interp::value::TaintRef;
use crate::interp::{
    CoerceHint, Found, Hooks, HostFnId, Interp, PendingKey, TaintedCallPlan, TestKind, Value,
};

use super::{
    default_value, find_taints, merge_sources, new_taint, sources_to_summaries, tag_of_value,
    unwrap_deep, BranchRecord, CandidateLit, CandidateValue, FlowKind, FlowStep, FoundTaint,
    InjectionMode, RunMode, SinkHit, SinkMode, SourceRecord, TaintData, TaintState, TypeTag,
    IGNORED_SOURCE_KEYS,
};

/// Method names that mark the receiver as Text (inference rule 3).
const TEXT_METHODS: &[&str] = &[
    "substring",
    "replace",
    "split",
    "toUpperCase",
    "toLowerCase",
    "trim",
    "charAt",
    "startsWith",
    "endsWith",
];

pub struct TaintHooks {
    pub state: Rc<RefCell<TaintState>>,
}

impl TaintHooks {
    pub fn new(state: Rc<RefCell<TaintState>>) -> Self {
        TaintHooks { state }
    }

    fn read_step(key: &str, node: &AstNode) -> FlowStep {
        FlowStep {
            kind: FlowKind::Read,
            detail: key.to_string(),
            loc: node.loc.clone(),
        }
    }

    /// Make a child taint for a property access on a tainted base.
    fn child_taint(&mut self, parent: &TaintRef, key: &str, node: &AstNode) -> Value {
        // rule 3: known method names reveal the parent's type
        {
            let mut pd = parent.borrow_mut();
            if pd.inferred == TypeTag::Unknown {
                if TEXT_METHODS.contains(&key) {
                    pd.inferred = TypeTag::Text;
                } else if key == "push" {
                    pd.inferred = TypeTag::Array;
                }
            }
        }
        let pd = parent.borrow();
        let mut flow = pd.flow.clone();
        flow.push(Self::read_step(key, node));
        let data = TaintData {
            id: self.state.borrow_mut().fresh_id(),
            underlying: Value::Undefined,
            inferred: TypeTag::Unknown,
            sources: pd.sources.clone(),
            flow,
            pending: false,
            linked: Vec::new(),
            typeof_of: None,
            candidate_applied: pd.candidate_applied,
        };
        drop(pd);
        Value::Tainted(new_taint(&mut self.state.borrow_mut(), data))
    }

    fn record_candidate(&mut self, taint: &TaintRef, lit: &LiteralValue) {
        let td = taint.borrow();
        if let Some(props) = &td.typeof_of {
            // rule 5: `typeof x == '<name>'` fixes the type; force with the
            // per-type default value
            let tag = match lit {
                LiteralValue::Str(s) => match s.as_str() {
                    "string" => Some(TypeTag::Text),
                    "number" => Some(TypeTag::Number),
                    "boolean" => Some(TypeTag::Boolean),
                    "object" => Some(TypeTag::Object),
                    "function" => Some(TypeTag::Function),
                    _ => None,
                },
                _ => None,
            };
            if let Some(tag) = tag {
                let value = match tag {
                    TypeTag::Number => CandidateLit::Num(0.0),
                    TypeTag::Boolean => CandidateLit::Bool(false),
                    _ => CandidateLit::Text(String::new()),
                };
                let mut st = self.state.borrow_mut();
                for p in props {
                    st.candidates
                        .entry(p.clone())
                        .or_insert_with(|| CandidateValue {
                            value: value.clone(),
                            tag,
                        });
                }
            }
            return;
        }
        // rule 6: a comparison against a literal yields a concrete candidate
        let candidate = match lit {
            LiteralValue::Str(s) => Some(CandidateValue {
                value: CandidateLit::Text(s.clone()),
                tag: TypeTag::Text,
            }),
            LiteralValue::Num(n) => Some(CandidateValue {
                value: CandidateLit::Num(*n),
                tag: TypeTag::Number,
            }),
            LiteralValue::Bool(b) => Some(CandidateValue {
                value: CandidateLit::Bool(*b),
                tag: TypeTag::Boolean,
            }),
            LiteralValue::Null | LiteralValue::Undefined => None,
        };
        if let Some(c) = candidate {
            let mut st = self.state.borrow_mut();
            for s in &td.sources {
                st.candidates.entry(s.property.clone()).or_insert(c.clone());
            }
        }
    }

    fn push_hit(
        &mut self,
        it: &Interp,
        mode: SinkMode,
        sink_module: &str,
        sink_name: &str,
        category: SinkCategory,
        sources: Vec<super::SourceSummary>,
        flow: Vec<FlowStep>,
        arg_path: String,
        node: &AstNode,
    ) {
        let mut st = self.state.borrow_mut();
        let hit = SinkHit {
            mode,
            sink_module: sink_module.to_string(),
            sink_name: sink_name.to_string(),
            sink_loc: node.loc.clone(),
            category,
            sources,
            flow,
            arg_path,
            run_index: st.run_index,
            forced_props: st.forced_props(),
            after_forced_flip: st.flips > 0,
            only_from_test_files: it.stack_only_in_test_files(),
        };
        st.hits.push(hit);
    }

    fn finalize(t: &TaintRef, plain: &Value) {
        let mut td = t.borrow_mut();
        if !td.pending {
            return;
        }
        td.pending = false;
        td.underlying = plain.clone();
        // rule 1: the fallback value fixes a previously unknown type
        if td.inferred == TypeTag::Unknown && !matches!(plain, Value::Undefined) {
            td.inferred = tag_of_value(plain);
        }
        let linked = std::mem::take(&mut td.linked);
        drop(td);
        for l in &linked {
            Self::finalize(l, plain);
        }
    }
}

impl Hooks for TaintHooks {
    fn on_property_read(
        &mut self,
        it: &mut Interp,
        _base: &Value,
        key: &str,
        raw: Value,
        found: Found,
        chain_hits_root: bool,
        node: &AstNode,
        cond_ctx: Option<&PendingKey>,
    ) -> Value {
        match found {
            Found::Own => return raw,
            Found::PrototypeAt(_) => {
                // a non-root prototype defines it: observed but never injected
                if !it.heap.get(it.heap.root).props.contains_key(key) {
                    self.state
                        .borrow_mut()
                        .intermediate_proto_hits
                        .push((key.to_string(), node.loc.clone()));
                }
                return raw;
            }
            Found::NotFound => {}
        }
        if !chain_hits_root || IGNORED_SOURCE_KEYS.contains(&key) {
            return raw;
        }
        let mut st = self.state.borrow_mut();
        let candidate = match &st.mode {
            RunMode::Forced(props) if props.contains(key) => st.candidates.get(key).cloned(),
            _ => None,
        };
        let id = st.fresh_id();
        st.injections += 1;
        let (underlying, inferred, pending, mode, candidate_applied) = match (&candidate, cond_ctx)
        {
            (Some(c), _) => (c.value.to_value(), c.tag, false, InjectionMode::Immediate, true),
            (None, Some(_)) => (
                Value::Undefined,
                TypeTag::Unknown,
                true,
                InjectionMode::DelayedConditional,
                false,
            ),
            (None, None) => (
                Value::Undefined,
                TypeTag::Unknown,
                false,
                InjectionMode::Immediate,
                false,
            ),
        };
        let source = Rc::new(SourceRecord {
            property: key.to_string(),
            loc: node.loc.clone(),
            base_has_root_proto: true,
            mode,
        });
        let data = TaintData {
            id,
            underlying,
            inferred,
            sources: vec![source],
            flow: vec![Self::read_step(key, node)],
            pending,
            linked: Vec::new(),
            typeof_of: None,
            candidate_applied,
        };
        let t = new_taint(&mut st, data);
        if pending {
            if let Some(k) = cond_ctx {
                st.pending.entry(k.clone()).or_default().push(t.clone());
            }
        }
        Value::Tainted(t)
    }

    fn on_binary(
        &mut self,
        _it: &mut Interp,
        op: BinaryOp,
        left: &Value,
        right: &Value,
        raw: Value,
        node: &AstNode,
    ) -> Value {
        let mut operand_taints: Vec<TaintRef> = Vec::new();
        if let Value::Tainted(t) = left {
            operand_taints.push(t.clone());
        }
        if let Value::Tainted(t) = right {
            operand_taints.push(t.clone());
        }
        if operand_taints.is_empty() {
            return raw;
        }
        // rule 2: `+` producing Text marks unknown operands as Text
        if op == BinaryOp::Add && matches!(raw, Value::Text(_)) {
            for t in &operand_taints {
                let mut td = t.borrow_mut();
                if td.inferred == TypeTag::Unknown {
                    td.inferred = TypeTag::Text;
                }
            }
        }
        // rules 5-6: comparisons against syntactic literals yield candidates
        if op.is_equality() {
            if let NodeKind::Binary {
                left: ln,
                right: rn,
                ..
            } = &node.kind
            {
                if let (Value::Tainted(t), NodeKind::Literal { value: lit }) = (left, &rn.kind) {
                    self.record_candidate(t, lit);
                }
                if let (Value::Tainted(t), NodeKind::Literal { value: lit }) = (right, &ln.kind) {
                    self.record_candidate(t, lit);
                }
            }
        }
        let source_lists: Vec<Vec<Rc<SourceRecord>>> = operand_taints
            .iter()
            .map(|t| t.borrow().sources.clone())
            .collect();
        let refs: Vec<&[Rc<SourceRecord>]> = source_lists.iter().map(|l| l.as_slice()).collect();
        let mut flow: Vec<FlowStep> = Vec::new();
        for t in &operand_taints {
            flow.extend(t.borrow().flow.iter().cloned());
        }
        flow.push(FlowStep {
            kind: FlowKind::BinaryOp,
            detail: op.symbol().to_string(),
            loc: node.loc.clone(),
        });
        let candidate_applied = operand_taints.iter().any(|t| t.borrow().candidate_applied);
        let mut st = self.state.borrow_mut();
        let data = TaintData {
            id: st.fresh_id(),
            inferred: tag_of_value(&raw),
            underlying: raw,
            sources: merge_sources(&refs),
            flow,
            pending: false,
            linked: Vec::new(),
            typeof_of: None,
            candidate_applied,
        };
        Value::Tainted(new_taint(&mut st, data))
    }

    fn on_unary(
        &mut self,
        _it: &mut Interp,
        op: UnaryOp,
        operand: &Value,
        raw: Value,
        node: &AstNode,
    ) -> Value {
        let Value::Tainted(t) = operand else {
            return raw;
        };
        let td = t.borrow();
        let mut flow = td.flow.clone();
        flow.push(FlowStep {
            kind: FlowKind::UnaryOp,
            detail: op.symbol().to_string(),
            loc: node.loc.clone(),
        });
        let typeof_of = if op == UnaryOp::TypeOf {
            // rule 5 observation point: remember whose type this describes
            Some(td.sources.iter().map(|s| s.property.clone()).collect())
        } else {
            None
        };
        let sources = td.sources.clone();
        let candidate_applied = td.candidate_applied;
        drop(td);
        let mut st = self.state.borrow_mut();
        let data = TaintData {
            id: st.fresh_id(),
            inferred: tag_of_value(&raw),
            underlying: raw,
            sources,
            flow,
            pending: false,
            linked: Vec::new(),
            typeof_of,
            candidate_applied,
        };
        Value::Tainted(new_taint(&mut st, data))
    }

    fn on_logical_end(
        &mut self,
        it: &mut Interp,
        node: &AstNode,
        left: &Value,
        result: Value,
    ) -> Value {
        let key: PendingKey = (node.loc.file.clone(), node.id);
        let list = self
            .state
            .borrow_mut()
            .pending
            .remove(&key)
            .unwrap_or_default();
        let left_was_pending =
            matches!(left, Value::Tainted(t) if t.borrow().pending);
        if !list.is_empty() {
            let result_pending =
                matches!(&result, Value::Tainted(rt) if rt.borrow().pending);
            if result_pending {
                // the fallback is itself awaiting injection under an enclosing
                // conditional: chain, finalize together later
                if let Value::Tainted(rt) = &result {
                    let mut rb = rt.borrow_mut();
                    for t in &list {
                        if !Rc::ptr_eq(t, rt) {
                            rb.linked.push(t.clone());
                        }
                    }
                }
            } else {
                let plain = it.plain_of(&result);
                for t in &list {
                    Self::finalize(t, &plain);
                }
            }
        }
        if left_was_pending {
            return left.clone();
        }
        result
    }

    fn on_condition_test(
        &mut self,
        it: &mut Interp,
        value: &Value,
        node: &AstNode,
        kind: TestKind,
    ) -> bool {
        let Value::Tainted(t) = value else {
            return match kind {
                TestKind::Truthy => it.truthy(value),
                TestKind::NonNullish => !it.plain_of(value).is_nullish(),
            };
        };
        let natural = {
            let td = t.borrow();
            match kind {
                TestKind::Truthy => it.truthy(&td.underlying),
                TestKind::NonNullish => !td.underlying.is_nullish(),
            }
        };
        if t.borrow().pending {
            // delayed injections never influence control flow and are not
            // recorded as forceable branches
            return natural;
        }
        t.borrow_mut().flow.push(FlowStep {
            kind: FlowKind::ConditionTest,
            detail: match kind {
                TestKind::Truthy => "truthy".to_string(),
                TestKind::NonNullish => "non-nullish".to_string(),
            },
            loc: node.loc.clone(),
        });
        let props = t.borrow().props();
        let candidate_applied = t.borrow().candidate_applied;
        let mut st = self.state.borrow_mut();
        let run_index = st.run_index;
        st.push_record(BranchRecord {
            loc: node.loc.clone(),
            props: props.clone(),
            natural,
            discovered_in_run: run_index,
        });
        if let RunMode::Forced(forced) = &st.mode {
            if props.iter().any(|p| forced.contains(p)) {
                if candidate_applied {
                    // a concrete candidate value was substituted; let the
                    // natural outcome stand
                    return natural;
                }
                st.flips += 1;
                return !natural;
            }
        }
        natural
    }

    fn on_call_pre(
        &mut self,
        it: &mut Interp,
        callee_name: Option<&str>,
        args: &[Value],
        node: &AstNode,
    ) {
        let Some(name) = callee_name else { return };
        let lower = name.to_lowercase();
        if !(lower.contains("exec") || lower.contains("spawn") || lower.contains("fork")) {
            return;
        }
        let mut found: Option<(usize, TaintRef)> = None;
        let mut all: Vec<TaintRef> = Vec::new();
        for (i, a) in args.iter().enumerate() {
            for t in find_taints(it, a, 4) {
                if found.is_none() {
                    found = Some((i, t.clone()));
                }
                all.push(t);
            }
        }
        let Some((arg_index, first)) = found else { return };
        let source_lists: Vec<Vec<Rc<SourceRecord>>> =
            all.iter().map(|t| t.borrow().sources.clone()).collect();
        let refs: Vec<&[Rc<SourceRecord>]> = source_lists.iter().map(|l| l.as_slice()).collect();
        let sources = sources_to_summaries(&merge_sources(&refs));
        let mut flow = first.borrow().flow.clone();
        flow.push(FlowStep {
            kind: FlowKind::SinkArg,
            detail: format!("{name}(arg {arg_index})"),
            loc: node.loc.clone(),
        });
        self.push_hit(
            it,
            SinkMode::NameMatched,
            "user",
            name,
            SinkCategory::Aci,
            sources,
            flow,
            format!("arg[{arg_index}]"),
            node,
        );
    }

    fn on_coerce(
        &mut self,
        it: &mut Interp,
        value: &Value,
        hint: CoerceHint,
        node: &AstNode,
    ) -> Value {
        let Value::Tainted(t) = value else {
            return it.coerce_plain(value, hint);
        };
        let underlying = t.borrow().underlying.clone();
        match underlying {
            Value::Undefined => {}
            Value::Tainted(_) => return Value::Undefined,
            u => return u,
        }
        // rule 4: a coercion of a value-less taint reveals the expected type
        let tag = {
            let mut td = t.borrow_mut();
            let hint_tag = match hint {
                CoerceHint::Text => Some(TypeTag::Text),
                CoerceHint::Number => Some(TypeTag::Number),
                CoerceHint::Boolean => Some(TypeTag::Boolean),
                CoerceHint::Default => None,
            };
            if td.inferred == TypeTag::Unknown {
                if let Some(h) = hint_tag {
                    td.inferred = h;
                }
            }
            td.flow.push(FlowStep {
                kind: FlowKind::Coercion,
                detail: match hint {
                    CoerceHint::Text => "text",
                    CoerceHint::Number => "number",
                    CoerceHint::Boolean => "boolean",
                    CoerceHint::Default => "default",
                }
                .to_string(),
                loc: node.loc.clone(),
            });
            td.inferred
        };
        default_value(it, tag)
    }

    fn on_host_call_args(
        &mut self,
        it: &mut Interp,
        fn_id: HostFnId,
        args: Vec<Value>,
        node: &AstNode,
    ) -> Vec<Value> {
        let registry = it.registry.clone();
        let f = &registry.fns[fn_id];
        let mut plain = Vec::with_capacity(args.len());
        let mut found: Vec<(usize, FoundTaint)> = Vec::new();
        for (i, a) in args.iter().enumerate() {
            let (p, taints) = unwrap_deep(it, a, 4);
            for ft in taints {
                found.push((i, ft));
            }
            plain.push(p);
        }
        if f.category != SinkCategory::None && !found.is_empty() {
            let source_lists: Vec<Vec<Rc<SourceRecord>>> = found
                .iter()
                .map(|(_, ft)| ft.taint.borrow().sources.clone())
                .collect();
            let refs: Vec<&[Rc<SourceRecord>]> =
                source_lists.iter().map(|l| l.as_slice()).collect();
            let sources = sources_to_summaries(&merge_sources(&refs));
            let (first_index, first) = &found[0];
            let mut flow = first.taint.borrow().flow.clone();
            flow.push(FlowStep {
                kind: FlowKind::SinkArg,
                detail: format!("{}.{}", f.module, f.name),
                loc: node.loc.clone(),
            });
            let suffix: String = first.path.iter().map(|p| format!(".{p}")).collect();
            self.push_hit(
                it,
                SinkMode::Standard,
                &f.module,
                &f.name,
                f.category,
                sources,
                flow,
                format!("arg[{first_index}]{suffix}"),
                node,
            );
        }
        if let Some(condition) = host::check_special(it, f, &plain) {
            let flow = vec![FlowStep {
                kind: FlowKind::SinkArg,
                detail: format!("{}.{}", f.module, f.name),
                loc: node.loc.clone(),
            }];
            self.push_hit(
                it,
                SinkMode::Special,
                &f.module,
                &f.name,
                f.category,
                Vec::new(),
                flow,
                condition,
                node,
            );
        }
        plain
    }

    fn on_builtin(
        &mut self,
        it: &mut Interp,
        name: &str,
        receiver: &Value,
        args: &[Value],
        raw: Value,
        node: &AstNode,
    ) -> Value {
        let mut taints = find_taints(it, receiver, 2);
        for a in args {
            taints.extend(find_taints(it, a, 2));
        }
        if taints.is_empty() {
            return raw;
        }
        let source_lists: Vec<Vec<Rc<SourceRecord>>> =
            taints.iter().map(|t| t.borrow().sources.clone()).collect();
        let refs: Vec<&[Rc<SourceRecord>]> = source_lists.iter().map(|l| l.as_slice()).collect();
        let mut flow = taints[0].borrow().flow.clone();
        flow.push(FlowStep {
            kind: FlowKind::BuiltinPropagation,
            detail: name.to_string(),
            loc: node.loc.clone(),
        });
        let candidate_applied = taints.iter().any(|t| t.borrow().candidate_applied);
        let mut st = self.state.borrow_mut();
        let data = TaintData {
            id: st.fresh_id(),
            inferred: tag_of_value(&raw),
            underlying: raw,
            sources: merge_sources(&refs),
            flow,
            pending: false,
            linked: Vec::new(),
            typeof_of: None,
            candidate_applied,
        };
        Value::Tainted(new_taint(&mut st, data))
    }

    fn on_tainted_property(
        &mut self,
        it: &mut Interp,
        taint: &TaintRef,
        key: &str,
        node: &AstNode,
    ) -> Value {
        let underlying = taint.borrow().underlying.clone();
        if let Some(r) = underlying.obj_ref() {
            let (v, found, _) = it.heap.lookup(r, key);
            if !matches!(found, Found::NotFound) {
                return v;
            }
        }
        if let Value::Text(s) = &underlying {
            if key == "length" {
                return Value::Num(s.chars().count() as f64);
            }
        }
        self.child_taint(taint, key, node)
    }

    fn on_tainted_method(
        &mut self,
        it: &mut Interp,
        taint: &TaintRef,
        key: &str,
        _args: &[Value],
        node: &AstNode,
    ) -> TaintedCallPlan {
        let underlying = taint.borrow().underlying.clone();
        match &underlying {
            Value::Object(r) => {
                let (v, found, _) = it.heap.lookup(*r, key);
                if !matches!(found, Found::NotFound)
                    && matches!(v, Value::Function(_) | Value::Host(_))
                {
                    return TaintedCallPlan::Invoke {
                        callee: v,
                        this: underlying.clone(),
                    };
                }
            }
            Value::Text(_) if is_string_builtin(key) => {
                return TaintedCallPlan::Builtin {
                    receiver: underlying.clone(),
                };
            }
            Value::Array(_) if is_array_builtin(key) => {
                return TaintedCallPlan::Builtin {
                    receiver: underlying.clone(),
                };
            }
            _ => {}
        }
        TaintedCallPlan::Result(self.child_taint(taint, key, node))
    }

    fn on_tainted_invoke(
        &mut self,
        _it: &mut Interp,
        taint: &TaintRef,
        node: &AstNode,
    ) -> TaintedCallPlan {
        let underlying = taint.borrow().underlying.clone();
        if matches!(underlying, Value::Function(_) | Value::Host(_)) {
            return TaintedCallPlan::Invoke {
                callee: underlying,
                this: Value::Undefined,
            };
        }
        TaintedCallPlan::Result(self.child_taint(taint, "()", node))
    }
}
