use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use crate::frontend::ast::*;
use crate::frontend::parse;
use crate::host::{self, HostRegistry};

use super::env::{self, Env};
use super::heap::Heap;
use super::hooks::{CoerceHint, Hooks, LogicalKind, PendingKey, TaintedCallPlan, TestKind};
use super::value::{FunctionValue, Value};
use super::{EffectRecord, EvalResult, Interrupt, PackageSource, RunOutcome, RunStatus};

const MAX_CALL_DEPTH: usize = 256;

/// One interpreter instance: heap, module cache, logs, and budget for a single
/// test-command run. Instances are single-threaded and fully isolated.
pub struct Interp {
    pub heap: Heap,
    pub registry: Rc<HostRegistry>,
    pub package: Rc<PackageSource>,
    pub global_env: Env,
    pub stdout_log: Vec<String>,
    pub effects_log: Vec<EffectRecord>,
    /// Every host call (module, name), including category-None ones.
    pub host_calls: Vec<(String, String)>,
    pub steps: u64,
    pub budget: u64,
    /// Files of the currently executing module/function frames.
    pub file_stack: Vec<String>,
    pub test_files: BTreeSet<String>,
    module_cache: HashMap<String, Value>,
    module_in_progress: HashSet<String>,
    exports_stack: Vec<Value>,
    module_asts: Vec<Rc<AstNode>>,
    call_depth: usize,
}

impl Interp {
    pub fn new(package: Rc<PackageSource>, registry: Rc<HostRegistry>, budget: u64) -> Self {
        let mut it = Interp {
            heap: Heap::new(),
            registry,
            package,
            global_env: env::root_scope(),
            stdout_log: Vec::new(),
            effects_log: Vec::new(),
            host_calls: Vec::new(),
            steps: 0,
            budget,
            file_stack: Vec::new(),
            test_files: BTreeSet::new(),
            module_cache: HashMap::new(),
            module_in_progress: HashSet::new(),
            exports_stack: Vec::new(),
            module_asts: Vec::new(),
            call_depth: 0,
        };
        for file in it.package.files.keys() {
            if file.starts_with("test/") {
                it.test_files.insert(file.clone());
            }
        }
        let std_global = host::build_std_global(&mut it);
        env::declare(&it.global_env, "std", std_global);
        it
    }

    /// Run one test command entry file to completion.
    pub fn run_command(&mut self, entry: &str, hooks: &mut dyn Hooks) -> RunOutcome {
        self.test_files.insert(entry.to_string());
        let result = self.eval_module(entry, hooks);
        let (status, error) = match result {
            Ok(_) => (RunStatus::Completed, None),
            Err(Interrupt::Return(_)) => (RunStatus::Completed, None),
            Err(Interrupt::Error { message, loc }) => {
                (RunStatus::UncaughtError, Some(format!("{loc}: {message}")))
            }
            Err(Interrupt::Budget) => (RunStatus::BudgetExceeded, None),
        };
        RunOutcome {
            status,
            error,
            stdout_log: std::mem::take(&mut self.stdout_log),
            effects_log: std::mem::take(&mut self.effects_log),
            steps_used: self.steps,
        }
    }

    /// Whether every frame of the current call stack lies in a test file.
    pub fn stack_only_in_test_files(&self) -> bool {
        !self.file_stack.is_empty()
            && self
                .file_stack
                .iter()
                .all(|f| self.test_files.contains(f))
    }

    fn err(message: String, loc: &SourceLocation) -> Interrupt {
        Interrupt::Error {
            message,
            loc: loc.clone(),
        }
    }

    // ---- modules ----

    pub fn eval_module(&mut self, path: &str, hooks: &mut dyn Hooks) -> EvalResult {
        if let Some(v) = self.module_cache.get(path) {
            return Ok(v.clone());
        }
        if self.module_in_progress.contains(path) {
            return Ok(Value::Undefined); // require cycle
        }
        let source = match self.package.files.get(path) {
            Some(s) => s.clone(),
            None => {
                return Err(Interrupt::Error {
                    message: format!("module not found: {path}"),
                    loc: SourceLocation::synthetic(path),
                })
            }
        };
        let program = parse(&source, path).map_err(|e| Interrupt::Error {
            message: e.to_string(),
            loc: e.loc().clone(),
        })?;
        let program = Rc::new(program);
        self.module_asts.push(program.clone());
        let body = match &program.kind {
            NodeKind::Program { body } => body,
            _ => unreachable!(),
        };
        let scope = env::child_scope(&self.global_env);
        env::declare(&scope, "this", Value::Undefined);
        self.module_in_progress.insert(path.to_string());
        self.exports_stack.push(Value::Undefined);
        self.file_stack.push(path.to_string());
        let mut result = Ok(());
        for stmt in body {
            match self.eval(stmt, &scope, hooks, None) {
                Ok(_) => {}
                Err(Interrupt::Return(_)) => break,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        self.file_stack.pop();
        self.module_in_progress.remove(path);
        let exports = self.exports_stack.pop().unwrap_or(Value::Undefined);
        result?;
        self.module_cache.insert(path.to_string(), exports.clone());
        Ok(exports)
    }

    /// Resolve a require/load path relative to the importing file, confined to
    /// the package root.
    pub fn resolve_path(&self, rel: &str, loc: &SourceLocation) -> Result<String, Interrupt> {
        let current = self
            .file_stack
            .last()
            .cloned()
            .unwrap_or_default();
        let mut segments: Vec<&str> = Vec::new();
        if rel.starts_with("./") || rel.starts_with("../") {
            if let Some(idx) = current.rfind('/') {
                segments.extend(current[..idx].split('/'));
            }
        }
        for seg in rel.split('/') {
            match seg {
                "" | "." => {}
                ".." => {
                    if segments.pop().is_none() {
                        return Err(Self::err(
                            format!("path escapes package root: {rel}"),
                            loc,
                        ));
                    }
                }
                s => segments.push(s),
            }
        }
        Ok(segments.join("/"))
    }

    // ---- evaluation ----

    pub fn eval(
        &mut self,
        node: &AstNode,
        env: &Env,
        hooks: &mut dyn Hooks,
        ctx: Option<&PendingKey>,
    ) -> EvalResult {
        if self.steps >= self.budget {
            self.steps = self.budget;
            return Err(Interrupt::Budget);
        }
        self.steps += 1;
        match &node.kind {
            NodeKind::Program { .. } => unreachable!("programs evaluate via eval_module"),
            NodeKind::Literal { value } => Ok(match value {
                LiteralValue::Undefined => Value::Undefined,
                LiteralValue::Null => Value::Null,
                LiteralValue::Bool(b) => Value::Bool(*b),
                LiteralValue::Num(n) => Value::Num(*n),
                LiteralValue::Str(s) => Value::Text(s.clone()),
            }),
            NodeKind::Identifier { name } => env::lookup(env, name)
                .ok_or_else(|| Self::err(format!("`{name}` is not defined"), &node.loc)),
            NodeKind::VarDecl { name, init } => {
                let v = match init {
                    Some(e) => self.eval(e, env, hooks, None)?,
                    None => Value::Undefined,
                };
                env::declare(env, name, v);
                Ok(Value::Undefined)
            }
            NodeKind::Assign { name, value } => {
                let v = self.eval(value, env, hooks, None)?;
                if env::assign(env, name, v.clone()) {
                    Ok(v)
                } else {
                    Err(Self::err(
                        format!("assignment to undeclared variable `{name}`"),
                        &node.loc,
                    ))
                }
            }
            NodeKind::FunctionDecl { name, params, body } => {
                let f = Value::Function(Rc::new(FunctionValue {
                    name: Some(name.clone()),
                    params: params.clone(),
                    body: Rc::new(body.clone()),
                    env: env.clone(),
                    file: node.loc.file.clone(),
                }));
                env::declare(env, name, f);
                Ok(Value::Undefined)
            }
            NodeKind::FunctionExpr { params, body } => Ok(Value::Function(Rc::new(
                FunctionValue {
                    name: None,
                    params: params.clone(),
                    body: Rc::new(body.clone()),
                    env: env.clone(),
                    file: node.loc.file.clone(),
                },
            ))),
            NodeKind::ObjectLiteral { props } => {
                let r = self.heap.alloc_object();
                for (k, vnode) in props {
                    let v = self.eval(vnode, env, hooks, None)?;
                    self.heap.set_prop(r, k, v);
                }
                Ok(Value::Object(r))
            }
            NodeKind::ArrayLiteral { elements } => {
                let mut elems = Vec::with_capacity(elements.len());
                for e in elements {
                    elems.push(self.eval(e, env, hooks, None)?);
                }
                Ok(Value::Array(self.heap.alloc_array(elems)))
            }
            NodeKind::MemberRead { base, key } => {
                let base_v = self.eval(base, env, hooks, None)?;
                let key = self.resolve_key(key, env, hooks)?;
                self.member_read(&base_v, &key, node, hooks, ctx)
            }
            NodeKind::MemberWrite { base, key, value } => {
                let base_v = self.eval(base, env, hooks, None)?;
                let key = self.resolve_key(key, env, hooks)?;
                let v = self.eval(value, env, hooks, None)?;
                let v = hooks.on_property_write(self, &base_v, &key, v, node);
                self.member_write(&base_v, &key, v.clone(), node)?;
                Ok(v)
            }
            NodeKind::Call { callee, args } => {
                let callee_v = self.eval(callee, env, hooks, None)?;
                let name = match (&callee.kind, &callee_v) {
                    (NodeKind::Identifier { name }, _) => Some(name.clone()),
                    (_, Value::Function(f)) => f.name.clone(),
                    _ => None,
                };
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(a, env, hooks, None)?);
                }
                self.call_value(callee_v, Value::Undefined, name.as_deref(), argv, node, hooks)
            }
            NodeKind::MethodCall { base, key, args } => {
                let base_v = self.eval(base, env, hooks, None)?;
                let key = self.resolve_key(key, env, hooks)?;
                let mut argv = Vec::with_capacity(args.len());
                for a in args {
                    argv.push(self.eval(a, env, hooks, None)?);
                }
                self.method_call(base_v, &key, argv, node, hooks)
            }
            NodeKind::Binary { op, left, right } => {
                let l = self.eval(left, env, hooks, None)?;
                let r = self.eval(right, env, hooks, None)?;
                let hint = match op {
                    BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => {
                        CoerceHint::Number
                    }
                    _ => CoerceHint::Default,
                };
                let le = self.effective(&l, hint, node, hooks);
                let re = self.effective(&r, hint, node, hooks);
                let raw = self.binary_raw(*op, &le, &re);
                Ok(hooks.on_binary(self, *op, &l, &r, raw, node))
            }
            NodeKind::Unary { op, operand } => {
                let v = self.eval(operand, env, hooks, None)?;
                let hint = match op {
                    UnaryOp::Neg => CoerceHint::Number,
                    UnaryOp::Not => CoerceHint::Boolean,
                    UnaryOp::TypeOf => CoerceHint::Default,
                };
                let eff = self.effective(&v, hint, node, hooks);
                let raw = match op {
                    UnaryOp::Not => Value::Bool(!self.truthy(&eff)),
                    UnaryOp::Neg => Value::Num(-self.to_number(&eff)),
                    UnaryOp::TypeOf => Value::Text(eff.type_name().to_string()),
                };
                Ok(hooks.on_unary(self, *op, &v, raw, node))
            }
            NodeKind::LogicalOr { left, right } => {
                self.eval_logical(LogicalKind::Or, node, left, right, env, hooks, ctx)
            }
            NodeKind::LogicalAnd { left, right } => {
                self.eval_logical(LogicalKind::And, node, left, right, env, hooks, ctx)
            }
            NodeKind::NullishCoalesce { left, right } => {
                self.eval_logical(LogicalKind::Nullish, node, left, right, env, hooks, ctx)
            }
            NodeKind::Ternary {
                test,
                consequent,
                alternate,
            } => {
                let t = self.eval(test, env, hooks, None)?;
                if hooks.on_condition_test(self, &t, test, TestKind::Truthy) {
                    self.eval(consequent, env, hooks, None)
                } else {
                    self.eval(alternate, env, hooks, None)
                }
            }
            NodeKind::If {
                test,
                consequent,
                alternate,
            } => {
                let t = self.eval(test, env, hooks, None)?;
                let branch = if hooks.on_condition_test(self, &t, test, TestKind::Truthy) {
                    Some(consequent)
                } else {
                    alternate.as_ref()
                };
                if let Some(body) = branch {
                    let scope = env::child_scope(env);
                    for stmt in body {
                        self.eval(stmt, &scope, hooks, None)?;
                    }
                }
                Ok(Value::Undefined)
            }
            NodeKind::While { test, body } => {
                loop {
                    let t = self.eval(test, env, hooks, None)?;
                    if !hooks.on_condition_test(self, &t, test, TestKind::Truthy) {
                        break;
                    }
                    let scope = env::child_scope(env);
                    for stmt in body {
                        self.eval(stmt, &scope, hooks, None)?;
                    }
                }
                Ok(Value::Undefined)
            }
            NodeKind::For {
                init,
                test,
                update,
                body,
            } => {
                let scope = env::child_scope(env);
                if let Some(e) = init {
                    self.eval(e, &scope, hooks, None)?;
                }
                loop {
                    if let Some(t) = test {
                        let tv = self.eval(t, &scope, hooks, None)?;
                        if !hooks.on_condition_test(self, &tv, t, TestKind::Truthy) {
                            break;
                        }
                    }
                    let inner = env::child_scope(&scope);
                    for stmt in body {
                        self.eval(stmt, &inner, hooks, None)?;
                    }
                    if let Some(u) = update {
                        self.eval(u, &scope, hooks, None)?;
                    }
                }
                Ok(Value::Undefined)
            }
            NodeKind::Return { value } => {
                let v = match value {
                    Some(e) => self.eval(e, env, hooks, None)?,
                    None => Value::Undefined,
                };
                Err(Interrupt::Return(v))
            }
            NodeKind::RequireExpr { path } => {
                let p = self.eval(path, env, hooks, None)?;
                let p = match self.plain_of(&p) {
                    Value::Text(s) => s,
                    _ => {
                        return Err(Self::err(
                            "require path must be a string".to_string(),
                            &node.loc,
                        ))
                    }
                };
                let resolved = self.resolve_path(&p, &node.loc)?;
                self.eval_module(&resolved, hooks)
            }
            NodeKind::ExportStmt { value } => {
                let v = self.eval(value, env, hooks, None)?;
                if let Some(slot) = self.exports_stack.last_mut() {
                    *slot = v;
                }
                Ok(Value::Undefined)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn eval_logical(
        &mut self,
        kind: LogicalKind,
        node: &AstNode,
        left: &AstNode,
        right: &AstNode,
        env: &Env,
        hooks: &mut dyn Hooks,
        ctx: Option<&PendingKey>,
    ) -> EvalResult {
        hooks.on_logical_start(self, kind, node);
        let key: PendingKey = (node.loc.file.clone(), node.id);
        let left_v = match kind {
            // the left operand of `||`/`??` is conditional-assignment position
            LogicalKind::Or | LogicalKind::Nullish => self.eval(left, env, hooks, Some(&key))?,
            LogicalKind::And => self.eval(left, env, hooks, None)?,
        };
        let test_kind = match kind {
            LogicalKind::Nullish => TestKind::NonNullish,
            _ => TestKind::Truthy,
        };
        let test = hooks.on_condition_test(self, &left_v, node, test_kind);
        let take_right = match kind {
            LogicalKind::Or | LogicalKind::Nullish => !test,
            LogicalKind::And => test,
        };
        let result = if take_right {
            // the fallback operand inherits the *enclosing* conditional
            // context, so chained `a.x || a.y || 'z'` delays both reads
            self.eval(right, env, hooks, ctx)?
        } else {
            left_v.clone()
        };
        Ok(hooks.on_logical_end(self, node, &left_v, result))
    }

    fn resolve_key(
        &mut self,
        key: &MemberKey,
        env: &Env,
        hooks: &mut dyn Hooks,
    ) -> Result<String, Interrupt> {
        match key {
            MemberKey::Static(s) => Ok(s.clone()),
            MemberKey::Computed(e) => {
                let v = self.eval(e, env, hooks, None)?;
                let eff = self.plain_of(&v);
                Ok(self.to_text(&eff))
            }
        }
    }

    fn member_read(
        &mut self,
        base: &Value,
        key: &str,
        node: &AstNode,
        hooks: &mut dyn Hooks,
        ctx: Option<&PendingKey>,
    ) -> EvalResult {
        match base {
            Value::Tainted(t) => {
                let t = t.clone();
                Ok(hooks.on_tainted_property(self, &t, key, node))
            }
            Value::Object(r) | Value::Array(r) => {
                let (raw, found, hits_root) = self.heap.lookup(*r, key);
                Ok(hooks.on_property_read(self, base, key, raw, found, hits_root, node, ctx))
            }
            Value::Text(s) => Ok(if key == "length" {
                Value::Num(s.chars().count() as f64)
            } else {
                Value::Undefined
            }),
            Value::Undefined | Value::Null => Err(Self::err(
                format!("cannot read property `{key}` of {}", self.to_text(base)),
                &node.loc,
            )),
            _ => Ok(Value::Undefined),
        }
    }

    fn member_write(
        &mut self,
        base: &Value,
        key: &str,
        value: Value,
        node: &AstNode,
    ) -> Result<(), Interrupt> {
        match base {
            Value::Object(r) => {
                self.heap.set_prop(*r, key, value);
                Ok(())
            }
            Value::Array(r) => {
                let r = *r;
                if let Ok(idx) = key.parse::<usize>() {
                    let elements = self.heap.get_mut(r).elements.as_mut().unwrap();
                    if idx >= elements.len() {
                        elements.resize(idx + 1, Value::Undefined);
                    }
                    elements[idx] = value;
                } else {
                    self.heap.set_prop(r, key, value);
                }
                Ok(())
            }
            Value::Tainted(t) => {
                let underlying = t.borrow().underlying.clone();
                match underlying {
                    Value::Object(_) | Value::Array(_) => {
                        self.member_write(&underlying, key, value, node)
                    }
                    _ => Ok(()), // writes to non-object taints are dropped
                }
            }
            Value::Undefined | Value::Null => Err(Self::err(
                format!("cannot set property `{key}` of {}", self.to_text(base)),
                &node.loc,
            )),
            _ => Ok(()), // silently ignored, like sloppy-mode primitives
        }
    }

    fn method_call(
        &mut self,
        base: Value,
        key: &str,
        args: Vec<Value>,
        node: &AstNode,
        hooks: &mut dyn Hooks,
    ) -> EvalResult {
        match &base {
            Value::Text(s) => {
                let s = s.clone();
                self.call_string_builtin(&s, &base, key, args, node, hooks)
            }
            Value::Array(r) => {
                let r = *r;
                if is_array_builtin(key) {
                    self.call_array_builtin(r, &base, key, args, node, hooks)
                } else {
                    let v = self.member_read(&base, key, node, hooks, None)?;
                    self.call_value(v, base.clone(), Some(key), args, node, hooks)
                }
            }
            Value::Object(_) => {
                let v = self.member_read(&base, key, node, hooks, None)?;
                self.call_value(v, base.clone(), Some(key), args, node, hooks)
            }
            Value::Tainted(t) => {
                let t = t.clone();
                let plan = hooks.on_tainted_method(self, &t, key, &args, node);
                match plan {
                    // keep the original tainted receiver visible to the
                    // builtin-propagation hook while computing on the plain one
                    TaintedCallPlan::Builtin { receiver } => match &receiver {
                        Value::Text(s) => {
                            let s = s.clone();
                            self.call_string_builtin(&s, &base, key, args, node, hooks)
                        }
                        Value::Array(r) => {
                            let r = *r;
                            self.call_array_builtin(r, &base, key, args, node, hooks)
                        }
                        _ => Ok(Value::Undefined),
                    },
                    other => self.run_call_plan(other, key, args, node, hooks),
                }
            }
            Value::Undefined | Value::Null => Err(Self::err(
                format!("cannot call `{key}` on {}", self.to_text(&base)),
                &node.loc,
            )),
            _ => Err(Self::err(
                format!("`{key}` is not a function"),
                &node.loc,
            )),
        }
    }

    fn run_call_plan(
        &mut self,
        plan: TaintedCallPlan,
        key: &str,
        args: Vec<Value>,
        node: &AstNode,
        hooks: &mut dyn Hooks,
    ) -> EvalResult {
        match plan {
            TaintedCallPlan::Invoke { callee, this } => {
                self.call_value(callee, this, Some(key), args, node, hooks)
            }
            TaintedCallPlan::Builtin { receiver } => match &receiver {
                Value::Text(s) => {
                    let s = s.clone();
                    self.call_string_builtin(&s, &receiver, key, args, node, hooks)
                }
                Value::Array(r) => self.call_array_builtin(*r, &receiver, key, args, node, hooks),
                _ => Ok(Value::Undefined),
            },
            TaintedCallPlan::Result(v) => Ok(v),
        }
    }

    pub fn call_value(
        &mut self,
        callee: Value,
        this: Value,
        name: Option<&str>,
        args: Vec<Value>,
        node: &AstNode,
        hooks: &mut dyn Hooks,
    ) -> EvalResult {
        match callee {
            Value::Function(f) => {
                hooks.on_call_pre(self, name.or(f.name.as_deref()), &args, node);
                let raw = self.call_function(&f, this, args, node, hooks)?;
                Ok(hooks.on_call_post(self, raw, node))
            }
            Value::Host(id) => {
                let prepared = hooks.on_host_call_args(self, id, args, node);
                host::invoke(self, hooks, id, prepared, node)
            }
            Value::Tainted(t) => {
                let plan = hooks.on_tainted_invoke(self, &t, node);
                self.run_call_plan(plan, name.unwrap_or(""), args, node, hooks)
            }
            _ => Err(Self::err(
                format!("`{}` is not a function", name.unwrap_or("<expr>")),
                &node.loc,
            )),
        }
    }

    pub fn call_function(
        &mut self,
        f: &Rc<FunctionValue>,
        this: Value,
        args: Vec<Value>,
        node: &AstNode,
        hooks: &mut dyn Hooks,
    ) -> EvalResult {
        if self.call_depth >= MAX_CALL_DEPTH {
            return Err(Self::err("call stack exceeded".to_string(), &node.loc));
        }
        self.call_depth += 1;
        self.file_stack.push(f.file.clone());
        let scope = env::child_scope(&f.env);
        for (i, p) in f.params.iter().enumerate() {
            env::declare(&scope, p, args.get(i).cloned().unwrap_or(Value::Undefined));
        }
        env::declare(&scope, "this", this);
        let mut result = Ok(Value::Undefined);
        for stmt in f.body.iter() {
            match self.eval(stmt, &scope, hooks, None) {
                Ok(_) => {}
                Err(Interrupt::Return(v)) => {
                    result = Ok(v);
                    break;
                }
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        self.file_stack.pop();
        self.call_depth -= 1;
        result
    }

    // ---- built-in methods ----

    fn call_string_builtin(
        &mut self,
        s: &str,
        receiver: &Value,
        name: &str,
        args: Vec<Value>,
        node: &AstNode,
        hooks: &mut dyn Hooks,
    ) -> EvalResult {
        let eff: Vec<Value> = args
            .iter()
            .map(|a| self.effective(a, CoerceHint::Default, node, hooks))
            .collect();
        let arg_text = |it: &mut Self, i: usize| -> String {
            eff.get(i).map(|v| it.to_text(v)).unwrap_or_default()
        };
        let arg_num = |it: &mut Self, i: usize| -> Option<f64> {
            eff.get(i).map(|v| it.to_number(v))
        };
        let chars: Vec<char> = s.chars().collect();
        let clamp = |n: f64, len: usize| -> usize {
            if n.is_nan() {
                0
            } else if n < 0.0 {
                len.saturating_sub((-n) as usize)
            } else {
                (n as usize).min(len)
            }
        };
        let raw = match name {
            "slice" => {
                let len = chars.len();
                let start = arg_num(self, 0).map(|n| clamp(n, len)).unwrap_or(0);
                let end = arg_num(self, 1).map(|n| clamp(n, len)).unwrap_or(len);
                let out: String = if start < end {
                    chars[start..end].iter().collect()
                } else {
                    String::new()
                };
                Value::Text(out)
            }
            "substring" => {
                let len = chars.len();
                let a = arg_num(self, 0)
                    .map(|n| if n.is_nan() || n < 0.0 { 0 } else { (n as usize).min(len) })
                    .unwrap_or(0);
                let b = arg_num(self, 1)
                    .map(|n| if n.is_nan() || n < 0.0 { 0 } else { (n as usize).min(len) })
                    .unwrap_or(len);
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                Value::Text(chars[lo..hi].iter().collect())
            }
            "replace" => {
                let pat = arg_text(self, 0);
                let rep = arg_text(self, 1);
                Value::Text(if pat.is_empty() {
                    s.to_string()
                } else {
                    s.replacen(&pat, &rep, 1)
                })
            }
            "split" => {
                let sep = arg_text(self, 0);
                let parts: Vec<Value> = if eff.is_empty() {
                    vec![Value::Text(s.to_string())]
                } else if sep.is_empty() {
                    s.chars().map(|c| Value::Text(c.to_string())).collect()
                } else {
                    s.split(&sep).map(|p| Value::Text(p.to_string())).collect()
                };
                Value::Array(self.heap.alloc_array(parts))
            }
            "concat" => {
                let mut out = s.to_string();
                for i in 0..eff.len() {
                    out.push_str(&arg_text(self, i));
                }
                Value::Text(out)
            }
            "toUpperCase" => Value::Text(s.to_uppercase()),
            "toLowerCase" => Value::Text(s.to_lowercase()),
            "trim" => Value::Text(s.trim().to_string()),
            "indexOf" => {
                let needle = arg_text(self, 0);
                match s.find(&needle) {
                    Some(byte_idx) => Value::Num(s[..byte_idx].chars().count() as f64),
                    None => Value::Num(-1.0),
                }
            }
            "includes" => Value::Bool(s.contains(&arg_text(self, 0))),
            "startsWith" => Value::Bool(s.starts_with(&arg_text(self, 0))),
            "endsWith" => Value::Bool(s.ends_with(&arg_text(self, 0))),
            "charAt" => {
                let i = arg_num(self, 0).unwrap_or(0.0);
                let c = if i >= 0.0 {
                    chars.get(i as usize).copied()
                } else {
                    None
                };
                Value::Text(c.map(|c| c.to_string()).unwrap_or_default())
            }
            _ => {
                return Err(Self::err(
                    format!("string has no method `{name}`"),
                    &node.loc,
                ))
            }
        };
        if is_propagating_builtin(name) {
            Ok(hooks.on_builtin(self, name, receiver, &args, raw, node))
        } else {
            Ok(raw)
        }
    }

    fn call_array_builtin(
        &mut self,
        r: usize,
        receiver: &Value,
        name: &str,
        args: Vec<Value>,
        node: &AstNode,
        hooks: &mut dyn Hooks,
    ) -> EvalResult {
        let raw = match name {
            "join" => {
                let sep = match args.first() {
                    Some(v) => {
                        let eff = self.effective(v, CoerceHint::Text, node, hooks);
                        self.to_text(&eff)
                    }
                    None => ",".to_string(),
                };
                let elements = self.heap.get(r).elements.clone().unwrap_or_default();
                let parts: Vec<String> = elements
                    .iter()
                    .map(|e| {
                        if e.is_nullish() {
                            String::new()
                        } else {
                            let eff = self.plain_of(e);
                            self.to_text(&eff)
                        }
                    })
                    .collect();
                Value::Text(parts.join(&sep))
            }
            "concat" => {
                let mut out = self.heap.get(r).elements.clone().unwrap_or_default();
                for a in &args {
                    match self.plain_of(a) {
                        Value::Array(other) => {
                            out.extend(self.heap.get(other).elements.clone().unwrap_or_default())
                        }
                        other => out.push(other),
                    }
                }
                Value::Array(self.heap.alloc_array(out))
            }
            "slice" => {
                let elements = self.heap.get(r).elements.clone().unwrap_or_default();
                let len = elements.len();
                let clamp = |n: f64| -> usize {
                    if n.is_nan() {
                        0
                    } else if n < 0.0 {
                        len.saturating_sub((-n) as usize)
                    } else {
                        (n as usize).min(len)
                    }
                };
                let start = args
                    .first()
                    .map(|v| {
                        let eff = self.effective(v, CoerceHint::Number, node, hooks);
                        clamp(self.to_number(&eff))
                    })
                    .unwrap_or(0);
                let end = args
                    .get(1)
                    .map(|v| {
                        let eff = self.effective(v, CoerceHint::Number, node, hooks);
                        clamp(self.to_number(&eff))
                    })
                    .unwrap_or(len);
                let out = if start < end {
                    elements[start..end].to_vec()
                } else {
                    Vec::new()
                };
                Value::Array(self.heap.alloc_array(out))
            }
            "push" => {
                let elements = self.heap.get_mut(r).elements.as_mut().unwrap();
                for a in args {
                    elements.push(a);
                }
                return Ok(Value::Num(
                    self.heap.get(r).elements.as_ref().unwrap().len() as f64,
                ));
            }
            "pop" => {
                let elements = self.heap.get_mut(r).elements.as_mut().unwrap();
                return Ok(elements.pop().unwrap_or(Value::Undefined));
            }
            "indexOf" => {
                let needle = args.first().cloned().unwrap_or(Value::Undefined);
                let needle = self.plain_of(&needle);
                let elements = self.heap.get(r).elements.clone().unwrap_or_default();
                let mut found = -1.0;
                for (i, e) in elements.iter().enumerate() {
                    if self.strict_eq(&self.plain_of(e), &needle) {
                        found = i as f64;
                        break;
                    }
                }
                return Ok(Value::Num(found));
            }
            "includes" => {
                let needle = args.first().cloned().unwrap_or(Value::Undefined);
                let needle = self.plain_of(&needle);
                let elements = self.heap.get(r).elements.clone().unwrap_or_default();
                let found = elements
                    .iter()
                    .any(|e| self.strict_eq(&self.plain_of(e), &needle));
                return Ok(Value::Bool(found));
            }
            _ => {
                return Err(Self::err(
                    format!("array has no method `{name}`"),
                    &node.loc,
                ))
            }
        };
        if is_propagating_builtin(name) {
            Ok(hooks.on_builtin(self, name, receiver, &args, raw, node))
        } else {
            Ok(raw)
        }
    }

    // ---- coercion helpers (plain semantics) ----

    /// Plain view of a value for raw computations: taints yield their
    /// underlying (or Undefined while pending).
    pub fn plain_of(&self, v: &Value) -> Value {
        match v {
            Value::Tainted(t) => {
                let u = t.borrow().underlying.clone();
                match u {
                    Value::Tainted(_) => Value::Undefined,
                    other => other,
                }
            }
            other => other.clone(),
        }
    }

    /// Plain operand for a raw computation, routing taints through the coerce
    /// hook (where inference rule 4 lives).
    pub fn effective(
        &mut self,
        v: &Value,
        hint: CoerceHint,
        node: &AstNode,
        hooks: &mut dyn Hooks,
    ) -> Value {
        match v {
            Value::Tainted(_) => hooks.on_coerce(self, v, hint, node),
            other => other.clone(),
        }
    }

    pub fn coerce_plain(&mut self, v: &Value, hint: CoerceHint) -> Value {
        let v = self.plain_of(v);
        match hint {
            CoerceHint::Default => v,
            CoerceHint::Text => Value::Text(self.to_text(&v)),
            CoerceHint::Number => Value::Num(self.to_number(&v)),
            CoerceHint::Boolean => Value::Bool(self.truthy(&v)),
        }
    }

    pub fn truthy(&self, v: &Value) -> bool {
        match v {
            Value::Undefined | Value::Null => false,
            Value::Bool(b) => *b,
            Value::Num(n) => *n != 0.0 && !n.is_nan(),
            Value::Text(s) => !s.is_empty(),
            Value::Object(_) | Value::Array(_) | Value::Function(_) | Value::Host(_) => true,
            Value::Tainted(t) => {
                let u = t.borrow().underlying.clone();
                match u {
                    Value::Tainted(_) => false,
                    other => self.truthy(&other),
                }
            }
        }
    }

    pub fn to_text(&self, v: &Value) -> String {
        self.to_text_depth(v, 0)
    }

    fn to_text_depth(&self, v: &Value, depth: usize) -> String {
        if depth > 8 {
            return "...".to_string();
        }
        match v {
            Value::Undefined => "undefined".to_string(),
            Value::Null => "null".to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Num(n) => format_num(*n),
            Value::Text(s) => s.clone(),
            Value::Object(_) => "[object Object]".to_string(),
            Value::Array(r) => {
                let elements = self.heap.get(*r).elements.clone().unwrap_or_default();
                elements
                    .iter()
                    .map(|e| {
                        if e.is_nullish() {
                            String::new()
                        } else {
                            self.to_text_depth(e, depth + 1)
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            }
            Value::Function(f) => {
                format!("function {}", f.name.as_deref().unwrap_or(""))
            }
            Value::Host(_) => "function [host]".to_string(),
            Value::Tainted(t) => {
                let u = t.borrow().underlying.clone();
                match u {
                    Value::Tainted(_) | Value::Undefined => String::new(),
                    other => self.to_text_depth(&other, depth + 1),
                }
            }
        }
    }

    pub fn to_number(&self, v: &Value) -> f64 {
        match v {
            Value::Undefined => f64::NAN,
            Value::Null => 0.0,
            Value::Bool(b) => {
                if *b {
                    1.0
                } else {
                    0.0
                }
            }
            Value::Num(n) => *n,
            Value::Text(s) => {
                let t = s.trim();
                if t.is_empty() {
                    0.0
                } else {
                    t.parse::<f64>().unwrap_or(f64::NAN)
                }
            }
            Value::Array(r) => {
                let elements = self.heap.get(*r).elements.clone().unwrap_or_default();
                match elements.len() {
                    0 => 0.0,
                    1 => self.to_number(&elements[0]),
                    _ => f64::NAN,
                }
            }
            Value::Object(_) | Value::Function(_) | Value::Host(_) => f64::NAN,
            Value::Tainted(t) => {
                let u = t.borrow().underlying.clone();
                match u {
                    Value::Tainted(_) => f64::NAN,
                    other => self.to_number(&other),
                }
            }
        }
    }

    pub fn binary_raw(&self, op: BinaryOp, l: &Value, r: &Value) -> Value {
        match op {
            BinaryOp::Add => {
                let textual = |v: &Value| {
                    matches!(v, Value::Text(_) | Value::Object(_) | Value::Array(_))
                };
                if textual(l) || textual(r) {
                    Value::Text(format!("{}{}", self.to_text(l), self.to_text(r)))
                } else {
                    Value::Num(self.to_number(l) + self.to_number(r))
                }
            }
            BinaryOp::Sub => Value::Num(self.to_number(l) - self.to_number(r)),
            BinaryOp::Mul => Value::Num(self.to_number(l) * self.to_number(r)),
            BinaryOp::Div => Value::Num(self.to_number(l) / self.to_number(r)),
            BinaryOp::Rem => Value::Num(self.to_number(l) % self.to_number(r)),
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
                let b = if let (Value::Text(a), Value::Text(c)) = (l, r) {
                    match op {
                        BinaryOp::Lt => a < c,
                        BinaryOp::Le => a <= c,
                        BinaryOp::Gt => a > c,
                        _ => a >= c,
                    }
                } else {
                    let (a, c) = (self.to_number(l), self.to_number(r));
                    if a.is_nan() || c.is_nan() {
                        false
                    } else {
                        match op {
                            BinaryOp::Lt => a < c,
                            BinaryOp::Le => a <= c,
                            BinaryOp::Gt => a > c,
                            _ => a >= c,
                        }
                    }
                };
                Value::Bool(b)
            }
            BinaryOp::Eq => Value::Bool(self.loose_eq(l, r)),
            BinaryOp::Ne => Value::Bool(!self.loose_eq(l, r)),
            BinaryOp::StrictEq => Value::Bool(self.strict_eq(l, r)),
            BinaryOp::StrictNe => Value::Bool(!self.strict_eq(l, r)),
        }
    }

    pub fn strict_eq(&self, l: &Value, r: &Value) -> bool {
        match (l, r) {
            (Value::Undefined, Value::Undefined) | (Value::Null, Value::Null) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => a == b,
            (Value::Text(a), Value::Text(b)) => a == b,
            (Value::Object(a), Value::Object(b)) | (Value::Array(a), Value::Array(b)) => a == b,
            (Value::Function(a), Value::Function(b)) => Rc::ptr_eq(a, b),
            (Value::Host(a), Value::Host(b)) => a == b,
            _ => false,
        }
    }

    /// Loose equality via a small fixed coercion table: number<->string parse,
    /// boolean -> number, null == undefined.
    pub fn loose_eq(&self, l: &Value, r: &Value) -> bool {
        match (l, r) {
            (Value::Undefined | Value::Null, Value::Undefined | Value::Null) => true,
            (Value::Num(_), Value::Text(_)) | (Value::Text(_), Value::Num(_)) => {
                self.to_number(l) == self.to_number(r)
            }
            (Value::Bool(_), _) => self.loose_eq(&Value::Num(self.to_number(l)), r),
            (_, Value::Bool(_)) => self.loose_eq(l, &Value::Num(self.to_number(r))),
            _ => self.strict_eq(l, r),
        }
    }
}

pub fn format_num(n: f64) -> String {
    if n.is_nan() {
        "NaN".to_string()
    } else if n.is_infinite() {
        if n > 0.0 {
            "Infinity".to_string()
        } else {
            "-Infinity".to_string()
        }
    } else if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

pub fn is_string_builtin(name: &str) -> bool {
    matches!(
        name,
        "slice"
            | "substring"
            | "replace"
            | "split"
            | "concat"
            | "toUpperCase"
            | "toLowerCase"
            | "trim"
            | "indexOf"
            | "includes"
            | "startsWith"
            | "endsWith"
            | "charAt"
    )
}

pub fn is_array_builtin(name: &str) -> bool {
    matches!(
        name,
        "join" | "concat" | "slice" | "push" | "pop" | "indexOf" | "includes"
    )
}

/// Methods in the taint propagation-mock table.
pub fn is_propagating_builtin(name: &str) -> bool {
    matches!(
        name,
        "join" | "concat" | "slice" | "substring" | "replace" | "split"
    )
}
