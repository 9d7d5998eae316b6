//! Simulated standard library ("host API"): sink registry, effect logging,
//! and deterministic stand-in semantics for process/code/file/network APIs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::AstNode;
use crate::frontend::parse;
use crate::interp::env;
use crate::interp::value::{FunctionValue, HostFnId, ObjRef, Value};
use crate::interp::{EffectRecord, EvalResult, Hooks, Interp, Interrupt};

/// Sink taxonomy used for grouping and prioritization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SinkCategory {
    #[serde(rename = "ACE")]
    Ace,
    #[serde(rename = "ACI")]
    Aci,
    #[serde(rename = "LFI")]
    Lfi,
    FileWrite,
    FileRead,
    Network,
    None,
}

impl SinkCategory {
    /// Lower rank = higher priority (ACE > ACI > LFI > FileWrite > FileRead >
    /// Network > None).
    pub fn priority_rank(self) -> u8 {
        match self {
            SinkCategory::Ace => 0,
            SinkCategory::Aci => 1,
            SinkCategory::Lfi => 2,
            SinkCategory::FileWrite => 3,
            SinkCategory::FileRead => 4,
            SinkCategory::Network => 5,
            SinkCategory::None => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SinkCategory::Ace => "ACE",
            SinkCategory::Aci => "ACI",
            SinkCategory::Lfi => "LFI",
            SinkCategory::FileWrite => "FileWrite",
            SinkCategory::FileRead => "FileRead",
            SinkCategory::Network => "Network",
            SinkCategory::None => "None",
        }
    }

    pub fn all() -> [SinkCategory; 7] {
        [
            SinkCategory::Ace,
            SinkCategory::Aci,
            SinkCategory::Lfi,
            SinkCategory::FileWrite,
            SinkCategory::FileRead,
            SinkCategory::Network,
            SinkCategory::None,
        ]
    }
}

impl std::fmt::Display for SinkCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Universal-gadget trigger condition: which argument's properties must be
/// pollutable for a Special hit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecialCondition {
    #[serde(rename = "argIndex")]
    pub arg_index: usize,
    /// Each group is a conjunction; any satisfied group triggers.
    pub groups: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpecialEntry {
    module: String,
    name: String,
    #[serde(rename = "argIndex")]
    arg_index: usize,
    groups: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct HostFunction {
    pub module: String,
    pub name: String,
    pub category: SinkCategory,
    pub special: Option<SpecialCondition>,
}

pub struct HostRegistry {
    pub fns: Vec<HostFunction>,
}

pub const DEFAULT_SPECIAL_TABLE: &str = include_str!("../../data/special_sinks.json");

impl HostRegistry {
    /// Registry with the built-in special-sink table.
    pub fn standard() -> Self {
        Self::with_special_table(DEFAULT_SPECIAL_TABLE).expect("built-in special table is valid")
    }

    /// Registry with a user-provided special-sink table (JSON array of
    /// {module, name, argIndex, groups}).
    pub fn with_special_table(table_json: &str) -> Result<Self, String> {
        let entries: Vec<SpecialEntry> =
            serde_json::from_str(table_json).map_err(|e| format!("special table: {e}"))?;
        let special = |module: &str, name: &str| -> Option<SpecialCondition> {
            entries
                .iter()
                .find(|e| e.module == module && e.name == name)
                .map(|e| SpecialCondition {
                    arg_index: e.arg_index,
                    groups: e.groups.clone(),
                })
        };
        use SinkCategory::*;
        let table: &[(&str, &str, SinkCategory)] = &[
            ("console", "log", None),
            ("child_process", "exec", Aci),
            ("child_process", "execSync", Aci),
            ("child_process", "spawn", Aci),
            ("child_process", "spawnSync", Aci),
            ("child_process", "fork", Aci),
            ("vm", "evalCode", Ace),
            ("vm", "makeFunction", Ace),
            ("module", "load", Lfi),
            ("fs", "readFile", FileRead),
            ("fs", "writeFile", FileWrite),
            ("net", "request", Network),
            ("json", "parse", None),
            ("json", "stringify", None),
            ("obj", "bare", None),
            ("obj", "keys", None),
            ("test", "assert", None),
        ];
        let fns = table
            .iter()
            .map(|(m, n, c)| HostFunction {
                module: m.to_string(),
                name: n.to_string(),
                category: *c,
                special: special(m, n),
            })
            .collect();
        Ok(HostRegistry { fns })
    }
}

/// Build the `std` global: one bare namespace object per host module. The
/// namespaces deliberately have no prototype so missing-name lookups on them
/// never become taint sources.
pub fn build_std_global(it: &mut Interp) -> Value {
    let reg = it.registry.clone();
    let mut namespaces: BTreeMap<String, ObjRef> = BTreeMap::new();
    for (id, f) in reg.fns.iter().enumerate() {
        let ns = *namespaces
            .entry(f.module.clone())
            .or_insert_with(|| it.heap.alloc_bare());
        it.heap.set_prop(ns, &f.name, Value::Host(id));
    }
    let std_ref = it.heap.alloc_bare();
    for (module, ns) in namespaces {
        it.heap.set_prop(std_ref, &module, Value::Object(ns));
    }
    Value::Object(std_ref)
}

/// True iff `v` contains a taint wrapper anywhere within `depth` levels.
pub fn contains_taint(it: &Interp, v: &Value, depth: usize) -> bool {
    match v {
        Value::Tainted(_) => true,
        Value::Object(r) | Value::Array(r) if depth > 0 => {
            let rec = it.heap.get(*r);
            let in_props = rec
                .props
                .values()
                .cloned()
                .collect::<Vec<_>>()
                .iter()
                .any(|p| contains_taint(it, p, depth - 1));
            let in_elems = rec
                .elements
                .clone()
                .unwrap_or_default()
                .iter()
                .any(|e| contains_taint(it, e, depth - 1));
            in_props || in_elems
        }
        _ => false,
    }
}

/// Pollutability check for special sinks: returns the satisfied group's
/// description, if any.
pub fn check_special(it: &Interp, f: &HostFunction, plain_args: &[Value]) -> Option<String> {
    let sc = f.special.as_ref()?;
    let arg = plain_args.get(sc.arg_index)?;
    let r = match arg {
        Value::Object(r) => *r,
        _ => return None,
    };
    for group in &sc.groups {
        if group.iter().all(|p| it.heap.is_pollutable(r, p)) {
            return Some(format!(
                "arg {}: properties {} pollutable",
                sc.arg_index,
                group.join(" & ")
            ));
        }
    }
    None
}

fn effect(it: &mut Interp, module: &str, name: &str, detail: String, category: SinkCategory) {
    it.effects_log.push(EffectRecord {
        module: module.to_string(),
        name: name.to_string(),
        detail,
        category,
    });
}

/// Invalid argument shapes are logged and yield Undefined instead of aborting
/// the test command.
fn host_error(it: &mut Interp, f: &HostFunction, msg: &str) -> Value {
    let detail = format!("{}.{}: {msg}", f.module, f.name);
    effect(it, "host", "error", detail, SinkCategory::None);
    Value::Undefined
}

fn arg(args: &[Value], i: usize) -> Value {
    args.get(i).cloned().unwrap_or(Value::Undefined)
}

/// Suffix describing pollutable-key lookups on an options argument, walking
/// the full prototype chain (this is how universal-gadget triggers surface in
/// the effects log under verify-mode pollution).
fn options_suffix(it: &Interp, options: Option<&Value>) -> String {
    let Some(Value::Object(r)) = options else {
        return String::new();
    };
    let mut out = String::new();
    for key in ["shell", "env", "NODE_OPTIONS"] {
        let (v, found, _) = it.heap.lookup(*r, key);
        if !matches!(found, crate::interp::Found::NotFound) && !matches!(v, Value::Undefined) {
            out.push_str(&format!(" {key}={}", it.to_text(&v)));
        }
    }
    out
}

fn spawn_result(it: &mut Interp) -> Value {
    let pid = 1000.0 + it.effects_log.len() as f64;
    let r = it.heap.alloc_object();
    it.heap.set_prop(r, "pid", Value::Num(pid));
    it.heap.set_prop(r, "status", Value::Num(0.0));
    it.heap.set_prop(r, "stdout", Value::Text(String::new()));
    Value::Object(r)
}

fn preview(text: &str) -> String {
    if text.chars().count() > 80 {
        let cut: String = text.chars().take(77).collect();
        format!("{cut}...")
    } else {
        text.to_string()
    }
}

/// Execute a host function's simulated semantics on plain (unwrapped) values.
pub fn invoke(
    it: &mut Interp,
    hooks: &mut dyn Hooks,
    id: HostFnId,
    args: Vec<Value>,
    node: &AstNode,
) -> EvalResult {
    let f = it.registry.fns[id].clone();
    it.host_calls.push((f.module.clone(), f.name.clone()));
    // host purity: simulated semantics never observe a taint wrapper
    if args.iter().any(|a| contains_taint(it, a, 4)) {
        debug_assert!(false, "tainted argument reached host semantics");
        return Ok(host_error(it, &f, "tainted argument reached host semantics"));
    }
    match (f.module.as_str(), f.name.as_str()) {
        ("console", "log") => {
            let line = args
                .iter()
                .map(|a| it.to_text(a))
                .collect::<Vec<_>>()
                .join(" ");
            it.stdout_log.push(line.clone());
            effect(it, "console", "log", line, SinkCategory::None);
            Ok(Value::Undefined)
        }
        ("child_process", "exec" | "execSync") => {
            let cmd = it.to_text(&arg(&args, 0));
            let detail = format!("{cmd}{}", options_suffix(it, args.get(1)));
            effect(it, "child_process", &f.name, detail, SinkCategory::Aci);
            Ok(spawn_result(it))
        }
        ("child_process", "spawn" | "spawnSync" | "fork") => {
            let cmd = it.to_text(&arg(&args, 0));
            let arg_list = match arg(&args, 1) {
                Value::Array(r) => {
                    let elements = it.heap.get(r).elements.clone().unwrap_or_default();
                    elements
                        .iter()
                        .map(|e| it.to_text(e))
                        .collect::<Vec<_>>()
                        .join(" ")
                }
                Value::Undefined => String::new(),
                other => it.to_text(&other),
            };
            let mut detail = cmd;
            if !arg_list.is_empty() {
                detail.push(' ');
                detail.push_str(&arg_list);
            }
            detail.push_str(&options_suffix(it, args.get(2)));
            effect(it, "child_process", &f.name, detail, SinkCategory::Aci);
            Ok(spawn_result(it))
        }
        ("vm", "evalCode") => {
            let code = it.to_text(&arg(&args, 0));
            effect(it, "vm", "evalCode", preview(&code), SinkCategory::Ace);
            let program = match parse(&code, "<eval>") {
                Ok(p) => p,
                Err(e) => return Ok(host_error(it, &f, &format!("parse error: {e}"))),
            };
            let body = match &program.kind {
                crate::frontend::ast::NodeKind::Program { body } => body.clone(),
                _ => unreachable!(),
            };
            let scope = env::child_scope(&it.global_env);
            env::declare(&scope, "this", Value::Undefined);
            it.file_stack.push("<eval>".to_string());
            let mut result = Ok(Value::Undefined);
            for stmt in &body {
                match it.eval(stmt, &scope, hooks, None) {
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
            it.file_stack.pop();
            result
        }
        ("vm", "makeFunction") => {
            let (params_text, body_text) = if args.len() >= 2 {
                (it.to_text(&arg(&args, 0)), it.to_text(&arg(&args, 1)))
            } else {
                (String::new(), it.to_text(&arg(&args, 0)))
            };
            effect(it, "vm", "makeFunction", preview(&body_text), SinkCategory::Ace);
            let program = match parse(&body_text, "<fn>") {
                Ok(p) => p,
                Err(e) => return Ok(host_error(it, &f, &format!("parse error: {e}"))),
            };
            let body = match program.kind {
                crate::frontend::ast::NodeKind::Program { body } => body,
                _ => unreachable!(),
            };
            let params: Vec<String> = params_text
                .split(',')
                .map(|p| p.trim().to_string())
                .filter(|p| !p.is_empty())
                .collect();
            let scope = env::child_scope(&it.global_env);
            Ok(Value::Function(std::rc::Rc::new(FunctionValue {
                name: Some("<made>".to_string()),
                params,
                body: std::rc::Rc::new(body),
                env: scope,
                file: "<fn>".to_string(),
            })))
        }
        ("module", "load") => {
            let path = it.to_text(&arg(&args, 0));
            let resolved = it.resolve_path(&path, &node.loc)?;
            effect(it, "module", "load", resolved.clone(), SinkCategory::Lfi);
            it.eval_module(&resolved, hooks)
        }
        ("fs", "readFile") => {
            let path = it.to_text(&arg(&args, 0));
            effect(it, "fs", "readFile", path.clone(), SinkCategory::FileRead);
            Ok(Value::Text(format!("<contents of {path}>")))
        }
        ("fs", "writeFile") => {
            let path = it.to_text(&arg(&args, 0));
            let data = it.to_text(&arg(&args, 1));
            effect(
                it,
                "fs",
                "writeFile",
                format!("{path} <- {data}"),
                SinkCategory::FileWrite,
            );
            Ok(Value::Undefined)
        }
        ("net", "request") => {
            let url = it.to_text(&arg(&args, 0));
            effect(it, "net", "request", url, SinkCategory::Network);
            Ok(Value::Text(String::new()))
        }
        ("json", "stringify") => {
            let j = to_json(it, &arg(&args, 0), 16);
            Ok(Value::Text(
                serde_json::to_string(&j).unwrap_or_else(|_| "null".to_string()),
            ))
        }
        ("json", "parse") => {
            let text = it.to_text(&arg(&args, 0));
            match serde_json::from_str::<serde_json::Value>(&text) {
                Ok(j) => Ok(from_json(it, &j)),
                Err(e) => Ok(host_error(it, &f, &format!("invalid JSON: {e}"))),
            }
        }
        ("obj", "bare") => Ok(Value::Object(it.heap.alloc_bare())),
        ("obj", "keys") => {
            let keys: Vec<Value> = match arg(&args, 0) {
                Value::Object(r) | Value::Array(r) => it
                    .heap
                    .get(r)
                    .props
                    .keys()
                    .map(|k| Value::Text(k.clone()))
                    .collect(),
                _ => Vec::new(),
            };
            Ok(Value::Array(it.heap.alloc_array(keys)))
        }
        ("test", "assert") => {
            let ok = it.truthy(&arg(&args, 0));
            let detail = if ok {
                "ok".to_string()
            } else {
                let msg = match args.get(1) {
                    Some(m) => it.to_text(m),
                    None => "assertion failed".to_string(),
                };
                format!("failed: {msg}")
            };
            effect(it, "test", "assert", detail, SinkCategory::None);
            Ok(Value::Undefined)
        }
        _ => Ok(host_error(it, &f, "unknown host function")),
    }
}

fn to_json(it: &Interp, v: &Value, depth: usize) -> serde_json::Value {
    use serde_json::Value as J;
    if depth == 0 {
        return J::Null;
    }
    match v {
        Value::Undefined | Value::Null | Value::Function(_) | Value::Host(_) => J::Null,
        Value::Bool(b) => J::Bool(*b),
        Value::Num(n) => {
            // integral numbers serialize without a fractional part
            if n.fract() == 0.0 && n.abs() < 9e15 {
                J::Number(serde_json::Number::from(*n as i64))
            } else {
                serde_json::Number::from_f64(*n).map(J::Number).unwrap_or(J::Null)
            }
        }
        Value::Text(s) => J::String(s.clone()),
        Value::Array(r) => {
            let elements = it.heap.get(*r).elements.clone().unwrap_or_default();
            J::Array(elements.iter().map(|e| to_json(it, e, depth - 1)).collect())
        }
        Value::Object(r) => {
            let props = it.heap.get(*r).props.clone();
            let mut map = serde_json::Map::new();
            for (k, pv) in props.iter() {
                map.insert(k.clone(), to_json(it, pv, depth - 1));
            }
            J::Object(map)
        }
        Value::Tainted(_) => J::Null, // unreachable: hosts run on unwrapped values
    }
}

fn from_json(it: &mut Interp, j: &serde_json::Value) -> Value {
    use serde_json::Value as J;
    match j {
        J::Null => Value::Null,
        J::Bool(b) => Value::Bool(*b),
        J::Number(n) => Value::Num(n.as_f64().unwrap_or(f64::NAN)),
        J::String(s) => Value::Text(s.clone()),
        J::Array(items) => {
            let elements: Vec<Value> = items.iter().map(|i| from_json(it, i)).collect();
            Value::Array(it.heap.alloc_array(elements))
        }
        J::Object(map) => {
            let r = it.heap.alloc_object();
            for (k, v) in map {
                let mv = from_json(it, v);
                it.heap.set_prop(r, k, mv);
            }
            Value::Object(r)
        }
    }
}
