use std::cell::RefCell;
use std::rc::Rc;

use crate::frontend::ast::AstNode;
use crate::taint::TaintData;

use super::env::Env;

/// Index into the heap's object records.
pub type ObjRef = usize;
/// Index into the host-function registry.
pub type HostFnId = usize;
pub type TaintRef = Rc<RefCell<TaintData>>;

#[derive(Clone)]
pub enum Value {
    Undefined,
    Null,
    Bool(bool),
    Num(f64),
    Text(String),
    Object(ObjRef),
    Array(ObjRef),
    Function(Rc<FunctionValue>),
    Host(HostFnId),
    Tainted(TaintRef),
}

pub struct FunctionValue {
    pub name: Option<String>,
    pub params: Vec<String>,
    pub body: Rc<Vec<AstNode>>,
    pub env: Env,
    /// Package-relative file the function was defined in (for test-file
    /// provenance of sink hits).
    pub file: String,
}

impl Value {
    pub fn obj_ref(&self) -> Option<ObjRef> {
        match self {
            Value::Object(r) | Value::Array(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_nullish(&self) -> bool {
        matches!(self, Value::Undefined | Value::Null)
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Undefined => "undefined",
            Value::Null | Value::Object(_) | Value::Array(_) => "object",
            Value::Bool(_) => "boolean",
            Value::Num(_) => "number",
            Value::Text(_) => "string",
            Value::Function(_) | Value::Host(_) => "function",
            Value::Tainted(t) => {
                // callers normally unwrap first; fall back to the underlying
                match &t.borrow().underlying {
                    Value::Tainted(_) => "undefined",
                    other => other.type_name(),
                }
            }
        }
    }
}

impl std::fmt::Debug for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Undefined => write!(f, "undefined"),
            Value::Null => write!(f, "null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(n) => write!(f, "{n}"),
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Object(r) => write!(f, "Object(#{r})"),
            Value::Array(r) => write!(f, "Array(#{r})"),
            Value::Function(fv) => {
                write!(f, "Function({})", fv.name.as_deref().unwrap_or("<anon>"))
            }
            Value::Host(id) => write!(f, "Host(#{id})"),
            Value::Tainted(t) => {
                let t = t.borrow();
                write!(f, "Tainted(#{} -> {:?})", t.id, t.underlying)
            }
        }
    }
}
