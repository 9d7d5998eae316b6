use crate::frontend::ast::{AstNode, BinaryOp, UnaryOp};

use super::heap::Found;
use super::machine::Interp;
use super::value::{HostFnId, TaintRef, Value};

/// Identifies the `||`/`??` expression whose completion finalizes a delayed
/// taint injection: (file, node id).
pub type PendingKey = (String, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoerceHint {
    Default,
    Text,
    Number,
    Boolean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Truthy,
    NonNullish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicalKind {
    Or,
    And,
    Nullish,
}

/// What the interpreter should do with a call whose receiver or callee is a
/// taint wrapper; produced by the taint hooks, executed by the machine.
pub enum TaintedCallPlan {
    /// Call a real function found through the underlying value.
    Invoke { callee: Value, this: Value },
    /// Run a built-in method on the (plain) receiver.
    Builtin { receiver: Value },
    /// The trap produced the result directly (e.g. a child taint).
    Result(Value),
}

/// Instrumentation contract: every hook observes the evaluated inputs and the
/// raw result of an operation and may replace the result. The defaults make
/// the interpreter a plain evaluator. Hooks must not re-evaluate AST children.
#[allow(unused_variables)]
pub trait Hooks {
    fn on_property_read(
        &mut self,
        it: &mut Interp,
        base: &Value,
        key: &str,
        raw: Value,
        found: Found,
        chain_hits_root: bool,
        node: &AstNode,
        cond_ctx: Option<&PendingKey>,
    ) -> Value {
        raw
    }

    fn on_property_write(
        &mut self,
        it: &mut Interp,
        base: &Value,
        key: &str,
        value: Value,
        node: &AstNode,
    ) -> Value {
        value
    }

    fn on_binary(
        &mut self,
        it: &mut Interp,
        op: BinaryOp,
        left: &Value,
        right: &Value,
        raw: Value,
        node: &AstNode,
    ) -> Value {
        raw
    }

    fn on_unary(
        &mut self,
        it: &mut Interp,
        op: UnaryOp,
        operand: &Value,
        raw: Value,
        node: &AstNode,
    ) -> Value {
        raw
    }

    fn on_logical_start(&mut self, it: &mut Interp, kind: LogicalKind, node: &AstNode) {}

    /// Called when a short-circuit expression finishes; `result` is the raw
    /// value of the whole expression. The return value replaces it (this is
    /// where delayed taint injection resolves).
    fn on_logical_end(
        &mut self,
        it: &mut Interp,
        node: &AstNode,
        left: &Value,
        result: Value,
    ) -> Value {
        result
    }

    fn on_condition_test(
        &mut self,
        it: &mut Interp,
        value: &Value,
        node: &AstNode,
        kind: TestKind,
    ) -> bool {
        match kind {
            TestKind::Truthy => it.truthy(value),
            TestKind::NonNullish => !it.plain_of(value).is_nullish(),
        }
    }

    /// Observes every user-function call before it runs (name-matched sink
    /// detection lives here).
    fn on_call_pre(
        &mut self,
        it: &mut Interp,
        callee_name: Option<&str>,
        args: &[Value],
        node: &AstNode,
    ) {
    }

    fn on_call_post(&mut self, it: &mut Interp, raw: Value, node: &AstNode) -> Value {
        raw
    }

    fn on_coerce(&mut self, it: &mut Interp, value: &Value, hint: CoerceHint, node: &AstNode) -> Value {
        it.coerce_plain(value, hint)
    }

    /// Prepare arguments for a host call (taint hooks unwrap deeply and record
    /// standard/special sink hits here). The returned arguments are what the
    /// host semantics run on.
    fn on_host_call_args(
        &mut self,
        it: &mut Interp,
        fn_id: HostFnId,
        args: Vec<Value>,
        node: &AstNode,
    ) -> Vec<Value> {
        args
    }

    /// Result propagation for built-in methods in the propagation-mock table
    /// (join, concat, slice, substring, replace, split).
    fn on_builtin(
        &mut self,
        it: &mut Interp,
        name: &str,
        receiver: &Value,
        args: &[Value],
        raw: Value,
        node: &AstNode,
    ) -> Value {
        raw
    }

    /// Property read with a tainted base (the wrapper's get trap).
    fn on_tainted_property(
        &mut self,
        it: &mut Interp,
        taint: &TaintRef,
        key: &str,
        node: &AstNode,
    ) -> Value {
        Value::Undefined
    }

    /// Method call with a tainted base.
    fn on_tainted_method(
        &mut self,
        it: &mut Interp,
        taint: &TaintRef,
        key: &str,
        args: &[Value],
        node: &AstNode,
    ) -> TaintedCallPlan {
        TaintedCallPlan::Result(Value::Undefined)
    }

    /// Call with a tainted callee (the wrapper's apply trap).
    fn on_tainted_invoke(
        &mut self,
        it: &mut Interp,
        taint: &TaintRef,
        node: &AstNode,
    ) -> TaintedCallPlan {
        TaintedCallPlan::Result(Value::Undefined)
    }
}

/// The no-op hook set: plain evaluation.
pub struct NoopHooks;

impl Hooks for NoopHooks {}
