//! Tree-walking MiniJS evaluator with an instrumentation-hook contract.

pub mod env;
pub mod heap;
pub mod hooks;
pub mod machine;
pub mod value;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::frontend::SourceLocation;
use crate::host::SinkCategory;

pub use heap::{Found, Heap};
pub use hooks::{CoerceHint, Hooks, LogicalKind, NoopHooks, PendingKey, TaintedCallPlan, TestKind};
pub use machine::Interp;
pub use value::{FunctionValue, HostFnId, ObjRef, TaintRef, Value};

/// In-memory package: name plus package-relative file paths and sources.
#[derive(Debug, Clone, Default)]
pub struct PackageSource {
    pub name: String,
    pub files: BTreeMap<String, String>,
}

impl PackageSource {
    pub fn single(name: &str, file: &str, source: &str) -> Self {
        let mut files = BTreeMap::new();
        files.insert(file.to_string(), source.to_string());
        PackageSource {
            name: name.to_string(),
            files,
        }
    }
}

/// Non-local control flow and failures inside evaluation.
#[derive(Debug, Clone)]
pub enum Interrupt {
    Return(Value),
    Error { message: String, loc: SourceLocation },
    Budget,
}

pub type EvalResult = Result<Value, Interrupt>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    UncaughtError,
    BudgetExceeded,
}

/// One simulated host-API side effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRecord {
    pub module: String,
    pub name: String,
    pub detail: String,
    pub category: SinkCategory,
}

/// Observable outcome of running one test command.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub error: Option<String>,
    pub stdout_log: Vec<String>,
    pub effects_log: Vec<EffectRecord>,
    pub steps_used: u64,
}

impl PartialEq for RunOutcome {
    /// Outcomes are compared by their observable behavior; step counts are
    /// bookkeeping and excluded.
    fn eq(&self, other: &Self) -> bool {
        self.status == other.status
            && self.error == other.error
            && self.stdout_log == other.stdout_log
            && self.effects_log == other.effects_log
    }
}
