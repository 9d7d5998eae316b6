use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::value::Value;

pub type Env = Rc<RefCell<Scope>>;

#[derive(Debug)]
pub struct Scope {
    vars: HashMap<String, Value>,
    parent: Option<Env>,
}

pub fn root_scope() -> Env {
    Rc::new(RefCell::new(Scope {
        vars: HashMap::new(),
        parent: None,
    }))
}

pub fn child_scope(parent: &Env) -> Env {
    Rc::new(RefCell::new(Scope {
        vars: HashMap::new(),
        parent: Some(parent.clone()),
    }))
}

pub fn declare(env: &Env, name: &str, value: Value) {
    env.borrow_mut().vars.insert(name.to_string(), value);
}

pub fn lookup(env: &Env, name: &str) -> Option<Value> {
    let scope = env.borrow();
    if let Some(v) = scope.vars.get(name) {
        return Some(v.clone());
    }
    match &scope.parent {
        Some(p) => lookup(p, name),
        None => None,
    }
}

/// Assign to an existing binding; returns false if no scope declares `name`.
pub fn assign(env: &Env, name: &str, value: Value) -> bool {
    let mut scope = env.borrow_mut();
    if scope.vars.contains_key(name) {
        scope.vars.insert(name.to_string(), value);
        return true;
    }
    let parent = scope.parent.clone();
    drop(scope);
    match parent {
        Some(p) => assign(&p, name, value),
        None => false,
    }
}
