use indexmap::IndexMap;

use super::value::{ObjRef, Value};

/// Where a property lookup found its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Found {
    Own,
    /// 1-based depth on the prototype chain.
    PrototypeAt(usize),
    NotFound,
}

#[derive(Debug)]
pub struct ObjectRecord {
    pub props: IndexMap<String, Value>,
    pub proto: Option<ObjRef>,
    /// Present for arrays.
    pub elements: Option<Vec<Value>>,
}

/// Arena of object records. Record 0 is the per-run shared root prototype.
pub struct Heap {
    records: Vec<ObjectRecord>,
    pub root: ObjRef,
}

impl Default for Heap {
    fn default() -> Self {
        Self::new()
    }
}

impl Heap {
    pub fn new() -> Self {
        let mut heap = Heap {
            records: Vec::new(),
            root: 0,
        };
        // the shared root prototype has no prototype of its own
        heap.records.push(ObjectRecord {
            props: IndexMap::new(),
            proto: None,
            elements: None,
        });
        heap
    }

    fn push(&mut self, rec: ObjectRecord) -> ObjRef {
        self.records.push(rec);
        self.records.len() - 1
    }

    /// Ordinary object literal: linked to the shared root prototype.
    pub fn alloc_object(&mut self) -> ObjRef {
        let root = self.root;
        self.push(ObjectRecord {
            props: IndexMap::new(),
            proto: Some(root),
            elements: None,
        })
    }

    /// Object whose chain never reaches the root prototype.
    pub fn alloc_bare(&mut self) -> ObjRef {
        self.push(ObjectRecord {
            props: IndexMap::new(),
            proto: None,
            elements: None,
        })
    }

    pub fn alloc_object_with_proto(&mut self, proto: Option<ObjRef>) -> ObjRef {
        self.push(ObjectRecord {
            props: IndexMap::new(),
            proto,
            elements: None,
        })
    }

    pub fn alloc_array(&mut self, elements: Vec<Value>) -> ObjRef {
        let root = self.root;
        self.push(ObjectRecord {
            props: IndexMap::new(),
            proto: Some(root),
            elements: Some(elements),
        })
    }

    pub fn get(&self, r: ObjRef) -> &ObjectRecord {
        &self.records[r]
    }

    pub fn get_mut(&mut self, r: ObjRef) -> &mut ObjectRecord {
        &mut self.records[r]
    }

    pub fn set_prop(&mut self, r: ObjRef, key: &str, value: Value) {
        self.records[r].props.insert(key.to_string(), value);
    }

    /// Full lookup: own props (and array elements/length), then the prototype
    /// chain. Returns the value, where it was found, and whether the chain
    /// reaches the shared root prototype.
    pub fn lookup(&self, base: ObjRef, key: &str) -> (Value, Found, bool) {
        let hits_root = self.chain_hits_root(base);
        if let Some(elements) = &self.records[base].elements {
            if key == "length" {
                return (Value::Num(elements.len() as f64), Found::Own, hits_root);
            }
            if let Ok(idx) = key.parse::<usize>() {
                if idx < elements.len() {
                    return (elements[idx].clone(), Found::Own, hits_root);
                }
            }
        }
        let mut cur = Some(base);
        let mut depth = 0usize;
        while let Some(r) = cur {
            if let Some(v) = self.records[r].props.get(key) {
                let found = if depth == 0 {
                    Found::Own
                } else {
                    Found::PrototypeAt(depth)
                };
                return (v.clone(), found, hits_root);
            }
            cur = self.records[r].proto;
            depth += 1;
        }
        (Value::Undefined, Found::NotFound, hits_root)
    }

    pub fn chain_hits_root(&self, base: ObjRef) -> bool {
        let mut cur = Some(base);
        while let Some(r) = cur {
            if r == self.root {
                return true;
            }
            cur = self.records[r].proto;
        }
        false
    }

    /// A property is pollutable on `base` iff neither `base` nor any non-root
    /// prototype in its chain defines it, and the chain reaches the root.
    pub fn is_pollutable(&self, base: ObjRef, key: &str) -> bool {
        if let Some(elements) = &self.records[base].elements {
            if key == "length" {
                return false;
            }
            if let Ok(idx) = key.parse::<usize>() {
                if idx < elements.len() {
                    return false;
                }
            }
        }
        let mut cur = Some(base);
        let mut reached_root = false;
        while let Some(r) = cur {
            if r == self.root {
                reached_root = true;
                break;
            }
            if self.records[r].props.contains_key(key) {
                return false;
            }
            cur = self.records[r].proto;
        }
        reached_root
    }
}
