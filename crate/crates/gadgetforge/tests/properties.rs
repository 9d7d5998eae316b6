//! Property suites: randomized inputs checked against independent oracles.

use std::rc::Rc;

use proptest::prelude::*;

use gadgetforge::frontend::SourceLocation;
use gadgetforge::host::HostRegistry;
use gadgetforge::interp::{Found, Heap, Interp, PackageSource, Value};
use gadgetforge::pipeline::pattern_matches;
use gadgetforge::scheduler::{seed_worklist, Scheduler};
use gadgetforge::taint::{unwrap_deep, BranchRecord};

/// Naive wildcard matcher used as an oracle: dynamic programming over the
/// pattern and text, written independently of the recursive implementation.
fn matches_oracle(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let mut dp = vec![vec![false; t.len() + 1]; p.len() + 1];
    dp[0][0] = true;
    for i in 1..=p.len() {
        if p[i - 1] == '*' {
            dp[i][0] = dp[i - 1][0];
        }
        for j in 1..=t.len() {
            dp[i][j] = if p[i - 1] == '*' {
                dp[i - 1][j] || dp[i][j - 1]
            } else {
                p[i - 1] == t[j - 1] && dp[i - 1][j - 1]
            };
        }
    }
    dp[p.len()][t.len()]
}

fn branch_record(props: Vec<String>) -> BranchRecord {
    BranchRecord {
        loc: SourceLocation::synthetic("p.js"),
        props: props.into_iter().collect(),
        natural: false,
        discovered_in_run: 0,
    }
}

fn test_interp() -> Interp {
    let pkg = Rc::new(PackageSource::single("t", "test/main.js", ""));
    Interp::new(pkg, Rc::new(HostRegistry::standard()), 1_000)
}

proptest! {
    #[test]
    fn wildcard_matcher_agrees_with_oracle(
        pattern in "[ab*]{0,8}",
        text in "[ab]{0,8}",
    ) {
        prop_assert_eq!(pattern_matches(&pattern, &text), matches_oracle(&pattern, &text));
    }

    /// Oracle: a lookup through a linear prototype chain returns the value
    /// of the nearest defining object, or NotFound past the end.
    #[test]
    fn heap_lookup_agrees_with_naive_chain_walk(
        // per chain level: which of 4 keys are defined, and with what number
        levels in prop::collection::vec(
            prop::collection::vec((0usize..4, -100i64..100), 0..4),
            1..5
        ),
        key_index in 0usize..4,
    ) {
        let keys = ["a", "b", "c", "d"];
        let mut heap = Heap::new();
        // build the chain bottom-up: last level's proto is the root
        let mut proto = Some(heap.root);
        let mut chain: Vec<usize> = Vec::new();
        for level in levels.iter().rev() {
            let obj = heap.alloc_object_with_proto(proto);
            for (k, v) in level {
                heap.set_prop(obj, keys[*k], Value::Num(*v as f64));
            }
            proto = Some(obj);
            chain.push(obj);
        }
        chain.reverse();
        let base = chain[0];
        let key = keys[key_index];
        // independent oracle over the recorded level definitions
        let expected = levels.iter().enumerate().find_map(|(depth, level)| {
            level
                .iter()
                .rev() // set_prop overwrites: the last write wins
                .find(|(k, _)| keys[*k] == key)
                .map(|(_, v)| (depth, *v as f64))
        });
        let (value, found, hits_root) = heap.lookup(base, key);
        prop_assert!(hits_root, "every chain here ends at the root");
        match expected {
            Some((0, n)) => {
                prop_assert_eq!(found, Found::Own);
                prop_assert!(matches!(value, Value::Num(m) if m == n));
            }
            Some((depth, n)) => {
                prop_assert_eq!(found, Found::PrototypeAt(depth));
                prop_assert!(matches!(value, Value::Num(m) if m == n));
            }
            None => {
                prop_assert_eq!(found, Found::NotFound);
                prop_assert!(matches!(value, Value::Undefined));
                prop_assert!(heap.is_pollutable(base, key));
            }
        }
        if expected.is_some() {
            prop_assert!(!heap.is_pollutable(base, key));
        }
    }

    /// unwrap_deep on taint-free structures is the identity and idempotent.
    #[test]
    fn unwrap_deep_is_identity_on_plain_structures(
        nums in prop::collection::vec(-1000i64..1000, 0..6),
        text in "[a-z]{0,10}",
        depth in 1usize..5,
    ) {
        let mut it = test_interp();
        let elements: Vec<Value> = nums.iter().map(|n| Value::Num(*n as f64)).collect();
        let arr = it.heap.alloc_array(elements);
        let obj = it.heap.alloc_object();
        it.heap.set_prop(obj, "items", Value::Array(arr));
        it.heap.set_prop(obj, "label", Value::Text(text.clone()));
        let v = Value::Object(obj);
        let (plain, found) = unwrap_deep(&mut it, &v, depth);
        prop_assert!(found.is_empty());
        // identity: same heap object, untouched contents
        prop_assert!(matches!(plain, Value::Object(r) if r == obj));
        let (again, found2) = unwrap_deep(&mut it, &plain, depth);
        prop_assert!(found2.is_empty());
        prop_assert!(matches!(again, Value::Object(r) if r == obj));
    }

    /// seed_worklist: deduplicated, order-preserving, and exactly the union.
    #[test]
    fn seed_worklist_is_ordered_dedup_of_union(
        prop_sets in prop::collection::vec(
            prop::collection::vec("[pqrs]", 1..3),
            0..6
        ),
    ) {
        let records: Vec<BranchRecord> = prop_sets
            .iter()
            .map(|ps| branch_record(ps.clone()))
            .collect();
        let worklist = seed_worklist(&records);
        // no duplicates
        let mut seen = std::collections::BTreeSet::new();
        for p in &worklist {
            prop_assert!(seen.insert(p.clone()), "duplicate {p}");
        }
        // exactly the union of all record props
        let union: std::collections::BTreeSet<String> = records
            .iter()
            .flat_map(|r| r.props.iter().cloned())
            .collect();
        prop_assert_eq!(seen, union);
    }

    /// The scheduler never exceeds its run budget, and plan indices are
    /// strictly increasing starting at 1, regardless of what records each
    /// forced run reveals.
    #[test]
    fn scheduler_respects_budget_and_indices(
        initial in prop::collection::vec(prop::collection::vec("[pqrs]", 1..3), 1..4),
        reveals in prop::collection::vec(prop::collection::vec("[tuvw]", 0..2), 0..6),
        max_runs in 1usize..6,
    ) {
        let mut records: Vec<BranchRecord> = initial
            .iter()
            .map(|ps| branch_record(ps.clone()))
            .collect();
        let mut scheduler = Scheduler::after_unintrusive(&records, max_runs);
        let mut reveal_iter = reveals.into_iter();
        let mut last_index = 0usize;
        while let Some(plan) = scheduler.next_plan(&records) {
            prop_assert!(plan.index > last_index);
            prop_assert!(plan.index < max_runs);
            last_index = plan.index;
            prop_assert!(!plan.forced_props.is_empty());
            // simulate the forced run revealing fresh records
            if let Some(extra) = reveal_iter.next() {
                if !extra.is_empty() {
                    records.push(branch_record(extra));
                }
            }
        }
        prop_assert!(scheduler.run_count() <= max_runs);
    }
}
