//! Forced branch execution planning: one seed property at a time, expanding a
//! plan with newly revealed properties until a run adds no new branch records.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::taint::BranchRecord;

/// One planned interpreter pass. `forced_props` empty means unintrusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPlan {
    pub index: usize,
    pub forced_props: BTreeSet<String>,
}

impl RunPlan {
    pub fn unintrusive() -> Self {
        RunPlan {
            index: 0,
            forced_props: BTreeSet::new(),
        }
    }

    pub fn is_forced(&self) -> bool {
        !self.forced_props.is_empty()
    }
}

/// Properties of the given records in first-seen order, deduplicated.
pub fn seed_worklist(records: &[BranchRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in records {
        for p in &r.props {
            if seen.insert(p.clone()) {
                out.push(p.clone());
            }
        }
    }
    out
}

/// Plans forced runs from the branch records accumulated so far. The caller
/// executes each plan and feeds the full (deduplicated) record list back into
/// the next `next_plan` call.
pub struct Scheduler {
    worklist: VecDeque<String>,
    processed: BTreeSet<String>,
    /// Seed-plus-expansions set currently being driven to fixpoint.
    current: Option<BTreeSet<String>>,
    records_seen: usize,
    run_count: usize,
    max_runs: usize,
}

impl Scheduler {
    /// Build from the state after the unintrusive run (which counts toward
    /// the run budget).
    pub fn after_unintrusive(records: &[BranchRecord], max_runs: usize) -> Self {
        Scheduler {
            worklist: seed_worklist(records).into(),
            processed: BTreeSet::new(),
            current: None,
            records_seen: records.len(),
            run_count: 1,
            max_runs,
        }
    }

    pub fn run_count(&self) -> usize {
        self.run_count
    }

    pub fn processed(&self) -> &BTreeSet<String> {
        &self.processed
    }

    /// Decide the next forced plan, or None when the worklist is exhausted or
    /// the run budget is reached. `records` is the cumulative record list.
    pub fn next_plan(&mut self, records: &[BranchRecord]) -> Option<RunPlan> {
        // fold in what the previous forced run revealed
        if let Some(current) = self.current.take() {
            let new_records = &records[self.records_seen.min(records.len())..];
            self.records_seen = records.len();
            let mut expanded = current;
            let mut grew = false;
            for r in new_records {
                // only conditionals untouched by already-processed properties
                // pull their properties into the running plan
                if r.props.iter().all(|p| !self.processed.contains(p)) {
                    for p in &r.props {
                        if expanded.insert(p.clone()) {
                            grew = true;
                        }
                    }
                }
            }
            if grew && self.run_count < self.max_runs {
                self.current = Some(expanded.clone());
                let plan = RunPlan {
                    index: self.run_count,
                    forced_props: expanded,
                };
                self.run_count += 1;
                return Some(plan);
            }
            // fixpoint (plans are deterministic, so an unchanged plan cannot
            // add records): everything in the plan is done
            self.processed.extend(expanded);
        }
        while let Some(p) = self.worklist.pop_front() {
            if self.processed.contains(&p) {
                continue;
            }
            if self.run_count >= self.max_runs {
                return None;
            }
            self.records_seen = records.len();
            let set: BTreeSet<String> = [p].into_iter().collect();
            self.current = Some(set.clone());
            let plan = RunPlan {
                index: self.run_count,
                forced_props: set,
            };
            self.run_count += 1;
            return Some(plan);
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::SourceLocation;

    fn rec(line: usize, props: &[&str]) -> BranchRecord {
        let mut loc = SourceLocation::synthetic("t.mjs");
        loc.line = line as u32;
        BranchRecord {
            loc,
            props: props.iter().map(|p| p.to_string()).collect(),
            natural: false,
            discovered_in_run: 0,
        }
    }

    #[test]
    fn seed_order_is_first_seen() {
        let records = vec![rec(1, &["p"]), rec(2, &["q"]), rec(3, &["p"])];
        assert_eq!(seed_worklist(&records), vec!["p", "q"]);
    }

    #[test]
    fn no_tainted_conditionals_means_done_after_unintrusive() {
        let mut s = Scheduler::after_unintrusive(&[], 25);
        assert_eq!(s.next_plan(&[]), None);
        assert_eq!(s.run_count(), 1);
    }

    #[test]
    fn single_property_fixpoint_in_two_runs() {
        let records = vec![rec(7, &["newProcess"])];
        let mut s = Scheduler::after_unintrusive(&records, 25);
        let plan = s.next_plan(&records).expect("one forced plan");
        assert_eq!(plan.index, 1);
        assert_eq!(
            plan.forced_props,
            ["newProcess".to_string()].into_iter().collect()
        );
        // the forced run revealed nothing new
        assert_eq!(s.next_plan(&records), None);
        assert_eq!(s.run_count(), 2);
        assert!(s.processed().contains("newProcess"));
    }

    #[test]
    fn revealed_property_expands_the_plan() {
        let mut records = vec![rec(1, &["p"])];
        let mut s = Scheduler::after_unintrusive(&records, 25);
        let p1 = s.next_plan(&records).unwrap();
        assert_eq!(p1.forced_props, ["p".to_string()].into_iter().collect());
        // forcing p revealed a conditional on q
        records.push(rec(2, &["q"]));
        let p2 = s.next_plan(&records).unwrap();
        assert_eq!(
            p2.forced_props,
            ["p".to_string(), "q".to_string()].into_iter().collect()
        );
        // fixpoint; q was handled inside the expansion, never re-seeded
        assert_eq!(s.next_plan(&records), None);
        assert_eq!(s.run_count(), 3);
        let processed = s.processed().clone();
        assert!(processed.contains("p") && processed.contains("q"));
    }

    #[test]
    fn max_runs_one_allows_no_forced_runs() {
        let records = vec![rec(1, &["p"])];
        let mut s = Scheduler::after_unintrusive(&records, 1);
        assert_eq!(s.next_plan(&records), None);
    }

    #[test]
    fn budget_caps_expansions() {
        let mut records = vec![rec(1, &["p"])];
        let mut s = Scheduler::after_unintrusive(&records, 2);
        assert!(s.next_plan(&records).is_some());
        records.push(rec(2, &["q"]));
        // expansion would be next, but the budget is exhausted
        assert_eq!(s.next_plan(&records), None);
        assert_eq!(s.run_count(), 2);
    }

    #[test]
    fn worklist_skips_processed_properties() {
        let records = vec![rec(1, &["p"]), rec(2, &["q"])];
        let mut s = Scheduler::after_unintrusive(&records, 25);
        let p1 = s.next_plan(&records).unwrap();
        assert_eq!(p1.forced_props.len(), 1);
        let p2 = s.next_plan(&records).unwrap();
        assert_eq!(p2.forced_props, ["q".to_string()].into_iter().collect());
        assert_eq!(s.next_plan(&records), None);
        // worklist and processed stay disjoint throughout
        assert!(s.worklist.iter().all(|w| !s.processed.contains(w)));
    }
}
