//! Package-level orchestration: manifest loading, execution-strategy
//! filtering, pre-analysis, the forced-execution loop, dedup/categorization,
//! persistence, SARIF export, and pollution-replay verification.

pub mod sarif;
pub mod store;

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::host::{HostRegistry, SinkCategory};
use crate::interp::{Interp, NoopHooks, PackageSource, RunOutcome, RunStatus, Value};
use crate::scheduler::{RunPlan, Scheduler};
use crate::taint::{RunMode, SinkHit, TaintHooks, TaintState};

pub const SCHEMA_VERSION: u32 = 1;

// ---- manifest & loading ----

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Scripts {
    #[serde(default)]
    pub test: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackageManifest {
    pub name: String,
    #[serde(default)]
    pub main: Option<String>,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub scripts: Scripts,
}

#[derive(Debug, Clone)]
pub struct LoadedPackage {
    pub manifest: PackageManifest,
    pub source: Rc<PackageSource>,
    /// Content hash of the sorted sources; stands in for a registry version.
    pub version: String,
    pub dir: PathBuf,
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<(), String> {
    let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p.extension().and_then(|e| e.to_str()) == Some("js") {
            let rel = p
                .strip_prefix(root)
                .map_err(|e| e.to_string())?
                .to_string_lossy()
                .replace('\\', "/");
            let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            out.insert(rel, text);
        }
    }
    Ok(())
}

pub fn load_package(dir: &Path) -> Result<LoadedPackage, String> {
    let manifest_path = dir.join("package.json");
    let manifest_text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| format!("{}: {e}", manifest_path.display()))?;
    let manifest: PackageManifest =
        serde_json::from_str(&manifest_text).map_err(|e| format!("package.json: {e}"))?;
    let mut files = BTreeMap::new();
    collect_files(dir, dir, &mut files)?;
    let mut hasher = Sha256::new();
    for (path, text) in &files {
        hasher.update(path.as_bytes());
        hasher.update([0]);
        hasher.update(text.as_bytes());
        hasher.update([0]);
    }
    let version: String = hasher
        .finalize()
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect();
    let source = Rc::new(PackageSource {
        name: manifest.name.clone(),
        files,
    });
    Ok(LoadedPackage {
        manifest,
        source,
        version,
        dir: dir.to_path_buf(),
    })
}

// ---- execution strategy ----

#[derive(Debug, Clone, Serialize)]
pub struct ExecutionStrategy {
    pub allow: Vec<String>,
    pub deny: Vec<String>,
    pub name_filter_keywords: Vec<String>,
}

impl Default for ExecutionStrategy {
    fn default() -> Self {
        ExecutionStrategy {
            allow: vec!["run test/*".to_string()],
            deny: vec!["audit*".to_string(), "install*".to_string()],
            name_filter_keywords: vec!["react".to_string(), "angular".to_string()],
        }
    }
}

/// Glob-ish matcher: `*` matches any (possibly empty) substring.
pub fn pattern_matches(pattern: &str, text: &str) -> bool {
    fn rec(p: &[u8], t: &[u8]) -> bool {
        match p.first() {
            None => t.is_empty(),
            Some(b'*') => (0..=t.len()).any(|i| rec(&p[1..], &t[i..])),
            Some(c) => t.first() == Some(c) && rec(&p[1..], &t[1..]),
        }
    }
    rec(pattern.as_bytes(), text.as_bytes())
}

impl ExecutionStrategy {
    /// Deny wins over allow.
    pub fn command_allowed(&self, command: &str) -> bool {
        if self.deny.iter().any(|p| pattern_matches(p, command)) {
            return false;
        }
        self.allow.iter().any(|p| pattern_matches(p, command))
    }

    pub fn name_filtered(&self, package_name: &str) -> bool {
        let lower = package_name.to_lowercase();
        self.name_filter_keywords
            .iter()
            .any(|k| lower.contains(&k.to_lowercase()))
    }

    /// Allowed "run <file>" commands, in manifest order, as entry files.
    pub fn allowed_entries(&self, manifest: &PackageManifest) -> Vec<String> {
        manifest
            .scripts
            .test
            .iter()
            .filter(|c| self.command_allowed(c))
            .filter_map(|c| c.strip_prefix("run ").map(|f| f.trim().to_string()))
            .collect()
    }
}

// ---- skip reasons & pre-analysis ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    NameFiltered,
    NoTests,
    NoHostApi,
    DryRunFailed,
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SkipReason::NameFiltered => "NameFiltered",
            SkipReason::NoTests => "NoTests",
            SkipReason::NoHostApi => "NoHostApi",
            SkipReason::DryRunFailed => "DryRunFailed",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct PreAnalysis {
    pub uses_host_api: bool,
    pub dry_run_ok: bool,
    pub entries: Vec<String>,
    pub plain_outcomes: Vec<RunOutcome>,
}

#[derive(Debug, Clone)]
pub struct Budgets {
    pub max_runs: usize,
    pub step_budget: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            max_runs: 25,
            step_budget: 5_000_000,
        }
    }
}

fn fresh_interp(pkg: &LoadedPackage, registry: &Rc<HostRegistry>, budget: u64) -> Interp {
    Interp::new(pkg.source.clone(), registry.clone(), budget)
}

pub fn pre_analyze(
    pkg: &LoadedPackage,
    strategy: &ExecutionStrategy,
    registry: &Rc<HostRegistry>,
    budgets: &Budgets,
) -> Result<PreAnalysis, SkipReason> {
    if strategy.name_filtered(&pkg.manifest.name) {
        return Err(SkipReason::NameFiltered);
    }
    let entries = strategy.allowed_entries(&pkg.manifest);
    if entries.is_empty() {
        return Err(SkipReason::NoTests);
    }
    let mut uses_host_api = false;
    let mut any_ok = false;
    let mut plain_outcomes = Vec::new();
    for entry in &entries {
        let mut it = fresh_interp(pkg, registry, budgets.step_budget);
        let out = it.run_command(entry, &mut NoopHooks);
        if it.host_calls.iter().any(|(module, _)| module != "console") {
            uses_host_api = true;
        }
        if out.status != RunStatus::UncaughtError {
            any_ok = true;
        }
        plain_outcomes.push(out);
    }
    if !uses_host_api {
        return Err(SkipReason::NoHostApi);
    }
    if !any_ok {
        return Err(SkipReason::DryRunFailed);
    }
    Ok(PreAnalysis {
        uses_host_api,
        dry_run_ok: any_ok,
        entries,
        plain_outcomes,
    })
}

// ---- reports ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageId {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HitMeta {
    pub flow_key: String,
    pub after_forced_flip: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub plan: RunPlan,
    pub command: String,
    pub status: RunStatus,
    pub steps_used: u64,
    pub hits: Vec<HitMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackageReport {
    pub package: PackageId,
    pub skipped: Option<SkipReason>,
    /// Deduplicated by FlowKey, sorted by FlowKey.
    pub hits: Vec<SinkHit>,
    pub category_summary: BTreeMap<String, usize>,
    pub runs_meta: Vec<RunMeta>,
}

impl PackageReport {
    pub fn skipped(pkg: &LoadedPackage, reason: SkipReason) -> Self {
        PackageReport {
            package: PackageId {
                name: pkg.manifest.name.clone(),
                version: pkg.version.clone(),
            },
            skipped: Some(reason),
            hits: Vec::new(),
            category_summary: BTreeMap::new(),
            runs_meta: Vec::new(),
        }
    }

    pub fn best_category(&self) -> SinkCategory {
        self.hits
            .iter()
            .map(|h| h.category)
            .min_by_key(|c| c.priority_rank())
            .unwrap_or(SinkCategory::None)
    }

    pub fn summary_line(&self) -> String {
        if let Some(reason) = self.skipped {
            return format!("{}: skipped ({reason})", self.package.name);
        }
        let runs = self
            .runs_meta
            .iter()
            .map(|m| m.plan.index)
            .max()
            .map(|i| i + 1)
            .unwrap_or(0);
        if self.hits.is_empty() {
            return format!("{}: clean runs={runs}", self.package.name);
        }
        let counts: Vec<String> = self
            .category_summary
            .iter()
            .map(|(c, n)| format!("{c}={n}"))
            .collect();
        format!("{}: {} runs={runs}", self.package.name, counts.join(" "))
    }
}

/// Per-run line for the results store (replayable plan + observed behavior).
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub package: PackageId,
    pub plan: RunPlan,
    pub command: String,
    pub status: RunStatus,
    pub steps_used: u64,
    pub effects: Vec<crate::interp::EffectRecord>,
    pub new_branch_records: Vec<crate::taint::BranchRecord>,
    pub hit_flow_keys: Vec<String>,
}

pub struct AnalysisResult {
    pub report: PackageReport,
    pub run_records: Vec<RunRecord>,
}

// ---- analysis ----

pub fn analyze_package(
    pkg: &LoadedPackage,
    strategy: &ExecutionStrategy,
    registry: &Rc<HostRegistry>,
    budgets: &Budgets,
) -> AnalysisResult {
    let pre = match pre_analyze(pkg, strategy, registry, budgets) {
        Ok(pre) => pre,
        Err(reason) => {
            return AnalysisResult {
                report: PackageReport::skipped(pkg, reason),
                run_records: Vec::new(),
            }
        }
    };
    let package_id = PackageId {
        name: pkg.manifest.name.clone(),
        version: pkg.version.clone(),
    };
    let state = Rc::new(RefCell::new(TaintState::new()));
    let mut runs_meta: Vec<RunMeta> = Vec::new();
    let mut run_records: Vec<RunRecord> = Vec::new();

    let execute_plan = |plan: &RunPlan,
                            state: &Rc<RefCell<TaintState>>,
                            runs_meta: &mut Vec<RunMeta>,
                            run_records: &mut Vec<RunRecord>| {
        let mode = if plan.is_forced() {
            RunMode::Forced(plan.forced_props.clone())
        } else {
            RunMode::Unintrusive
        };
        for entry in &pre.entries {
            state.borrow_mut().begin_run(plan.index, mode.clone());
            state.borrow_mut().begin_command();
            let (hits_before, records_before) = {
                let st = state.borrow();
                (st.hits.len(), st.records.len())
            };
            let mut it = fresh_interp(pkg, registry, budgets.step_budget);
            let mut hooks = TaintHooks::new(state.clone());
            let out = it.run_command(entry, &mut hooks);
            let st = state.borrow();
            let hits: Vec<HitMeta> = st.hits[hits_before..]
                .iter()
                .map(|h| HitMeta {
                    flow_key: h.flow_key(),
                    after_forced_flip: h.after_forced_flip,
                })
                .collect();
            runs_meta.push(RunMeta {
                plan: plan.clone(),
                command: format!("run {entry}"),
                status: out.status,
                steps_used: out.steps_used,
                hits: hits.clone(),
            });
            run_records.push(RunRecord {
                package: package_id.clone(),
                plan: plan.clone(),
                command: format!("run {entry}"),
                status: out.status,
                steps_used: out.steps_used,
                effects: out.effects_log.clone(),
                new_branch_records: st.records[records_before..].to_vec(),
                hit_flow_keys: hits.into_iter().map(|h| h.flow_key).collect(),
            });
        }
    };

    // unintrusive pass
    execute_plan(
        &RunPlan::unintrusive(),
        &state,
        &mut runs_meta,
        &mut run_records,
    );
    // forced-branch loop
    let mut scheduler = {
        let st = state.borrow();
        Scheduler::after_unintrusive(&st.records, budgets.max_runs)
    };
    loop {
        let records = state.borrow().records.clone();
        let Some(plan) = scheduler.next_plan(&records) else {
            break;
        };
        execute_plan(&plan, &state, &mut runs_meta, &mut run_records);
    }

    // dedup by FlowKey, keeping the earliest hit, ordered by FlowKey
    let mut deduped: BTreeMap<String, SinkHit> = BTreeMap::new();
    for h in &state.borrow().hits {
        deduped.entry(h.flow_key()).or_insert_with(|| h.clone());
    }
    let hits: Vec<SinkHit> = deduped.into_values().collect();
    let mut category_summary: BTreeMap<String, usize> = BTreeMap::new();
    for h in &hits {
        *category_summary
            .entry(h.category.label().to_string())
            .or_insert(0) += 1;
    }
    AnalysisResult {
        report: PackageReport {
            package: package_id,
            skipped: None,
            hits,
            category_summary,
            runs_meta,
        },
        run_records,
    }
}

// ---- verification ----

/// Pollution values are JSON literals: text, number, boolean, or array of text.
pub fn pollution_value(it: &mut Interp, j: &serde_json::Value) -> Result<Value, String> {
    match j {
        serde_json::Value::String(s) => Ok(Value::Text(s.clone())),
        serde_json::Value::Number(n) => Ok(Value::Num(n.as_f64().unwrap_or(0.0))),
        serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
        serde_json::Value::Array(items) => {
            let mut elements = Vec::new();
            for item in items {
                match item {
                    serde_json::Value::String(s) => elements.push(Value::Text(s.clone())),
                    other => return Err(format!("unsupported array element: {other}")),
                }
            }
            Ok(Value::Array(it.heap.alloc_array(elements)))
        }
        other => Err(format!("unsupported pollution literal: {other}")),
    }
}

/// Replay a test command under simulated pollution of the shared root
/// prototype, without tainting.
pub fn verify_with_pollution(
    pkg: &LoadedPackage,
    registry: &Rc<HostRegistry>,
    budgets: &Budgets,
    pollutions: &BTreeMap<String, serde_json::Value>,
    entry: &str,
) -> Result<RunOutcome, String> {
    let mut it = fresh_interp(pkg, registry, budgets.step_budget);
    for (prop, literal) in pollutions {
        let v = pollution_value(&mut it, literal)?;
        let root = it.heap.root;
        it.heap.set_prop(root, prop, v);
    }
    Ok(it.run_command(entry, &mut NoopHooks))
}

// ---- prioritization ----

/// Order reports: best category first (ACE > ACI > LFI > FileWrite > FileRead
/// > Network > None), ties by hit count descending, then by name.
pub fn prioritize(reports: &[PackageReport]) -> Vec<&PackageReport> {
    let mut out: Vec<&PackageReport> = reports.iter().collect();
    out.sort_by(|a, b| {
        a.best_category()
            .priority_rank()
            .cmp(&b.best_category().priority_rank())
            .then(b.hits.len().cmp(&a.hits.len()))
            .then(a.package.name.cmp(&b.package.name))
    });
    out
}
