//! Command-line driver: analyze packages, browse stored reports, export
//! SARIF, replay findings under simulated pollution, and compact the store.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use clap::{Args, Parser, Subcommand};

use gadgetforge::host::{HostRegistry, SinkCategory};
use gadgetforge::pipeline::sarif::{to_sarif_string, validate_sarif};
use gadgetforge::pipeline::store::Store;
use gadgetforge::pipeline::{
    analyze_package, load_package, prioritize, verify_with_pollution, AnalysisResult, Budgets,
    ExecutionStrategy, PackageReport,
};

#[derive(Parser)]
#[command(name = "gadgetforge", version, about = "Prototype-pollution gadget detector for MiniJS packages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct StoreArg {
    /// Results store path (JSON Lines). Defaults to $GADGETFORGE_OUT or ./results.jsonl.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl StoreArg {
    fn path(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os("GADGETFORGE_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results.jsonl"))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyze package directories and append runs and reports to the store.
    Analyze {
        /// Package directories (each containing package.json).
        dirs: Vec<PathBuf>,
        /// File listing one package directory per line.
        #[arg(long)]
        list: Option<PathBuf>,
        #[command(flatten)]
        store: StoreArg,
        /// Maximum interpreter passes per package, including the unintrusive one.
        #[arg(long, default_value_t = 25)]
        max_runs: usize,
        /// Evaluation-step budget per interpreter pass.
        #[arg(long, default_value_t = 5_000_000)]
        step_budget: u64,
        /// Allowed test-command patterns (`*` wildcard). Repeatable.
        #[arg(long)]
        allow: Vec<String>,
        /// Denied test-command patterns; deny wins over allow. Repeatable.
        #[arg(long)]
        deny: Vec<String>,
        /// Package-name keywords that skip analysis entirely. Repeatable.
        #[arg(long)]
        name_filter: Vec<String>,
        /// Worker threads; 1 means sequential.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// JSON file overriding the built-in special-sink table.
        #[arg(long)]
        special_table: Option<PathBuf>,
    },
    /// Print stored reports in priority order.
    Report {
        #[command(flatten)]
        store: StoreArg,
        /// Show at most this many packages.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Write the latest report for a package as a SARIF 2.1.0 file.
    ExportSarif {
        /// Package name as recorded in the store.
        package: String,
        #[command(flatten)]
        store: StoreArg,
        /// Output file; defaults to <package>.sarif next to the store.
        #[arg(long)]
        dest: Option<PathBuf>,
    },
    /// Re-run a package's tests with the shared root prototype polluted.
    Verify {
        /// Package directory.
        dir: PathBuf,
        /// Pollution as prop=value; the value is parsed as JSON, falling back
        /// to a plain string. Repeatable.
        #[arg(long = "pollute", value_name = "PROP=VALUE")]
        pollute: Vec<String>,
        /// Test entry file; defaults to the first allowed test command.
        #[arg(long)]
        entry: Option<String>,
        /// Evaluation-step budget.
        #[arg(long, default_value_t = 5_000_000)]
        step_budget: u64,
    },
    /// Rewrite the store keeping only the latest report per package.
    Compact {
        #[command(flatten)]
        store: StoreArg,
    },
}

fn read_list(path: &Path) -> Result<Vec<PathBuf>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(PathBuf::from)
        .collect())
}

fn make_registry(special_table: Option<&str>) -> Result<HostRegistry, String> {
    match special_table {
        Some(json) => HostRegistry::with_special_table(json),
        None => Ok(HostRegistry::standard()),
    }
}

fn analyze_one(
    dir: &Path,
    strategy: &ExecutionStrategy,
    budgets: &Budgets,
    special_table: Option<&str>,
) -> Result<AnalysisResult, String> {
    let pkg = load_package(dir)?;
    let registry = Rc::new(make_registry(special_table)?);
    Ok(analyze_package(&pkg, strategy, &registry, budgets))
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    mut dirs: Vec<PathBuf>,
    list: Option<PathBuf>,
    store: StoreArg,
    max_runs: usize,
    step_budget: u64,
    allow: Vec<String>,
    deny: Vec<String>,
    name_filter: Vec<String>,
    jobs: usize,
    special_table: Option<PathBuf>,
) -> i32 {
    if let Some(list) = list {
        match read_list(&list) {
            Ok(more) => dirs.extend(more),
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        }
    }
    if dirs.is_empty() {
        eprintln!("error: no package directories given");
        return 2;
    }
    let special = match special_table {
        Some(p) => match std::fs::read_to_string(&p) {
            Ok(s) => Some(s),
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return 2;
            }
        },
        None => None,
    };
    let mut strategy = ExecutionStrategy::default();
    if !allow.is_empty() {
        strategy.allow = allow;
    }
    if !deny.is_empty() {
        strategy.deny = deny;
    }
    if !name_filter.is_empty() {
        strategy.name_filter_keywords = name_filter;
    }
    let budgets = Budgets {
        max_runs,
        step_budget,
    };

    // Packages are analyzed in worker threads (each thread loads its own
    // package and host registry), but results are appended to the store in
    // input order so repeated invocations produce identical stores.
    let jobs = jobs.max(1).min(dirs.len());
    let mut results: Vec<Option<Result<AnalysisResult, String>>> = Vec::new();
    results.resize_with(dirs.len(), || None);
    std::thread::scope(|scope| {
        let mut slices: Vec<&mut [Option<Result<AnalysisResult, String>>]> = Vec::new();
        let mut rest = results.as_mut_slice();
        let per = dirs.len().div_ceil(jobs);
        while !rest.is_empty() {
            let take = per.min(rest.len());
            let (head, tail) = rest.split_at_mut(take);
            slices.push(head);
            rest = tail;
        }
        let mut offset = 0usize;
        for slice in slices {
            let len = slice.len();
            let dirs = &dirs[offset..offset + len];
            let strategy = &strategy;
            let budgets = &budgets;
            let special = special.as_deref();
            scope.spawn(move || {
                for (slot, dir) in slice.iter_mut().zip(dirs) {
                    *slot = Some(analyze_one(dir, strategy, budgets, special));
                }
            });
            offset += len;
        }
    });

    let store = Store::new(&store.path());
    let mut exit = 0;
    for (dir, result) in dirs.iter().zip(results) {
        match result.expect("every slot filled") {
            Ok(analysis) => {
                for run in &analysis.run_records {
                    if let Err(e) = store.append_run(run) {
                        eprintln!("error: {e}");
                        return 2;
                    }
                }
                if let Err(e) = store.append_report(&analysis.report) {
                    eprintln!("error: {e}");
                    return 2;
                }
                println!("{}", analysis.report.summary_line());
            }
            Err(e) => {
                eprintln!("error: {}: {e}", dir.display());
                exit = 2;
            }
        }
    }
    exit
}

fn load_reports(store: &Store) -> Result<Vec<PackageReport>, String> {
    let mut reports = Vec::new();
    for (name, j) in store.latest_reports()? {
        let report: PackageReport =
            serde_json::from_value(j).map_err(|e| format!("report for {name}: {e}"))?;
        reports.push(report);
    }
    Ok(reports)
}

fn cmd_report(store: StoreArg, top: Option<usize>) -> i32 {
    let store = Store::new(&store.path());
    let reports = match load_reports(&store) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if reports.is_empty() {
        println!("no reports");
        return 0;
    }
    let ordered = prioritize(&reports);
    let limit = top.unwrap_or(ordered.len());
    for report in ordered.into_iter().take(limit) {
        println!("{} {}", report.package.version, report.summary_line());
        let mut by_mode: BTreeMap<&str, usize> = BTreeMap::new();
        for h in &report.hits {
            *by_mode.entry(h.mode.label()).or_insert(0) += 1;
        }
        for (mode, n) in by_mode {
            println!("  mode {mode}: {n}");
        }
        for h in &report.hits {
            let source = h
                .sources
                .first()
                .map(|s| s.property.clone())
                .unwrap_or_else(|| "-".to_string());
            println!(
                "  [{}] {} -> {}.{} at {}:{}:{}",
                h.category.label(),
                source,
                h.sink_module,
                h.sink_name,
                h.sink_loc.file,
                h.sink_loc.line,
                h.sink_loc.column
            );
        }
    }
    0
}

fn cmd_export_sarif(package: String, store_arg: StoreArg, dest: Option<PathBuf>) -> i32 {
    let store_path = store_arg.path();
    let store = Store::new(&store_path);
    let reports = match store.latest_reports() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let Some(j) = reports.get(&package) else {
        eprintln!("error: no report for package `{package}`");
        return 2;
    };
    let report: PackageReport = match serde_json::from_value(j.clone()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: report for {package}: {e}");
            return 2;
        }
    };
    let text = to_sarif_string(&report);
    let doc: serde_json::Value = serde_json::from_str(&text).expect("sarif round-trips");
    if let Err(e) = validate_sarif(&doc) {
        eprintln!("error: generated SARIF failed validation: {e}");
        return 2;
    }
    let dest = dest.unwrap_or_else(|| {
        store_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
            .join(format!("{package}.sarif"))
    });
    if let Err(e) = std::fs::write(&dest, text) {
        eprintln!("error: {}: {e}", dest.display());
        return 2;
    }
    println!("wrote {}", dest.display());
    0
}

fn parse_pollution(specs: &[String]) -> Result<BTreeMap<String, serde_json::Value>, String> {
    let mut out = BTreeMap::new();
    for spec in specs {
        let (prop, raw) = spec
            .split_once('=')
            .ok_or_else(|| format!("--pollute expects PROP=VALUE, got `{spec}`"))?;
        let value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        out.insert(prop.to_string(), value);
    }
    Ok(out)
}

fn cmd_verify(
    dir: PathBuf,
    pollute: Vec<String>,
    entry: Option<String>,
    step_budget: u64,
) -> i32 {
    let pkg = match load_package(&dir) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let pollutions = match parse_pollution(&pollute) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let strategy = ExecutionStrategy::default();
    let entry = match entry.or_else(|| strategy.allowed_entries(&pkg.manifest).into_iter().next())
    {
        Some(e) => e,
        None => {
            eprintln!("error: package has no allowed test command; pass --entry");
            return 2;
        }
    };
    let registry = Rc::new(HostRegistry::standard());
    let budgets = Budgets {
        max_runs: 1,
        step_budget,
    };
    let outcome = match verify_with_pollution(&pkg, &registry, &budgets, &pollutions, &entry) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    println!("status: {:?}", outcome.status);
    if let Some(err) = &outcome.error {
        println!("error: {err}");
    }
    let mut triggered = false;
    for effect in &outcome.effects_log {
        println!(
            "effect [{}] {}.{}: {}",
            effect.category.label(),
            effect.module,
            effect.name,
            effect.detail
        );
        if effect.category != SinkCategory::None {
            triggered = true;
        }
    }
    if triggered {
        println!("verified: security-relevant effect observed under pollution");
        0
    } else {
        println!("not verified: no security-relevant effect observed");
        1
    }
}

fn cmd_compact(store: StoreArg) -> i32 {
    let store = Store::new(&store.path());
    match store.compact() {
        Ok(()) => {
            println!("compacted {}", store.path.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze {
            dirs,
            list,
            store,
            max_runs,
            step_budget,
            allow,
            deny,
            name_filter,
            jobs,
            special_table,
        } => cmd_analyze(
            dirs,
            list,
            store,
            max_runs,
            step_budget,
            allow,
            deny,
            name_filter,
            jobs,
            special_table,
        ),
        Command::Report { store, top } => cmd_report(store, top),
        Command::ExportSarif {
            package,
            store,
            dest,
        } => cmd_export_sarif(package, store, dest),
        Command::Verify {
            dir,
            pollute,
            entry,
            step_budget,
        } => cmd_verify(dir, pollute, entry, step_budget),
        Command::Compact { store } => cmd_compact(store),
    };
    std::process::exit(code);
}
