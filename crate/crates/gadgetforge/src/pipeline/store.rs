//! Append-only JSON Lines results store: one object per run and one per
//! report, each with a `kind` and `schemaVersion` field. A compaction pass
//! keeps only the latest report per package.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value as J};

use super::{PackageReport, RunRecord, SCHEMA_VERSION};

pub struct Store {
    pub path: PathBuf,
}

impl Store {
    pub fn new(path: &Path) -> Self {
        Store {
            path: path.to_path_buf(),
        }
    }

    fn append_line(&self, value: &J) -> Result<(), String> {
        if let Some(parent) = self.path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
            }
        }
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| format!("{}: {e}", self.path.display()))?;
        let line = serde_json::to_string(value).map_err(|e| e.to_string())?;
        writeln!(f, "{line}").map_err(|e| e.to_string())
    }

    pub fn append_run(&self, run: &RunRecord) -> Result<(), String> {
        self.append_line(&json!({
            "kind": "run",
            "schemaVersion": SCHEMA_VERSION,
            "run": run
        }))
    }

    pub fn append_report(&self, report: &PackageReport) -> Result<(), String> {
        self.append_line(&json!({
            "kind": "report",
            "schemaVersion": SCHEMA_VERSION,
            "report": report
        }))
    }

    pub fn read_lines(&self) -> Result<Vec<J>, String> {
        let text = std::fs::read_to_string(&self.path)
            .map_err(|e| format!("{}: {e}", self.path.display()))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
            .collect()
    }

    /// Latest report line per package name, in name order.
    pub fn latest_reports(&self) -> Result<BTreeMap<String, J>, String> {
        let mut out = BTreeMap::new();
        for line in self.read_lines()? {
            if line.get("kind").and_then(J::as_str) == Some("report") {
                if let Some(name) = line
                    .pointer("/report/package/name")
                    .and_then(J::as_str)
                    .map(str::to_string)
                {
                    out.insert(name, line["report"].clone());
                }
            }
        }
        Ok(out)
    }

    /// Rewrite the store keeping only the latest report per package; run
    /// lines are dropped (they exist for replay of recent analyses).
    pub fn compact(&self) -> Result<(), String> {
        let reports = self.latest_reports()?;
        let mut text = String::new();
        for report in reports.values() {
            let line = serde_json::to_string(&json!({
                "kind": "report",
                "schemaVersion": SCHEMA_VERSION,
                "report": report
            }))
            .map_err(|e| e.to_string())?;
            text.push_str(&line);
            text.push('\n');
        }
        std::fs::write(&self.path, text).map_err(|e| e.to_string())
    }
}
