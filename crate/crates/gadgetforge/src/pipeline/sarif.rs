//! SARIF 2.1.0 subset export and an in-repo structural validator.

use serde_json::{json, Value as J};

use crate::frontend::SourceLocation;
use crate::taint::{FlowKind, SinkHit};

use super::PackageReport;

fn location_json(loc: &SourceLocation, message: Option<String>) -> J {
    let mut physical = json!({
        "artifactLocation": { "uri": loc.file },
        "region": {
            "startLine": loc.line,
            "startColumn": loc.column
        }
    });
    if let Some(m) = message {
        return json!({
            "location": {
                "physicalLocation": physical,
                "message": { "text": m }
            }
        });
    }
    physical = json!({ "physicalLocation": physical });
    physical
}

fn step_text(kind: FlowKind, detail: &str) -> String {
    match kind {
        FlowKind::Read => format!("read of property `{detail}`"),
        FlowKind::BinaryOp => format!("binary operation `{detail}`"),
        FlowKind::UnaryOp => format!("unary operation `{detail}`"),
        FlowKind::Coercion => format!("coercion ({detail})"),
        FlowKind::BuiltinPropagation => format!("built-in `{detail}`"),
        FlowKind::ConditionTest => format!("condition test ({detail})"),
        FlowKind::SinkArg => format!("sink argument of {detail}"),
    }
}

fn rule_id(hit: &SinkHit) -> String {
    format!("{}/{}", hit.category.label(), hit.mode.label())
}

fn result_json(hit: &SinkHit) -> J {
    let message = match hit.sources.first() {
        Some(s) => format!(
            "tainted property `{}` reaches {}.{} ({})",
            s.property, hit.sink_module, hit.sink_name, hit.arg_path
        ),
        None => format!(
            "pollutable-argument condition on {}.{}: {}",
            hit.sink_module, hit.sink_name, hit.arg_path
        ),
    };
    let thread_locations: Vec<J> = hit
        .flow
        .iter()
        .map(|s| location_json(&s.loc, Some(step_text(s.kind, &s.detail))))
        .collect();
    json!({
        "ruleId": rule_id(hit),
        "level": "warning",
        "message": { "text": message },
        "locations": [ location_json(&hit.sink_loc, None) ],
        "codeFlows": [
            { "threadFlows": [ { "locations": thread_locations } ] }
        ]
    })
}

/// Export a report as a SARIF 2.1.0 subset document. Hits are emitted in
/// FlowKey order (they are stored that way), so output is deterministic.
pub fn export_sarif(report: &PackageReport) -> J {
    let mut rule_ids: Vec<String> = report.hits.iter().map(rule_id).collect();
    rule_ids.sort();
    rule_ids.dedup();
    let rules: Vec<J> = rule_ids.iter().map(|id| json!({ "id": id })).collect();
    let results: Vec<J> = report.hits.iter().map(result_json).collect();
    json!({
        "$schema": "https://json.schemastore.org/sarif-2.1.0.json",
        "version": "2.1.0",
        "runs": [
            {
                "tool": {
                    "driver": {
                        "name": "gadgetforge",
                        "version": env!("CARGO_PKG_VERSION"),
                        "rules": rules
                    }
                },
                "results": results
            }
        ]
    })
}

pub fn to_sarif_string(report: &PackageReport) -> String {
    let mut s = serde_json::to_string_pretty(&export_sarif(report)).expect("sarif serializes");
    s.push('\n');
    s
}

/// Structural validator for the subset this tool emits.
pub fn validate_sarif(doc: &J) -> Result<(), String> {
    if doc.get("version").and_then(J::as_str) != Some("2.1.0") {
        return Err("version must be \"2.1.0\"".to_string());
    }
    let runs = doc
        .get("runs")
        .and_then(J::as_array)
        .ok_or("runs must be an array")?;
    if runs.is_empty() {
        return Err("runs must be nonempty".to_string());
    }
    for run in runs {
        run.pointer("/tool/driver/name")
            .and_then(J::as_str)
            .ok_or("runs[].tool.driver.name missing")?;
        let results = run
            .get("results")
            .and_then(J::as_array)
            .ok_or("runs[].results must be an array")?;
        for r in results {
            r.get("ruleId").and_then(J::as_str).ok_or("result.ruleId missing")?;
            r.pointer("/message/text")
                .and_then(J::as_str)
                .ok_or("result.message.text missing")?;
            let locations = r
                .get("locations")
                .and_then(J::as_array)
                .ok_or("result.locations missing")?;
            if locations.is_empty() {
                return Err("result.locations must be nonempty".to_string());
            }
            for loc in locations {
                loc.pointer("/physicalLocation/artifactLocation/uri")
                    .and_then(J::as_str)
                    .ok_or("location uri missing")?;
            }
            if let Some(flows) = r.get("codeFlows").and_then(J::as_array) {
                for flow in flows {
                    let tfs = flow
                        .get("threadFlows")
                        .and_then(J::as_array)
                        .ok_or("codeFlow.threadFlows missing")?;
                    for tf in tfs {
                        let locs = tf
                            .get("locations")
                            .and_then(J::as_array)
                            .ok_or("threadFlow.locations missing")?;
                        for l in locs {
                            l.pointer("/location/physicalLocation/artifactLocation/uri")
                                .and_then(J::as_str)
                                .ok_or("threadFlow location uri missing")?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
