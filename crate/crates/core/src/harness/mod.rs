//! Scenario runner, trace recording, oracles, trace diffing and campaigns.

mod campaign;
mod diff;
mod oracle;
mod runner;
mod scenario;
mod trace;

pub use campaign::{
    run_campaign, CampaignConfig, CampaignError, CampaignReport, CampaignRun, ReportEntry,
    SweepConfig, Totals,
};
pub use diff::{diff_traces, masked_jsonl, Difference, Mask};
pub use oracle::{evaluate_oracles, recount_counters, Dispositions, Outcome, Verdict};
pub use runner::{execute, run_scenario, RunOutcome};
pub use scenario::{
    builtin, ConfigError, FemStart, Link, Scenario, ScenarioConfig, ScenarioError, BUILTIN_NAMES,
    MAX_READ_LEN,
};
pub use trace::{
    CounterRecord, Detail, Endpoint, EventKind, MsgRecord, ObservationRecord, RunStatus, Source,
    Trace, TraceError, TraceEvent, TRACE_FORMAT, TRACE_VERSION,
};

use std::io;
use std::path::{Path, PathBuf};

/// Writes `<name>.scenario.toml`, `<name>.trace.jsonl` and
/// `<name>.verdict.json` for a built-in scenario into `dir`.
///
/// Returns `Ok(None)` if `name` is not a built-in.
pub fn write_golden(name: &str, dir: &Path) -> io::Result<Option<Vec<PathBuf>>> {
    let Some(sc) = builtin(name) else {
        return Ok(None);
    };
    let (trace, verdict) = run_scenario(&sc);
    std::fs::create_dir_all(dir)?;
    let files = [
        (format!("{name}.scenario.toml"), sc.to_toml()),
        (format!("{name}.trace.jsonl"), trace.to_jsonl()),
        (
            format!("{name}.verdict.json"),
            serde_json::to_string_pretty(&verdict).expect("verdict serializes") + "\n",
        ),
    ];
    let mut written = Vec::new();
    for (file, body) in files {
        let path = dir.join(file);
        std::fs::write(&path, body)?;
        written.push(path);
    }
    Ok(Some(written))
}
