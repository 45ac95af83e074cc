//! Campaigns: many single-fault scenarios run from one template.
//!
//! A campaign config is TOML with a `[template]` table (scenario keys, see
//! [`super::scenario`]) and a `[sweep]` table listing the dimensions:
//!
//! ```toml
//! prefix = "flip"            # fault ids become flip-001, flip-002, ...
//! [template]
//! seed = 7
//! n_requests = 4
//! [sweep]
//! where = ["slave-side"]
//! when = ["read#1"]
//! what = ["flip byte=0 bit=0..7"]
//! ```
//!
//! Each generated scenario is named after its fault id.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::Segment;
use crate::devices::ObservationKind;
use crate::faultload::{
    generate_campaign, parse_nature_sweep, parse_trigger_sweep, Sweep, SweepError,
};

use super::oracle::Outcome;
use super::runner::{execute, RunOutcome};
use super::scenario::{ConfigError, Scenario, ScenarioConfig};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "where")]
    pub segments: Vec<String>,
    #[serde(rename = "when")]
    pub triggers: Vec<String>,
    #[serde(rename = "what")]
    pub natures: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub prefix: Option<String>,
    #[serde(default)]
    pub template: ScenarioConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed campaign config: {0}")]
    Toml(String),
    #[error("template: {0}")]
    Template(#[from] ConfigError),
    #[error("the template must not carry a faultload; the sweep generates it")]
    TemplateFaultload,
    #[error("unknown segment `{0}` (expected master-side or slave-side)")]
    Segment(String),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl SweepConfig {
    pub fn to_sweep(&self) -> Result<Sweep, CampaignError> {
        let mut sweep = Sweep::default();
        for s in &self.segments {
            let seg = Segment::from_name(s).ok_or_else(|| CampaignError::Segment(s.clone()))?;
            sweep.segments.push(seg);
        }
        for t in &self.triggers {
            sweep.triggers.extend(parse_trigger_sweep(t)?);
        }
        for n in &self.natures {
            sweep.natures.extend(parse_nature_sweep(n)?);
        }
        Ok(sweep)
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, CampaignError> {
        toml::from_str(text).map_err(|e| CampaignError::Toml(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path).map_err(|e| CampaignError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        CampaignConfig::from_toml(&text)
    }

    /// Expands the sweep into validated scenarios, in product order.
    pub fn scenarios(&self) -> Result<Vec<Scenario>, CampaignError> {
        if self.template.faultload.is_some() || self.template.faultload_file.is_some() {
            return Err(CampaignError::TemplateFaultload);
        }
        let prefix = self
            .prefix
            .clone()
            .or_else(|| self.template.name.clone())
            .unwrap_or_else(|| "campaign".into());
        let sweep = self.sweep.to_sweep()?;
        let loads = generate_campaign(&prefix, &sweep)?;
        let base = self.template.clone().into_unvalidated(prefix, None)?;
        loads
            .into_iter()
            .map(|faultload| {
                let sc = Scenario {
                    name: faultload.specs[0].id.clone(),
                    faultload,
                    ..base.clone()
                };
                sc.validate()
                    .map_err(|e| CampaignError::Template(ConfigError::Invalid(e)))?;
                Ok(sc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportEntry {
    pub scenario: String,
    pub fault_id: Option<String>,
    pub outcome: Outcome,
    pub detection: Option<ObservationKind>,
    /// Whether the outcome is one the scenario accepts.
    pub as_expected: bool,
    pub evidence: Vec<u64>,
    pub trace_sha256: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Totals {
    pub scenarios: usize,
    pub nominal: usize,
    pub detected: usize,
    pub silent: usize,
    pub aborted: usize,
    pub script_error: usize,
    pub unexpected: usize,
}

impl Totals {
    pub fn count(&self, outcome: Outcome) -> usize {
        match outcome {
            Outcome::FaultFreeNominal => self.nominal,
            Outcome::SutDetected => self.detected,
            Outcome::SutSilentCorruption => self.silent,
            Outcome::RunAborted => self.aborted,
            Outcome::ScriptError => self.script_error,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignReport {
    pub entries: Vec<ReportEntry>,
    pub totals: Totals,
}

impl CampaignReport {
    pub fn from_runs(scenarios: &[Scenario], runs: &[RunOutcome]) -> Self {
        let mut totals = Totals {
            scenarios: runs.len(),
            ..Totals::default()
        };
        let entries = scenarios
            .iter()
            .zip(runs)
            .map(|(sc, run)| {
                let v = &run.verdict;
                match v.outcome {
                    Outcome::FaultFreeNominal => totals.nominal += 1,
                    Outcome::SutDetected => totals.detected += 1,
                    Outcome::SutSilentCorruption => totals.silent += 1,
                    Outcome::RunAborted => totals.aborted += 1,
                    Outcome::ScriptError => totals.script_error += 1,
                }
                let as_expected = sc.expectation().contains(&v.outcome);
                if !as_expected {
                    totals.unexpected += 1;
                }
                ReportEntry {
                    scenario: v.scenario.clone(),
                    fault_id: v.fault_id.clone(),
                    outcome: v.outcome,
                    detection: v.detection,
                    as_expected,
                    evidence: v.evidence.clone(),
                    trace_sha256: run.trace.sha256(),
                }
            })
            .collect();
        CampaignReport { entries, totals }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Human-readable table, one row per scenario plus totals.
    pub fn table(&self) -> String {
        let width = self
            .entries
            .iter()
            .map(|e| e.scenario.len())
            .max()
            .unwrap_or(0)
            .max("scenario".len());
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:<20}  {:<19}  expected",
            "scenario", "outcome", "detection"
        );
        for e in &self.entries {
            let det = e
                .detection
                .map(|d| d.to_string())
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<width$}  {:<20}  {:<19}  {}",
                e.scenario,
                e.outcome.to_string(),
                det,
                if e.as_expected { "yes" } else { "NO" }
            );
        }
        let t = &self.totals;
        let _ = writeln!(
            s,
            "total {}: nominal {}, detected {}, silent {}, aborted {}, script-error {}, unexpected {}",
            t.scenarios, t.nominal, t.detected, t.silent, t.aborted, t.script_error, t.unexpected
        );
        s
    }
}

/// Finished campaign: the report plus each run, in input order.
#[derive(Debug, Clone)]
pub struct CampaignRun {
    pub report: CampaignReport,
    pub runs: Vec<RunOutcome>,
}

/// Runs every scenario on `workers` threads. Results keep input order.
pub fn run_campaign(scenarios: &[Scenario], workers: usize) -> Result<CampaignRun, CampaignError> {
    let runs: Vec<RunOutcome> = if workers <= 1 {
        scenarios.iter().map(execute).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CampaignError::Pool(e.to_string()))?;
        pool.install(|| scenarios.par_iter().map(execute).collect())
    };
    Ok(CampaignRun {
        report: CampaignReport::from_runs(scenarios, &runs),
        runs,
    })
}
