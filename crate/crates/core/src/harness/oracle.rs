//! Robustness oracles: classify a finished run from its trace alone.
//!
//! Outcomes are checked in priority order. A fault that could not be
//! applied makes the run a [`Outcome::ScriptError`]; a run that ran out of
//! ticks or whose OBC gave up is [`Outcome::RunAborted`]; a corrupted
//! response that the OBC accepted is [`Outcome::SutSilentCorruption`]; any
//! detecting observation is [`Outcome::SutDetected`]; otherwise the run is
//! [`Outcome::FaultFreeNominal`], including runs whose fault the SUT simply
//! tolerated.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bus::MessageKind;
use crate::devices::ObservationKind;
use crate::fem::FemCounters;

use super::scenario::Scenario;
use super::trace::{EventKind, RunStatus, Source, Trace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    FaultFreeNominal,
    SutDetected,
    SutSilentCorruption,
    RunAborted,
    ScriptError,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::FaultFreeNominal,
        Outcome::SutDetected,
        Outcome::SutSilentCorruption,
        Outcome::RunAborted,
        Outcome::ScriptError,
    ];
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Verdict {
    pub scenario: String,
    pub fault_id: Option<String>,
    pub outcome: Outcome,
    /// First detecting observation, for `SutDetected`.
    pub detection: Option<ObservationKind>,
    /// Sequence numbers of the trace events supporting the outcome.
    pub evidence: Vec<u64>,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.scenario, self.outcome)?;
        if let Some(d) = self.detection {
            write!(f, "({d})")?;
        }
        if let Some(id) = &self.fault_id {
            write!(f, " fault={id}")?;
        }
        write!(f, " evidence={:?}", self.evidence)
    }
}

fn is_aborted_transition(e: &TraceEvent) -> bool {
    e.source == Source::Obc
        && e.kind == EventKind::DeviceTransition
        && e.detail
            .state
            .as_deref()
            .is_some_and(|s| s.ends_with("->Aborted"))
}

/// Classifies a run. `sc` supplies the scenario name.
pub fn evaluate_oracles(trace: &Trace, sc: &Scenario) -> Verdict {
    let fired: Vec<&TraceEvent> = trace
        .iter()
        .filter(|e| e.kind.is_fault_disposition())
        .collect();
    let verdict = |outcome, fault_id: Option<String>, detection, evidence| Verdict {
        scenario: sc.name.clone(),
        fault_id,
        outcome,
        detection,
        evidence,
    };
    let first_fault = fired.first().and_then(|e| e.detail.fault.clone());

    let errors: Vec<&TraceEvent> = trace
        .iter()
        .filter(|e| e.kind == EventKind::FaultApplicationError)
        .collect();
    if let Some(first) = errors.first() {
        return verdict(
            Outcome::ScriptError,
            first.detail.fault.clone(),
            None,
            errors.iter().map(|e| e.seq).collect(),
        );
    }

    let exhausted = trace.iter().find(|e| {
        e.kind == EventKind::RunEnd && e.detail.status == Some(RunStatus::BudgetExhausted)
    });
    if let Some(e) = exhausted.or_else(|| trace.iter().find(|e| is_aborted_transition(e))) {
        return verdict(Outcome::RunAborted, first_fault, None, vec![e.seq]);
    }

    for t in fired.iter().filter(|e| e.kind == EventKind::MsgTransformed) {
        let Some(msg) = &t.detail.msg else { continue };
        if msg.kind != MessageKind::ReadResponse || t.detail.original.as_ref() == Some(&msg.data) {
            continue;
        }
        let accepted = trace.iter().find(|e| {
            e.seq > t.seq
                && e.detail.observation.as_ref().is_some_and(|o| {
                    o.kind == ObservationKind::ResponseOk
                        && o.txn == Some(msg.txn)
                        && o.data == msg.data
                })
        });
        if let Some(obs) = accepted {
            return verdict(
                Outcome::SutSilentCorruption,
                t.detail.fault.clone(),
                None,
                vec![t.seq, obs.seq],
            );
        }
    }

    let detection = trace.iter().find(|e| {
        e.detail
            .observation
            .as_ref()
            .is_some_and(|o| o.kind.is_detection())
    });
    if let Some(d) = detection {
        let mut evidence: Vec<u64> = fired.iter().map(|e| e.seq).collect();
        evidence.push(d.seq);
        let kind = d.detail.observation.as_ref().map(|o| o.kind);
        return verdict(Outcome::SutDetected, first_fault, kind, evidence);
    }

    verdict(
        Outcome::FaultFreeNominal,
        first_fault,
        None,
        fired.iter().map(|e| e.seq).collect(),
    )
}

/// Recounts FEM counters from the messages a busy FEM handled.
pub fn recount_counters(trace: &Trace) -> FemCounters {
    let mut c = FemCounters::default();
    for e in trace.iter() {
        let handled = matches!(
            e.kind,
            EventKind::MsgForwarded
                | EventKind::MsgTransformed
                | EventKind::MsgDropped
                | EventKind::MsgHeld
        );
        let Some(msg) = e.detail.msg.as_ref().filter(|_| handled) else {
            continue;
        };
        if msg.kind.is_master_originated() {
            c.writes += 1;
        } else {
            c.reads += 1;
        }
    }
    c
}

/// Per-disposition tally of messages that crossed the FEM.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Dispositions {
    pub forwarded: u64,
    pub transformed: u64,
    pub dropped: u64,
    pub held: u64,
    pub released: u64,
}

impl Dispositions {
    pub fn of(trace: &Trace) -> Self {
        let mut d = Dispositions::default();
        for e in trace.iter() {
            match e.kind {
                EventKind::MsgForwarded => d.forwarded += 1,
                EventKind::MsgTransformed => d.transformed += 1,
                EventKind::MsgDropped => d.dropped += 1,
                EventKind::MsgHeld => d.held += 1,
                EventKind::MsgReleased => d.released += 1,
                _ => {}
            }
        }
        d
    }

    /// Messages that entered the FEM, held ones counted once.
    pub fn entered(&self) -> u64 {
        self.forwarded + self.transformed + self.dropped + self.held
    }
}
