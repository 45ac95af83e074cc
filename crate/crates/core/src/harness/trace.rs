//! Run traces and their line-delimited file format.
//!
//! A trace file is JSON Lines. The first line is a header
//! `{"format":"femsim-trace","version":1,"scenario":"<name>"}`; every other
//! line is one [`TraceEvent`] with fields in the order `seq`, `tick`,
//! `source`, `kind`, `detail`. Absent detail fields are omitted. Payloads
//! are lowercase hex. Readers must reject unknown fields and a different
//! major `version`.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bus::{Direction, Message, MessageKind, Segment, Tick};
use crate::devices::{ObcObservation, ObservationKind};
use crate::fem::FemCounters;

pub const TRACE_FORMAT: &str = "femsim-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "OBC")]
    Obc,
    #[serde(rename = "FEM")]
    Fem,
    #[serde(rename = "SLP")]
    Slp,
    Bus,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Obc => "OBC",
            Source::Fem => "FEM",
            Source::Slp => "SLP",
            Source::Bus => "Bus",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Endpoint {
    #[serde(rename = "OBC")]
    Obc,
    #[serde(rename = "FEM")]
    Fem,
    #[serde(rename = "SLP")]
    Slp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    MsgForwarded,
    MsgTransformed,
    MsgHeld,
    MsgReleased,
    MsgDropped,
    CounterUpdate,
    DeviceTransition,
    Observation,
    FaultApplicationError,
    RunEnd,
}

impl EventKind {
    /// Events that record a fault firing.
    pub fn is_fault_disposition(self) -> bool {
        matches!(
            self,
            EventKind::MsgTransformed | EventKind::MsgHeld | EventKind::MsgDropped
        )
    }
}

/// Message as recorded in a trace. Tick and segment are carried by the
/// event, not the record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsgRecord {
    pub dir: Direction,
    pub kind: MessageKind,
    pub addr: u8,
    pub txn: u32,
    pub len: usize,
    pub data: String,
}

impl From<&Message> for MsgRecord {
    fn from(m: &Message) -> Self {
        MsgRecord {
            dir: m.direction,
            kind: m.kind,
            addr: m.address,
            txn: m.transaction,
            len: m.requested_len,
            data: hex::encode(&m.payload),
        }
    }
}

impl MsgRecord {
    pub fn bytes(&self) -> Vec<u8> {
        hex::decode(&self.data).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterRecord {
    pub writes: u64,
    pub reads: u64,
}

impl From<FemCounters> for CounterRecord {
    fn from(c: FemCounters) -> Self {
        CounterRecord {
            writes: c.writes,
            reads: c.reads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub kind: ObservationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub txn: Option<u32>,
    pub data: String,
}

impl From<&ObcObservation> for ObservationRecord {
    fn from(o: &ObcObservation) -> Self {
        ObservationRecord {
            kind: o.kind,
            request: o.request,
            txn: o.transaction,
            data: hex::encode(&o.payload),
        }
    }
}

impl ObservationRecord {
    pub fn bytes(&self) -> Vec<u8> {
        hex::decode(&self.data).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// The OBC finished and the bus went quiet.
    Completed,
    /// The OBC finished but messages were still in flight or held when the
    /// tick budget ran out.
    CompletedWithLeftovers,
    /// The tick budget ran out before the OBC finished.
    BudgetExhausted,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detail {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<Endpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leg: Option<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg: Option<MsgRecord>,
    /// Payload before a transform, hex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub release_tick: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counters: Option<CounterRecord>,
    /// `From->To` for device transitions, FEM sub-mode for fault events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<RunStatus>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub seq: u64,
    pub tick: Tick,
    pub source: Source,
    pub kind: EventKind,
    pub detail: Detail,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let json = serde_json::to_string(self).map_err(|_| fmt::Error)?;
        f.write_str(&json)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    scenario: String,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is empty (missing header line)")]
    Empty,
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported trace header: format `{format}` version {version}")]
    Header { format: String, version: u32 },
    #[error("line {line}: sequence number {found}, expected {expected}")]
    Sequence {
        line: usize,
        expected: u64,
        found: u64,
    },
    #[error("line {line}: tick {tick} goes backward")]
    TickOrder { line: usize, tick: Tick },
}

/// Ordered log of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub scenario: String,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(scenario: impl Into<String>) -> Self {
        Trace {
            scenario: scenario.into(),
            events: Vec::new(),
        }
    }

    /// Appends an event, assigning the next sequence number.
    pub fn push(&mut self, tick: Tick, source: Source, kind: EventKind, detail: Detail) -> u64 {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            seq,
            tick,
            source,
            kind,
            detail,
        });
        seq
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            scenario: self.scenario.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, TraceError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: Header =
            serde_json::from_str(first).map_err(|source| TraceError::Json { line: 1, source })?;
        if header.format != TRACE_FORMAT || header.version != TRACE_VERSION {
            return Err(TraceError::Header {
                format: header.format,
                version: header.version,
            });
        }
        let mut trace = Trace::new(header.scenario);
        let mut last_tick = Tick::ZERO;
        for (idx, line) in lines {
            let ev: TraceEvent = serde_json::from_str(line).map_err(|source| TraceError::Json {
                line: idx + 1,
                source,
            })?;
            let expected = trace.events.len() as u64;
            if ev.seq != expected {
                return Err(TraceError::Sequence {
                    line: idx + 1,
                    expected,
                    found: ev.seq,
                });
            }
            if ev.tick < last_tick {
                return Err(TraceError::TickOrder {
                    line: idx + 1,
                    tick: ev.tick,
                });
            }
            last_tick = ev.tick;
            trace.events.push(ev);
        }
        Ok(trace)
    }

    /// SHA-256 of the serialized trace, hex.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        let mut t = Trace::new("demo");
        let msg = Message::write(Tick(0), 0x42, 1, vec![0x01]);
        t.push(
            Tick(1),
            Source::Bus,
            EventKind::MsgForwarded,
            Detail {
                to: Some(Endpoint::Slp),
                msg: Some((&msg).into()),
                ..Detail::default()
            },
        );
        t.push(
            Tick(1),
            Source::Fem,
            EventKind::CounterUpdate,
            Detail {
                counters: Some(CounterRecord {
                    writes: 1,
                    reads: 0,
                }),
                ..Detail::default()
            },
        );
        t
    }

    #[test]
    fn jsonl_layout_is_stable() {
        let text = sample().to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            r#"{"format":"femsim-trace","version":1,"scenario":"demo"}"#
        );
        assert_eq!(
            lines[1],
            r#"{"seq":0,"tick":1,"source":"Bus","kind":"MsgForwarded","detail":{"to":"SLP","msg":{"dir":"M2S","kind":"Write","addr":66,"txn":1,"len":0,"data":"01"}}}"#
        );
        assert_eq!(
            lines[2],
            r#"{"seq":1,"tick":1,"source":"FEM","kind":"CounterUpdate","detail":{"counters":{"writes":1,"reads":0}}}"#
        );
    }

    #[test]
    fn parse_round_trip() {
        let t = sample();
        assert_eq!(Trace::from_jsonl(&t.to_jsonl()).unwrap(), t);
    }

    #[test]
    fn corrupted_traces_are_rejected() {
        let text = sample().to_jsonl();
        assert!(matches!(Trace::from_jsonl(""), Err(TraceError::Empty)));
        assert!(matches!(
            Trace::from_jsonl(&text.replace("\"seq\":1", "\"seq\":5")),
            Err(TraceError::Sequence { .. })
        ));
        assert!(matches!(
            Trace::from_jsonl(&text.replace("\"version\":1", "\"version\":2")),
            Err(TraceError::Header { .. })
        ));
        assert!(matches!(
            Trace::from_jsonl(&text.replace("MsgForwarded", "MsgTeleported")),
            Err(TraceError::Json { line: 2, .. })
        ));
        assert!(matches!(
            Trace::from_jsonl(&text.replace("\"to\":\"SLP\"", "\"to\":\"SLP\",\"extra\":1")),
            Err(TraceError::Json { .. })
        ));
        let truncated = &text[..text.len() - 20];
        assert!(Trace::from_jsonl(truncated).is_err());
    }

    #[test]
    fn ticks_must_not_go_backward() {
        let mut t = sample();
        t.events[1].tick = Tick(0);
        assert!(matches!(
            Trace::from_jsonl(&t.to_jsonl()),
            Err(TraceError::TickOrder { .. })
        ));
    }
}
