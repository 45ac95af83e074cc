use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bus::{default_read, Message, MessageKind, Tick, IDLE_BYTE};

use super::{CommandSet, ObcCommand};

/// Inclusive byte interval a sample must fall in to be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[u8; 2]", from = "[u8; 2]")]
pub struct ByteRange {
    pub lo: u8,
    pub hi: u8,
}

impl ByteRange {
    pub const SAMPLE_CODOMAIN: ByteRange = ByteRange { lo: 0x00, hi: 0x7F };

    pub fn contains(&self, byte: u8) -> bool {
        (self.lo..=self.hi).contains(&byte)
    }
}

impl Default for ByteRange {
    fn default() -> Self {
        ByteRange::SAMPLE_CODOMAIN
    }
}

impl From<ByteRange> for [u8; 2] {
    fn from(r: ByteRange) -> Self {
        [r.lo, r.hi]
    }
}

impl From<[u8; 2]> for ByteRange {
    fn from([lo, hi]: [u8; 2]) -> Self {
        ByteRange { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObcConfig {
    /// Address of the payload the OBC talks to.
    pub address: u8,
    pub commands: CommandSet,
    pub n_requests: u32,
    pub timeout_ticks: u64,
    pub expected_range: ByteRange,
    /// Re-requests after a timeout before giving up on a sample.
    pub retries: u32,
    /// Bytes clocked in per data request.
    pub read_len: usize,
    /// Ticks the OBC waits after a write before its next transfer.
    pub write_settle_ticks: u64,
}

impl Default for ObcConfig {
    fn default() -> Self {
        ObcConfig {
            address: 0x42,
            commands: CommandSet::default(),
            n_requests: 4,
            timeout_ticks: 10,
            expected_range: ByteRange::default(),
            retries: 0,
            read_len: 1,
            write_settle_ticks: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObcPhase {
    SendStart,
    Requesting(u32),
    SendEnd,
    Done,
    Aborted,
}

impl ObcPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, ObcPhase::Done | ObcPhase::Aborted)
    }
}

impl fmt::Display for ObcPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObcPhase::SendStart => f.write_str("SendStart"),
            ObcPhase::Requesting(n) => write!(f, "Requesting({n})"),
            ObcPhase::SendEnd => f.write_str("SendEnd"),
            ObcPhase::Done => f.write_str("Done"),
            ObcPhase::Aborted => f.write_str("Aborted"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservationKind {
    ResponseOk,
    TimeoutDetected,
    OutOfRangeDetected,
    AllFF,
    ProtocolViolation,
}

impl ObservationKind {
    /// Whether this observation is the SUT noticing something wrong.
    pub fn is_detection(self) -> bool {
        matches!(
            self,
            ObservationKind::TimeoutDetected
                | ObservationKind::OutOfRangeDetected
                | ObservationKind::AllFF
        )
    }
}

impl fmt::Display for ObservationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObcObservation {
    pub at: Tick,
    pub kind: ObservationKind,
    /// 1-based index of the data request this belongs to, if any.
    pub request: Option<u32>,
    pub transaction: Option<u32>,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingRead {
    transaction: u32,
    request: u32,
    sent_at: Tick,
    attempt: u32,
}

/// Everything one OBC step produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObcStep {
    pub emitted: Option<Message>,
    pub observations: Vec<ObcObservation>,
    pub transitions: Vec<(ObcPhase, ObcPhase)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obc {
    config: ObcConfig,
    phase: ObcPhase,
    pending: Option<PendingRead>,
    ready_at: Tick,
    next_transaction: u32,
    log: Vec<ObcObservation>,
}

impl Obc {
    pub fn new(config: ObcConfig) -> Self {
        Obc {
            config,
            phase: ObcPhase::SendStart,
            pending: None,
            ready_at: Tick::ZERO,
            next_transaction: 1,
            log: Vec::new(),
        }
    }

    pub fn phase(&self) -> ObcPhase {
        self.phase
    }

    pub fn log(&self) -> &[ObcObservation] {
        &self.log
    }

    pub fn config(&self) -> &ObcConfig {
        &self.config
    }

    /// True while a data request is outstanding.
    pub fn is_awaiting(&self) -> bool {
        self.pending.is_some()
    }

    /// Advances the master by one step.
    ///
    /// Order within a step: deadline check, then the inbound response (if
    /// any), then at most one emission. A response that does not belong to
    /// the outstanding read is late and logged as `TimeoutDetected`.
    pub fn step(&mut self, inbound: Option<&Message>, now: Tick) -> ObcStep {
        let mut out = ObcStep::default();
        if self.phase == ObcPhase::Aborted {
            return out;
        }

        self.check_deadline(now, &mut out);

        if let Some(msg) = inbound {
            if msg.kind != MessageKind::ReadResponse {
                self.record(
                    &mut out,
                    now,
                    ObservationKind::ProtocolViolation,
                    None,
                    Some(msg.transaction),
                    msg.payload.clone(),
                );
                self.pending = None;
                self.transition(&mut out, ObcPhase::Aborted);
                return out;
            }
            match self.pending {
                Some(p) if p.transaction == msg.transaction => {
                    let kind = self.classify(&msg.payload);
                    self.record(
                        &mut out,
                        now,
                        kind,
                        Some(p.request),
                        Some(p.transaction),
                        msg.payload.clone(),
                    );
                    self.complete_request();
                    self.transition_after_request(&mut out);
                }
                _ => {
                    let request = self.request_of_transaction(msg.transaction);
                    self.record(
                        &mut out,
                        now,
                        ObservationKind::TimeoutDetected,
                        request,
                        Some(msg.transaction),
                        msg.payload.clone(),
                    );
                }
            }
        }

        if out.emitted.is_none() {
            self.emit(now, &mut out);
        }
        out
    }

    fn classify(&self, payload: &[u8]) -> ObservationKind {
        if !payload.is_empty() && payload.iter().all(|&b| b == IDLE_BYTE) {
            ObservationKind::AllFF
        } else if payload.len() == self.config.read_len
            && payload
                .iter()
                .all(|&b| self.config.expected_range.contains(b))
        {
            ObservationKind::ResponseOk
        } else {
            ObservationKind::OutOfRangeDetected
        }
    }

    fn check_deadline(&mut self, now: Tick, out: &mut ObcStep) {
        let Some(p) = self.pending else { return };
        if now.value() <= p.sent_at.value().saturating_add(self.config.timeout_ticks) {
            return;
        }
        let idle = default_read(self.config.read_len.max(1)).expect("read_len >= 1");
        if p.attempt < self.config.retries {
            self.record(
                out,
                now,
                ObservationKind::TimeoutDetected,
                Some(p.request),
                Some(p.transaction),
                idle,
            );
            let msg = self.read_request(now);
            self.pending = Some(PendingRead {
                transaction: msg.transaction,
                request: p.request,
                sent_at: now,
                attempt: p.attempt + 1,
            });
            out.emitted = Some(msg);
        } else {
            self.record(
                out,
                now,
                ObservationKind::AllFF,
                Some(p.request),
                Some(p.transaction),
                idle,
            );
            self.complete_request();
            self.transition_after_request(out);
        }
    }

    fn complete_request(&mut self) {
        self.pending = None;
    }

    fn transition_after_request(&mut self, out: &mut ObcStep) {
        if let ObcPhase::Requesting(remaining) = self.phase {
            let next = if remaining <= 1 {
                ObcPhase::SendEnd
            } else {
                ObcPhase::Requesting(remaining - 1)
            };
            self.transition(out, next);
        }
    }

    fn request_of_transaction(&self, transaction: u32) -> Option<u32> {
        self.log
            .iter()
            .rev()
            .find(|o| o.transaction == Some(transaction))
            .and_then(|o| o.request)
    }

    fn emit(&mut self, now: Tick, out: &mut ObcStep) {
        if self.pending.is_some() || now < self.ready_at {
            return;
        }
        match self.phase {
            ObcPhase::SendStart => {
                out.emitted = Some(self.write(now, ObcCommand::StartAnalogRead));
                let next = if self.config.n_requests == 0 {
                    ObcPhase::SendEnd
                } else {
                    ObcPhase::Requesting(self.config.n_requests)
                };
                self.transition(out, next);
                self.ready_at = now.after(self.config.write_settle_ticks);
            }
            ObcPhase::Requesting(remaining) => {
                let msg = self.read_request(now);
                self.pending = Some(PendingRead {
                    transaction: msg.transaction,
                    request: self.config.n_requests - remaining + 1,
                    sent_at: now,
                    attempt: 0,
                });
                out.emitted = Some(msg);
            }
            ObcPhase::SendEnd => {
                out.emitted = Some(self.write(now, ObcCommand::EndTransmission));
                self.transition(out, ObcPhase::Done);
            }
            ObcPhase::Done | ObcPhase::Aborted => {}
        }
    }

    fn take_transaction(&mut self) -> u32 {
        let t = self.next_transaction;
        self.next_transaction += 1;
        t
    }

    fn write(&mut self, now: Tick, command: ObcCommand) -> Message {
        let txn = self.take_transaction();
        Message::write(
            now,
            self.config.address,
            txn,
            vec![self.config.commands.encode(command)],
        )
    }

    fn read_request(&mut self, now: Tick) -> Message {
        let txn = self.take_transaction();
        Message::read_request(
            now,
            self.config.address,
            txn,
            vec![self.config.commands.encode(ObcCommand::RequestData)],
            self.config.read_len,
        )
    }

    fn transition(&mut self, out: &mut ObcStep, next: ObcPhase) {
        if next != self.phase {
            out.transitions.push((self.phase, next));
            self.phase = next;
        }
    }

    fn record(
        &mut self,
        out: &mut ObcStep,
        at: Tick,
        kind: ObservationKind,
        request: Option<u32>,
        transaction: Option<u32>,
        payload: Vec<u8>,
    ) {
        let obs = ObcObservation {
            at,
            kind,
            request,
            transaction,
            payload,
        };
        self.log.push(obs.clone());
        out.observations.push(obs);
    }
}
