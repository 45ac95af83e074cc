//! The Failure Emulator Mechanism: a serial interceptor between the OBC and
//! the payload.
//!
//! Toward the OBC the FEM behaves as the slave, toward the payload as the
//! master. Every message crosses it once: it enters on its ingress leg and
//! leaves on the opposite leg one tick later. In `Idle` it forwards without
//! looking. In `Busy` it counts master-originated transfers ("writes") and
//! slave responses ("reads") and fires armed faults when a counter reaches a
//! fault's ordinal.
//!
//! At most one fault is applied per message, first armed fault in faultload
//! order. Other faults that matched the same message are deferred and fire
//! on the next message of the kind they count.

use std::fmt;

use thiserror::Error;

use crate::bus::{Message, MessageKind, Segment, Tick};
use crate::faultload::{FaultNature, FaultSpec, Faultload, ValueForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BusySub {
    Normal,
    Flip,
    Delay,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FemMode {
    Idle,
    Busy(BusySub),
}

impl FemMode {
    pub fn is_busy(self) -> bool {
        matches!(self, FemMode::Busy(_))
    }
}

impl fmt::Display for FemMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FemMode::Idle => f.write_str("Idle"),
            FemMode::Busy(sub) => write!(f, "Busy/{sub:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FemCounters {
    /// Master-originated transfers (writes and read requests).
    pub writes: u64,
    /// Slave responses.
    pub reads: u64,
}

impl FemCounters {
    fn count(&mut self, kind: MessageKind) {
        if kind.is_master_originated() {
            self.writes += 1;
        } else {
            self.reads += 1;
        }
    }

    /// Value of the counter a trigger of `kind` watches.
    pub fn for_kind(&self, kind: crate::faultload::TriggerKind) -> u64 {
        match kind {
            crate::faultload::TriggerKind::WriteOrdinal => self.writes,
            crate::faultload::TriggerKind::ReadOrdinal => self.reads,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arming {
    Armed,
    /// Matched while another fault fired; fires on the next eligible message.
    Deferred,
    Consumed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArmedFault {
    pub spec: FaultSpec,
    pub state: Arming,
}

impl ArmedFault {
    pub fn new(spec: FaultSpec) -> Self {
        ArmedFault {
            spec,
            state: Arming::Armed,
        }
    }

    pub fn is_consumed(&self) -> bool {
        self.state == Arming::Consumed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FaultApplicationError {
    #[error("byte index {byte_index} out of bounds for payload of {len} bytes")]
    ByteIndexOutOfBounds { byte_index: usize, len: usize },
    #[error("bit index {0} out of range (0..=7)")]
    BitIndexOutOfRange(u8),
    #[error("length mismatch: replacement has {replacement} bytes, payload has {payload}")]
    LengthMismatch { payload: usize, replacement: usize },
    #[error("a message is already held; the serial channel holds one at a time")]
    AlreadyHolding,
}

/// Message parked by a time fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Held {
    pub fault_id: String,
    pub message: Message,
    pub release_tick: Tick,
}

/// What the FEM did during one step, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FemNote {
    Counted(FemCounters),
    Forwarded(Message),
    Transformed {
        fault_id: String,
        leg: Segment,
        sub: BusySub,
        original: Message,
        result: Message,
    },
    Held {
        fault_id: String,
        leg: Segment,
        message: Message,
        release_tick: Tick,
    },
    Released {
        fault_id: String,
        message: Message,
    },
    Dropped {
        fault_id: String,
        leg: Segment,
        message: Message,
    },
    ApplicationError {
        fault_id: String,
        error: FaultApplicationError,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FemStep {
    pub output: Option<Message>,
    pub notes: Vec<FemNote>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fem {
    mode: FemMode,
    counters: FemCounters,
    faults: Vec<ArmedFault>,
    held: Option<Held>,
}

/// Whether `fault` fires on `msg`, given counters already updated for it.
///
/// Every message crossing the FEM occupies both legs, so any leg matches;
/// the ordinal must equal the just-updated counter of the kind the trigger
/// watches, and the fault must still be armed.
pub fn match_trigger(fault: &ArmedFault, counters: &FemCounters, msg: &Message) -> bool {
    let spec = &fault.spec;
    let on_crossing = spec.location == msg.segment || spec.location == msg.segment.opposite();
    fault.state == Arming::Armed
        && on_crossing
        && spec.trigger.kind.counts(msg.kind)
        && counters.for_kind(spec.trigger.kind) == u64::from(spec.trigger.ordinal)
}

/// Flips bit `bit_index` (0 = least significant) of `payload[byte_index]`.
pub fn apply_bitflip(
    payload: &[u8],
    byte_index: usize,
    bit_index: u8,
) -> Result<Vec<u8>, FaultApplicationError> {
    if bit_index > 7 {
        return Err(FaultApplicationError::BitIndexOutOfRange(bit_index));
    }
    if byte_index >= payload.len() {
        return Err(FaultApplicationError::ByteIndexOutOfBounds {
            byte_index,
            len: payload.len(),
        });
    }
    let mut out = payload.to_vec();
    out[byte_index] ^= 1 << bit_index;
    Ok(out)
}

/// Swaps the payload for `replacement`; framing (length) must be preserved.
pub fn apply_replace(payload: &[u8], replacement: &[u8]) -> Result<Vec<u8>, FaultApplicationError> {
    if payload.len() != replacement.len() {
        return Err(FaultApplicationError::LengthMismatch {
            payload: payload.len(),
            replacement: replacement.len(),
        });
    }
    Ok(replacement.to_vec())
}

/// Parks `msg` until `now + delay_ticks`.
pub fn apply_delay(
    fem: &mut Fem,
    fault_id: &str,
    msg: Message,
    delay_ticks: u64,
    now: Tick,
) -> Result<Tick, FaultApplicationError> {
    if fem.held.is_some() {
        return Err(FaultApplicationError::AlreadyHolding);
    }
    let release_tick = now.after(delay_ticks);
    fem.held = Some(Held {
        fault_id: fault_id.to_string(),
        message: msg,
        release_tick,
    });
    Ok(release_tick)
}

/// Consumes whatever is in `slot`. Returns the dropped message, or `None`
/// when the slot was already empty.
pub fn apply_drop(slot: &mut Option<Message>) -> Option<Message> {
    slot.take()
}

impl Fem {
    /// A FEM loaded with `faultload`, starting in `Idle` or `Busy/Normal`.
    pub fn new(busy: bool, faultload: &Faultload) -> Self {
        Fem {
            mode: if busy {
                FemMode::Busy(BusySub::Normal)
            } else {
                FemMode::Idle
            },
            counters: FemCounters::default(),
            faults: faultload
                .specs
                .iter()
                .cloned()
                .map(ArmedFault::new)
                .collect(),
            held: None,
        }
    }

    pub fn mode(&self) -> FemMode {
        self.mode
    }

    pub fn counters(&self) -> FemCounters {
        self.counters
    }

    pub fn faults(&self) -> &[ArmedFault] {
        &self.faults
    }

    pub fn held(&self) -> Option<&Held> {
        self.held.as_ref()
    }

    /// Handles one inbound message, or with `None` releases a held message
    /// whose release tick has come.
    pub fn step(&mut self, inbound: Option<Message>, now: Tick) -> FemStep {
        match inbound {
            None => self.release(now),
            Some(msg) => self.intercept(msg, now),
        }
    }

    fn release(&mut self, now: Tick) -> FemStep {
        let mut step = FemStep::default();
        if self.held.as_ref().is_some_and(|h| now >= h.release_tick) {
            let held = self.held.take().expect("checked above");
            let message = egress(held.message, now);
            step.notes.push(FemNote::Released {
                fault_id: held.fault_id,
                message: message.clone(),
            });
            step.output = Some(message);
            if self.mode.is_busy() {
                self.mode = FemMode::Busy(BusySub::Normal);
            }
        }
        step
    }

    fn intercept(&mut self, msg: Message, now: Tick) -> FemStep {
        let mut step = FemStep::default();
        if self.mode == FemMode::Idle {
            let out = egress(msg, now);
            step.notes.push(FemNote::Forwarded(out.clone()));
            step.output = Some(out);
            return step;
        }

        self.counters.count(msg.kind);
        step.notes.push(FemNote::Counted(self.counters));

        let mut firing = None;
        for (i, fault) in self.faults.iter_mut().enumerate() {
            let eligible = match fault.state {
                Arming::Armed => match_trigger(fault, &self.counters, &msg),
                Arming::Deferred => fault.spec.trigger.kind.counts(msg.kind),
                Arming::Consumed => false,
            };
            if !eligible {
                continue;
            }
            if firing.is_none() {
                firing = Some(i);
            } else {
                fault.state = Arming::Deferred;
            }
        }

        let Some(idx) = firing else {
            self.mode = FemMode::Busy(BusySub::Normal);
            let out = egress(msg, now);
            step.notes.push(FemNote::Forwarded(out.clone()));
            step.output = Some(out);
            return step;
        };

        self.faults[idx].state = Arming::Consumed;
        let spec = self.faults[idx].spec.clone();
        let fault_id = spec.id.clone();
        let leg = spec.location;

        let transformed = |sub: BusySub, result: Result<Vec<u8>, FaultApplicationError>| {
            result.map(|payload| (sub, payload))
        };
        let outcome = match &spec.nature {
            FaultNature::Value(ValueForm::Flip {
                byte_index,
                bit_index,
            }) => transformed(
                BusySub::Flip,
                apply_bitflip(&msg.payload, *byte_index, *bit_index),
            ),
            FaultNature::Value(ValueForm::Replace { bytes }) => {
                transformed(BusySub::Out, apply_replace(&msg.payload, bytes))
            }
            FaultNature::Time { delay_ticks } => {
                match apply_delay(self, &fault_id, msg.clone(), *delay_ticks, now) {
                    Ok(release_tick) => {
                        self.mode = FemMode::Busy(BusySub::Delay);
                        step.notes.push(FemNote::Held {
                            fault_id,
                            leg,
                            message: msg,
                            release_tick,
                        });
                        // A zero delay is due in the same step.
                        let released = self.release(now);
                        step.notes.extend(released.notes);
                        step.output = released.output;
                        return step;
                    }
                    Err(e) => Err(e),
                }
            }
            FaultNature::Provision => {
                let mut slot = Some(msg);
                let dropped = apply_drop(&mut slot).expect("slot holds the inbound message");
                self.mode = FemMode::Busy(BusySub::Out);
                step.notes.push(FemNote::Dropped {
                    fault_id,
                    leg,
                    message: dropped,
                });
                return step;
            }
        };

        match outcome {
            Ok((sub, payload)) => {
                self.mode = FemMode::Busy(sub);
                let mut result = egress(msg.clone(), now);
                result.payload = payload;
                step.notes.push(FemNote::Transformed {
                    fault_id,
                    leg,
                    sub,
                    original: msg,
                    result: result.clone(),
                });
                step.output = Some(result);
            }
            Err(error) => {
                self.mode = FemMode::Busy(BusySub::Normal);
                step.notes
                    .push(FemNote::ApplicationError { fault_id, error });
                let out = egress(msg, now);
                step.notes.push(FemNote::Forwarded(out.clone()));
                step.output = Some(out);
            }
        }
        step
    }
}

/// Re-stamps a message for its outbound leg.
fn egress(mut msg: Message, now: Tick) -> Message {
    msg.segment = Segment::ingress(msg.direction).opposite();
    msg.tick = now;
    msg
}
