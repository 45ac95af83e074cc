//! Transaction-level bus abstraction shared by the devices, the FEM and the
//! harness.
//!
//! A run is a sequence of whole [`Message`]s stamped with an integer
//! [`Tick`]. There is no bit-level SDA/SCL model: a read that nobody answers
//! resolves to [`IDLE_BYTE`] repeated `requested_len` times, because the data
//! line is left high by the master.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Byte clocked in by the master when no device drives SDA.
pub const IDLE_BYTE: u8 = 0xFF;

/// Largest valid 7-bit device address.
pub const MAX_ADDRESS: u8 = 0x7F;

/// Simulation time in steps. Starts at 0 and never goes backward.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn after(self, ticks: u64) -> Tick {
        Tick(self.0.saturating_add(ticks))
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the two links on either side of the interceptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Segment {
    /// OBC to FEM.
    #[serde(rename = "master-side")]
    MasterSide,
    /// FEM to SLP.
    #[serde(rename = "slave-side")]
    SlaveSide,
}

impl Segment {
    pub const ALL: [Segment; 2] = [Segment::MasterSide, Segment::SlaveSide];

    pub fn opposite(self) -> Segment {
        match self {
            Segment::MasterSide => Segment::SlaveSide,
            Segment::SlaveSide => Segment::MasterSide,
        }
    }

    /// The segment a message travelling in `direction` enters the FEM on.
    pub fn ingress(direction: Direction) -> Segment {
        match direction {
            Direction::MasterToSlave => Segment::MasterSide,
            Direction::SlaveToMaster => Segment::SlaveSide,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Segment::MasterSide => "master-side",
            Segment::SlaveSide => "slave-side",
        }
    }

    pub fn from_name(name: &str) -> Option<Segment> {
        Segment::ALL.into_iter().find(|s| s.as_str() == name)
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "M2S")]
    MasterToSlave,
    #[serde(rename = "S2M")]
    SlaveToMaster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Write,
    ReadRequest,
    ReadResponse,
}

impl MessageKind {
    /// Direction implied by the kind.
    pub fn direction(self) -> Direction {
        match self {
            MessageKind::Write | MessageKind::ReadRequest => Direction::MasterToSlave,
            MessageKind::ReadResponse => Direction::SlaveToMaster,
        }
    }

    /// True for traffic originated by the master (counted as a FEM "write").
    pub fn is_master_originated(self) -> bool {
        self.direction() == Direction::MasterToSlave
    }
}

/// One directed bus transfer.
///
/// `transaction` is assigned by the master and echoed by the responder so a
/// response can only complete the read that asked for it (an I2C read is a
/// single bus transaction). For writes `requested_len` is 0; for reads it is
/// the number of bytes clocked in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    pub tick: Tick,
    pub segment: Segment,
    pub direction: Direction,
    pub kind: MessageKind,
    pub address: u8,
    pub transaction: u32,
    pub requested_len: usize,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn write(tick: Tick, address: u8, transaction: u32, payload: Vec<u8>) -> Self {
        Message {
            tick,
            segment: Segment::MasterSide,
            direction: Direction::MasterToSlave,
            kind: MessageKind::Write,
            address,
            transaction,
            requested_len: 0,
            payload,
        }
    }

    pub fn read_request(
        tick: Tick,
        address: u8,
        transaction: u32,
        payload: Vec<u8>,
        requested_len: usize,
    ) -> Self {
        Message {
            tick,
            segment: Segment::MasterSide,
            direction: Direction::MasterToSlave,
            kind: MessageKind::ReadRequest,
            address,
            transaction,
            requested_len,
            payload,
        }
    }

    /// Response to `request`, carrying `payload`.
    pub fn read_response(tick: Tick, request: &Message, payload: Vec<u8>) -> Self {
        Message {
            tick,
            segment: Segment::SlaveSide,
            direction: Direction::SlaveToMaster,
            kind: MessageKind::ReadResponse,
            address: request.address,
            transaction: request.transaction,
            requested_len: request.requested_len,
            payload,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("direction/kind mismatch: {kind:?} cannot travel {direction:?}")]
    DirectionKindMismatch {
        kind: MessageKind,
        direction: Direction,
    },
    #[error("address out of 7-bit range: {0:#04x}")]
    AddressOutOfRange(u8),
    #[error("read request must ask for at least one byte")]
    EmptyReadRequest,
    #[error("read response length {actual} does not match requested length {requested}")]
    ResponseLengthMismatch { requested: usize, actual: usize },
    #[error("write carries a nonzero requested length {0}")]
    WriteWithRequestedLen(usize),
}

/// What a master clocks in from an undriven bus.
pub fn default_read(requested_len: usize) -> Result<Vec<u8>, BusError> {
    if requested_len == 0 {
        return Err(BusError::InvalidArgument(
            "zero-length read is undefined on this bus",
        ));
    }
    Ok(vec![IDLE_BYTE; requested_len])
}

/// Checks every [`Message`] invariant and hands the message back unchanged.
pub fn validate_message(msg: Message) -> Result<Message, BusError> {
    if msg.kind.direction() != msg.direction {
        return Err(BusError::DirectionKindMismatch {
            kind: msg.kind,
            direction: msg.direction,
        });
    }
    if msg.address > MAX_ADDRESS {
        return Err(BusError::AddressOutOfRange(msg.address));
    }
    match msg.kind {
        MessageKind::Write if msg.requested_len != 0 => {
            return Err(BusError::WriteWithRequestedLen(msg.requested_len))
        }
        MessageKind::ReadRequest if msg.requested_len == 0 => {
            return Err(BusError::EmptyReadRequest)
        }
        MessageKind::ReadResponse
            if msg.requested_len == 0 || msg.payload.len() != msg.requested_len =>
        {
            return Err(BusError::ResponseLengthMismatch {
                requested: msg.requested_len,
                actual: msg.payload.len(),
            })
        }
        _ => {}
    }
    Ok(msg)
}
