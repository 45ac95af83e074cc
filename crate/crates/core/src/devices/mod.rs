//! Behavioral models of the two systems under test: the on-board computer
//! (bus master) and the Langmuir-probe payload (bus slave).
//!
//! The session protocol is start analog read, `n` data requests, end
//! transmission. Each model is a step function over explicit state and
//! reports what it emitted plus any state transitions so the harness can
//! record them.

mod obc;
mod slp;

pub use obc::{ByteRange, Obc, ObcConfig, ObcObservation, ObcPhase, ObcStep, ObservationKind};
pub use slp::{lcg_state, slp_sample, Slp, SlpConfig, SlpMode, SlpStep};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::MessageKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObcCommand {
    StartAnalogRead,
    RequestData,
    EndTransmission,
}

/// Wire encoding of the three OBC commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandSet {
    pub start: u8,
    pub request: u8,
    pub end: u8,
}

impl Default for CommandSet {
    fn default() -> Self {
        CommandSet {
            start: 0x01,
            request: 0x02,
            end: 0x03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("command bytes must be pairwise distinct (start={start:#04x}, request={request:#04x}, end={end:#04x})")]
pub struct DuplicateCommandByte {
    pub start: u8,
    pub request: u8,
    pub end: u8,
}

impl CommandSet {
    pub fn new(start: u8, request: u8, end: u8) -> Result<Self, DuplicateCommandByte> {
        let set = CommandSet {
            start,
            request,
            end,
        };
        set.check()?;
        Ok(set)
    }

    pub fn check(&self) -> Result<(), DuplicateCommandByte> {
        if self.start == self.request || self.start == self.end || self.request == self.end {
            return Err(DuplicateCommandByte {
                start: self.start,
                request: self.request,
                end: self.end,
            });
        }
        Ok(())
    }

    pub fn encode(&self, command: ObcCommand) -> u8 {
        match command {
            ObcCommand::StartAnalogRead => self.start,
            ObcCommand::RequestData => self.request,
            ObcCommand::EndTransmission => self.end,
        }
    }

    pub fn decode(&self, byte: u8) -> Option<ObcCommand> {
        if byte == self.start {
            Some(ObcCommand::StartAnalogRead)
        } else if byte == self.request {
            Some(ObcCommand::RequestData)
        } else if byte == self.end {
            Some(ObcCommand::EndTransmission)
        } else {
            None
        }
    }
}

/// Fault-free message shape of one session with `n_requests` data requests.
pub fn obc_expected_trace(n_requests: u32) -> Vec<MessageKind> {
    let mut kinds = Vec::with_capacity(2 + 2 * n_requests as usize);
    kinds.push(MessageKind::Write);
    for _ in 0..n_requests {
        kinds.push(MessageKind::ReadRequest);
        kinds.push(MessageKind::ReadResponse);
    }
    kinds.push(MessageKind::Write);
    kinds
}
