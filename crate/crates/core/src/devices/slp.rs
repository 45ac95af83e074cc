use std::fmt;

use crate::bus::{Message, MessageKind, Tick};

use super::{CommandSet, ObcCommand};

const LCG_MUL: u64 = 6364136223846793005;
const LCG_INC: u64 = 1442695040888963407;

/// State of the sample generator after `steps` iterations from `seed`.
///
/// Uses affine jump-ahead (square-and-multiply over the map
/// `x -> a*x + c`), so the cost is logarithmic in `steps`.
pub fn lcg_state(seed: u64, mut steps: u64) -> u64 {
    // (acc_mul, acc_inc) is the composed map applied so far.
    let (mut acc_mul, mut acc_inc) = (1u64, 0u64);
    let (mut cur_mul, mut cur_inc) = (LCG_MUL, LCG_INC);
    while steps > 0 {
        if steps & 1 == 1 {
            acc_mul = acc_mul.wrapping_mul(cur_mul);
            acc_inc = acc_inc.wrapping_mul(cur_mul).wrapping_add(cur_inc);
        }
        cur_inc = cur_inc.wrapping_mul(cur_mul).wrapping_add(cur_inc);
        cur_mul = cur_mul.wrapping_mul(cur_mul);
        steps >>= 1;
    }
    acc_mul.wrapping_mul(seed).wrapping_add(acc_inc)
}

/// Deterministic stand-in for the probe's A/D conversion: the top bits of
/// the `index + 1`-th LCG state, folded into `0x00..=0x7F`.
pub fn slp_sample(seed: u64, index: u64) -> u8 {
    ((lcg_state(seed, index.wrapping_add(1)) >> 33) % 128) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlpMode {
    Off,
    Reading,
    Transmitting,
}

impl fmt::Display for SlpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlpMode::Off => "Off",
            SlpMode::Reading => "Reading",
            SlpMode::Transmitting => "Transmitting",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlpConfig {
    pub address: u8,
    pub commands: CommandSet,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlpStep {
    pub response: Option<Message>,
    pub transition: Option<(SlpMode, SlpMode)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slp {
    config: SlpConfig,
    mode: SlpMode,
    samples_emitted: u64,
}

impl Slp {
    pub fn new(config: SlpConfig) -> Self {
        Slp {
            config,
            mode: SlpMode::Off,
            samples_emitted: 0,
        }
    }

    pub fn mode(&self) -> SlpMode {
        self.mode
    }

    pub fn samples_emitted(&self) -> u64 {
        self.samples_emitted
    }

    pub fn config(&self) -> &SlpConfig {
        &self.config
    }

    /// Handles one inbound transfer. Traffic for other addresses, unknown
    /// commands and data requests while `Off` get no answer; the master then
    /// reads the idle bus.
    pub fn step(&mut self, inbound: &Message, now: Tick) -> SlpStep {
        let before = self.mode;
        let mut response = None;
        if inbound.address == self.config.address {
            match inbound.kind {
                MessageKind::Write => {
                    let command = inbound
                        .payload
                        .first()
                        .and_then(|&b| self.config.commands.decode(b));
                    match (command, self.mode) {
                        (Some(ObcCommand::StartAnalogRead), SlpMode::Off) => {
                            self.mode = SlpMode::Reading
                        }
                        (Some(ObcCommand::EndTransmission), _) => self.mode = SlpMode::Off,
                        _ => {}
                    }
                }
                MessageKind::ReadRequest => {
                    let is_data_request = match inbound.payload.first() {
                        None => true,
                        Some(&b) => self.config.commands.decode(b) == Some(ObcCommand::RequestData),
                    };
                    if is_data_request && self.mode != SlpMode::Off && inbound.requested_len > 0 {
                        self.mode = SlpMode::Transmitting;
                        let payload = (0..inbound.requested_len as u64)
                            .map(|i| slp_sample(self.config.seed, self.samples_emitted + i))
                            .collect();
                        self.samples_emitted += inbound.requested_len as u64;
                        response = Some(Message::read_response(now, inbound, payload));
                    }
                }
                MessageKind::ReadResponse => {}
            }
        }
        SlpStep {
            response,
            transition: (before != self.mode).then_some((before, self.mode)),
        }
    }
}
