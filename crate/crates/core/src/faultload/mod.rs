//! Faultload scripts: which faults to inject, where, when and what.
//!
//! A faultload is a line-delimited text document:
//!
//! ```text
//! version 1
//! # comments and blank lines are ignored
//! fault id=late-2 where=slave-side when=read#2 what=time delay=50  # so is this
//! fault id=flip-1 where=slave-side when=read#1 what=flip byte=0 bit=7
//! fault id=out-1 where=slave-side when=read#1 what=replace bytes=c8
//! fault id=lost-3 where=master-side when=write#3 what=provision
//! ```
//!
//! A `#` at the start of a word begins a comment that runs to the end of
//! the line. Each `fault` line carries `key=value` fields. `when` counts writes
//! (master-originated transfers, including read requests) or reads (slave
//! responses) as seen by the FEM, 1-based. `what` is one of `time`
//! (`delay=<ticks>`), `provision` (the message is lost), `flip`
//! (`byte=<index> bit=<0..7>`) or `replace` (`bytes=<hex>`); `flip` and
//! `replace` are the two forms of a value fault.
//!
//! [`serialize_faultload`] writes the canonical form: the `version` line,
//! then one `fault` line per spec in list order with fields in the order
//! `id where when what` followed by the nature's parameters (`delay`;
//! `byte bit`; `bytes`), single spaces, lowercase hex, decimal integers and
//! a trailing newline on every line.

mod campaign;
mod parse;

pub use campaign::{generate_campaign, parse_nature_sweep, parse_trigger_sweep, Sweep, SweepError};
pub use parse::{parse_faultload, serialize_faultload, ParseError, Violation};

use std::fmt;

use crate::bus::{MessageKind, Segment};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TriggerKind {
    WriteOrdinal,
    ReadOrdinal,
}

impl TriggerKind {
    /// Whether a message of `kind` advances this trigger's counter.
    pub fn counts(self, kind: MessageKind) -> bool {
        match self {
            TriggerKind::WriteOrdinal => kind.is_master_originated(),
            TriggerKind::ReadOrdinal => !kind.is_master_originated(),
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            TriggerKind::WriteOrdinal => "write",
            TriggerKind::ReadOrdinal => "read",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trigger {
    pub kind: TriggerKind,
    /// 1-based.
    pub ordinal: u32,
}

impl Trigger {
    pub fn write(ordinal: u32) -> Self {
        Trigger {
            kind: TriggerKind::WriteOrdinal,
            ordinal,
        }
    }

    pub fn read(ordinal: u32) -> Self {
        Trigger {
            kind: TriggerKind::ReadOrdinal,
            ordinal,
        }
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.kind.keyword(), self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueForm {
    Flip { byte_index: usize, bit_index: u8 },
    Replace { bytes: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FaultNature {
    /// Delayed delivery.
    Time { delay_ticks: u64 },
    /// The message is never delivered.
    Provision,
    /// The payload is altered.
    Value(ValueForm),
}

impl FaultNature {
    pub fn flip(byte_index: usize, bit_index: u8) -> Self {
        FaultNature::Value(ValueForm::Flip {
            byte_index,
            bit_index,
        })
    }

    pub fn replace(bytes: Vec<u8>) -> Self {
        FaultNature::Value(ValueForm::Replace { bytes })
    }

    /// Failure class: `time`, `provision` or `value`.
    pub fn class(&self) -> &'static str {
        match self {
            FaultNature::Time { .. } => "time",
            FaultNature::Provision => "provision",
            FaultNature::Value(_) => "value",
        }
    }

    /// The `what=` keyword.
    pub fn keyword(&self) -> &'static str {
        match self {
            FaultNature::Time { .. } => "time",
            FaultNature::Provision => "provision",
            FaultNature::Value(ValueForm::Flip { .. }) => "flip",
            FaultNature::Value(ValueForm::Replace { .. }) => "replace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultSpec {
    pub id: String,
    /// Leg of the FEM crossing the fault is injected on.
    pub location: Segment,
    pub trigger: Trigger,
    pub nature: FaultNature,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Faultload {
    pub version: String,
    pub specs: Vec<FaultSpec>,
}

impl Default for Faultload {
    fn default() -> Self {
        Faultload::empty()
    }
}

impl Faultload {
    /// A pure-monitoring faultload.
    pub fn empty() -> Self {
        Faultload {
            version: FORMAT_VERSION.to_string(),
            specs: Vec::new(),
        }
    }

    /// Builds a faultload from specs, checking every schema invariant.
    pub fn new(specs: Vec<FaultSpec>) -> Result<Self, Vec<Violation>> {
        let fl = Faultload {
            version: FORMAT_VERSION.to_string(),
            specs,
        };
        let violations = fl.violations();
        if violations.is_empty() {
            Ok(fl)
        } else {
            Err(violations)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Every schema violation in this value.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.version != FORMAT_VERSION {
            out.push(Violation::VersionMismatch(self.version.clone()));
        }
        for (i, spec) in self.specs.iter().enumerate() {
            if !parse::is_valid_id(&spec.id) {
                out.push(Violation::InvalidId(spec.id.clone()));
            }
            if self.specs[..i].iter().any(|s| s.id == spec.id) {
                out.push(Violation::DuplicateId(spec.id.clone()));
            }
            out.extend(spec_violations(spec));
        }
        out
    }
}

pub(crate) fn spec_violations(spec: &FaultSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if spec.trigger.ordinal == 0 {
        out.push(Violation::OrdinalZero);
    }
    match &spec.nature {
        FaultNature::Time { delay_ticks: 0 } => out.push(Violation::DelayZero),
        FaultNature::Value(ValueForm::Flip { bit_index, .. }) if *bit_index > 7 => {
            out.push(Violation::BitIndexOutOfRange(u64::from(*bit_index)))
        }
        FaultNature::Value(ValueForm::Replace { bytes }) if bytes.is_empty() => {
            out.push(Violation::EmptyReplacement)
        }
        _ => {}
    }
    out
}
