//! Trace comparison under a field mask.
//!
//! Traces are compared event by event after masking. Masking ticks zeroes
//! every tick-valued field; masking counters removes `CounterUpdate` events
//! altogether. Sequence numbers are positions and are never compared.

use std::fmt;

use super::trace::{EventKind, Trace, TraceEvent};
use crate::bus::Tick;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Mask {
    pub ticks: bool,
    pub counters: bool,
}

impl Mask {
    pub const NONE: Mask = Mask {
        ticks: false,
        counters: false,
    };
    /// The mask under which a busy, fault-free FEM run equals a direct run.
    pub const TRANSPARENCY: Mask = Mask {
        ticks: true,
        counters: true,
    };
}

/// One mismatching position. A side is `None` when that trace is shorter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Difference {
    /// Position in the masked event sequence.
    pub index: usize,
    pub left: Option<TraceEvent>,
    pub right: Option<TraceEvent>,
}

fn describe(e: &Option<TraceEvent>) -> String {
    let Some(e) = e else {
        return "<end of trace>".into();
    };
    let mut s = format!("tick {} {} {:?}", e.tick.value(), e.source, e.kind);
    if let Some(id) = &e.detail.fault {
        s.push_str(&format!(" fault={id}"));
    }
    if let Some(m) = &e.detail.msg {
        s.push_str(&format!(" {:?} txn={} data={}", m.kind, m.txn, m.data));
    }
    if let Some(o) = &e.detail.observation {
        s.push_str(&format!(" {} data={}", o.kind, o.data));
    }
    if let Some(st) = &e.detail.state {
        s.push_str(&format!(" {st}"));
    }
    s
}

impl fmt::Display for Difference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "#{}: {} | {}",
            self.index,
            describe(&self.left),
            describe(&self.right)
        )
    }
}

fn masked(e: &TraceEvent, mask: Mask) -> TraceEvent {
    let mut e = e.clone();
    e.seq = 0;
    if mask.ticks {
        e.tick = Tick::ZERO;
        if e.detail.release_tick.is_some() {
            e.detail.release_tick = Some(Tick::ZERO);
        }
    }
    e
}

fn kept(trace: &Trace, mask: Mask) -> Vec<&TraceEvent> {
    trace
        .iter()
        .filter(|e| !(mask.counters && e.kind == EventKind::CounterUpdate))
        .collect()
}

/// The masked event lines, renumbered, as they would be serialized.
pub fn masked_jsonl(trace: &Trace, mask: Mask) -> String {
    let mut out = String::new();
    for (i, e) in kept(trace, mask).into_iter().enumerate() {
        let mut m = masked(e, mask);
        m.seq = i as u64;
        out.push_str(&m.to_string());
        out.push('\n');
    }
    out
}

/// Positional differences between `a` and `b` under `mask`.
pub fn diff_traces(a: &Trace, b: &Trace, mask: Mask) -> Vec<Difference> {
    let left = kept(a, mask);
    let right = kept(b, mask);
    let mut out = Vec::new();
    for index in 0..left.len().max(right.len()) {
        let l = left.get(index).copied();
        let r = right.get(index).copied();
        let same = match (l, r) {
            (Some(l), Some(r)) => masked(l, mask) == masked(r, mask),
            _ => false,
        };
        if !same {
            out.push(Difference {
                index,
                left: l.cloned(),
                right: r.cloned(),
            });
        }
    }
    out
}
