//! The tick loop.
//!
//! Each tick: deliver every message due now in send order, let the FEM
//! release a held message, then step the OBC if it received nothing. A
//! message emitted at tick `t` arrives at its next hop at `t + 1`. The run
//! ends once the OBC is finished and the bus is quiet, or when the tick
//! budget is spent.

use std::collections::VecDeque;

use crate::bus::{Direction, Message, Tick};
use crate::devices::{Obc, ObcStep, Slp};
use crate::fem::{Fem, FemCounters, FemNote};

use super::oracle::{evaluate_oracles, Verdict};
use super::scenario::{FemStart, Link, Scenario};
use super::trace::{CounterRecord, Detail, Endpoint, EventKind, RunStatus, Source, Trace};

/// Everything a run produced, beyond the trace and verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub trace: Trace,
    pub verdict: Verdict,
    pub status: RunStatus,
    pub final_tick: Tick,
    /// FEM counters at the end of the run, if a FEM was on the bus.
    pub fem_counters: Option<FemCounters>,
    /// Messages delivered to the FEM, counted by the runner.
    pub fem_inbound: u64,
    /// Whether the FEM still held a message when the run ended.
    pub fem_holding: bool,
}

pub fn run_scenario(sc: &Scenario) -> (Trace, Verdict) {
    let out = execute(sc);
    (out.trace, out.verdict)
}

struct Runner {
    trace: Trace,
    obc: Obc,
    slp: Slp,
    fem: Option<Fem>,
    wire: VecDeque<(Tick, Endpoint, Message)>,
    fem_inbound: u64,
}

fn state(from: impl std::fmt::Display, to: impl std::fmt::Display) -> Detail {
    Detail {
        state: Some(format!("{from}->{to}")),
        ..Detail::default()
    }
}

impl Runner {
    fn downstream(&self, msg: &Message) -> Endpoint {
        match msg.direction {
            Direction::MasterToSlave => Endpoint::Slp,
            Direction::SlaveToMaster => Endpoint::Obc,
        }
    }

    /// Next hop for a message leaving a device.
    fn first_hop(&self, msg: &Message) -> Endpoint {
        if self.fem.is_some() {
            Endpoint::Fem
        } else {
            self.downstream(msg)
        }
    }

    fn send(&mut self, now: Tick, to: Endpoint, msg: Message) {
        self.wire.push_back((now.after(1), to, msg));
    }

    fn log_forward(&mut self, now: Tick, to: Endpoint, msg: &Message) {
        self.trace.push(
            now,
            Source::Bus,
            EventKind::MsgForwarded,
            Detail {
                to: Some(to),
                msg: Some(msg.into()),
                ..Detail::default()
            },
        );
    }

    fn record_obc(&mut self, now: Tick, step: ObcStep) {
        for obs in &step.observations {
            self.trace.push(
                now,
                Source::Obc,
                EventKind::Observation,
                Detail {
                    observation: Some(obs.into()),
                    ..Detail::default()
                },
            );
        }
        for (from, to) in step.transitions {
            self.trace.push(
                now,
                Source::Obc,
                EventKind::DeviceTransition,
                state(from, to),
            );
        }
        if let Some(msg) = step.emitted {
            let hop = self.first_hop(&msg);
            self.send(now, hop, msg);
        }
    }

    fn record_fem(&mut self, now: Tick, notes: Vec<FemNote>, output: Option<Message>) {
        for note in notes {
            let (source, kind, detail) = match note {
                FemNote::Counted(c) => (
                    Source::Fem,
                    EventKind::CounterUpdate,
                    Detail {
                        counters: Some(CounterRecord::from(c)),
                        ..Detail::default()
                    },
                ),
                FemNote::Forwarded(m) => (
                    Source::Bus,
                    EventKind::MsgForwarded,
                    Detail {
                        to: Some(self.downstream(&m)),
                        msg: Some((&m).into()),
                        ..Detail::default()
                    },
                ),
                FemNote::Transformed {
                    fault_id,
                    leg,
                    sub,
                    original,
                    result,
                } => (
                    Source::Fem,
                    EventKind::MsgTransformed,
                    Detail {
                        to: Some(self.downstream(&result)),
                        fault: Some(fault_id),
                        leg: Some(leg),
                        msg: Some((&result).into()),
                        original: Some(hex::encode(&original.payload)),
                        state: Some(format!("Busy/{sub:?}")),
                        ..Detail::default()
                    },
                ),
                FemNote::Held {
                    fault_id,
                    leg,
                    message,
                    release_tick,
                } => (
                    Source::Fem,
                    EventKind::MsgHeld,
                    Detail {
                        fault: Some(fault_id),
                        leg: Some(leg),
                        msg: Some((&message).into()),
                        release_tick: Some(release_tick),
                        state: Some("Busy/Delay".into()),
                        ..Detail::default()
                    },
                ),
                FemNote::Released { fault_id, message } => (
                    Source::Fem,
                    EventKind::MsgReleased,
                    Detail {
                        to: Some(self.downstream(&message)),
                        fault: Some(fault_id),
                        msg: Some((&message).into()),
                        ..Detail::default()
                    },
                ),
                FemNote::Dropped {
                    fault_id,
                    leg,
                    message,
                } => (
                    Source::Fem,
                    EventKind::MsgDropped,
                    Detail {
                        fault: Some(fault_id),
                        leg: Some(leg),
                        msg: Some((&message).into()),
                        state: Some("Busy/Out".into()),
                        ..Detail::default()
                    },
                ),
                FemNote::ApplicationError { fault_id, error } => (
                    Source::Fem,
                    EventKind::FaultApplicationError,
                    Detail {
                        fault: Some(fault_id),
                        error: Some(error.to_string()),
                        ..Detail::default()
                    },
                ),
            };
            self.trace.push(now, source, kind, detail);
        }
        if let Some(msg) = output {
            let to = self.downstream(&msg);
            self.send(now, to, msg);
        }
    }

    fn deliver(&mut self, now: Tick, to: Endpoint, msg: Message) -> bool {
        match to {
            Endpoint::Fem => {
                self.fem_inbound += 1;
                let fem = self.fem.as_mut().expect("FEM link");
                let step = fem.step(Some(msg), now);
                self.record_fem(now, step.notes, step.output);
                false
            }
            Endpoint::Slp => {
                if self.fem.is_none() {
                    self.log_forward(now, to, &msg);
                }
                let step = self.slp.step(&msg, now);
                if let Some((from, to)) = step.transition {
                    self.trace.push(
                        now,
                        Source::Slp,
                        EventKind::DeviceTransition,
                        state(from, to),
                    );
                }
                if let Some(resp) = step.response {
                    let hop = self.first_hop(&resp);
                    self.send(now, hop, resp);
                }
                false
            }
            Endpoint::Obc => {
                if self.fem.is_none() {
                    self.log_forward(now, to, &msg);
                }
                let step = self.obc.step(Some(&msg), now);
                self.record_obc(now, step);
                true
            }
        }
    }

    fn quiet(&self) -> bool {
        self.wire.is_empty() && self.fem.as_ref().is_none_or(|f| f.held().is_none())
    }
}

/// Runs a scenario to completion and evaluates it.
pub fn execute(sc: &Scenario) -> RunOutcome {
    let fem = match sc.link {
        Link::Fem => Some(Fem::new(
            sc.fem_mode_at_start == FemStart::Busy,
            &sc.faultload,
        )),
        Link::Direct => None,
    };
    let mut r = Runner {
        trace: Trace::new(sc.name.clone()),
        obc: Obc::new(sc.obc_config()),
        slp: Slp::new(sc.slp_config()),
        fem,
        wire: VecDeque::new(),
        fem_inbound: 0,
    };

    let budget = Tick(sc.max_ticks);
    let mut now = Tick::ZERO;
    let status = loop {
        let mut obc_fed = false;
        while r.wire.front().is_some_and(|(at, _, _)| *at <= now) {
            let (_, to, msg) = r.wire.pop_front().expect("front checked");
            obc_fed |= r.deliver(now, to, msg);
        }
        if let Some(fem) = r.fem.as_mut() {
            let step = fem.step(None, now);
            r.record_fem(now, step.notes, step.output);
        }
        if !obc_fed {
            let step = r.obc.step(None, now);
            r.record_obc(now, step);
        }

        let finished = r.obc.phase().is_terminal();
        if finished && r.quiet() {
            break RunStatus::Completed;
        }
        if now >= budget {
            break if finished {
                RunStatus::CompletedWithLeftovers
            } else {
                RunStatus::BudgetExhausted
            };
        }
        now = now.after(1);
    };

    r.trace.push(
        now,
        Source::Bus,
        EventKind::RunEnd,
        Detail {
            status: Some(status),
            ..Detail::default()
        },
    );
    let verdict = evaluate_oracles(&r.trace, sc);
    RunOutcome {
        fem_counters: r.fem.as_ref().map(Fem::counters),
        fem_holding: r.fem.as_ref().is_some_and(|f| f.held().is_some()),
        fem_inbound: r.fem_inbound,
        trace: r.trace,
        verdict,
        status,
        final_tick: now,
    }
}
