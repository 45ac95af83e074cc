//! A response held by the FEM past the OBC's timeout. The OBC gives up on
//! the sample and records all-0xFF; the late response arrives afterwards.
//!
//! `cargo run -p femsim --example timeout_delay [delay_ticks]`

use femsim::bus::Segment;
use femsim::faultload::{FaultNature, FaultSpec, Trigger};
use femsim::harness::{execute, EventKind, Scenario};

fn main() {
    let delay: u64 = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("delay must be a number"))
        .unwrap_or(50);
    let sc = Scenario {
        timeout_ticks: 10,
        ..Scenario::new("timeout-delay")
    }
    .with_faults(vec![FaultSpec {
        id: "hold-read2".into(),
        location: Segment::SlaveSide,
        trigger: Trigger::read(2),
        nature: FaultNature::Time { delay_ticks: delay },
    }]);

    let run = execute(&sc);
    for ev in run.trace.iter() {
        match ev.kind {
            EventKind::MsgHeld | EventKind::MsgReleased | EventKind::Observation => {
                println!("tick {:>3}  {:?}  {}", ev.tick.value(), ev.kind, ev)
            }
            _ => {}
        }
    }
    println!("\nverdict: {}", run.verdict);
}
