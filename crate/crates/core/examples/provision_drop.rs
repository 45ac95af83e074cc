//! Drop one message per run and show which request reads as all-0xFF.
//! Dropping read #k loses response k; dropping write #k (k >= 2) loses the
//! request for sample k - 1.
//!
//! `cargo run -p femsim --example provision_drop`

use femsim::bus::Segment;
use femsim::faultload::{FaultNature, FaultSpec, Trigger};
use femsim::harness::{execute, Scenario};

fn main() {
    let n = 4;
    let mut triggers: Vec<Trigger> = (1..=n).map(Trigger::read).collect();
    triggers.extend((2..=n + 1).map(Trigger::write));
    for trigger in triggers {
        let location = match trigger.kind {
            femsim::faultload::TriggerKind::ReadOrdinal => Segment::SlaveSide,
            femsim::faultload::TriggerKind::WriteOrdinal => Segment::MasterSide,
        };
        let sc = Scenario {
            n_requests: n,
            read_len: 2,
            ..Scenario::new("drop")
        }
        .with_faults(vec![FaultSpec {
            id: format!("drop-{trigger}"),
            location,
            trigger,
            nature: FaultNature::Provision,
        }]);
        let run = execute(&sc);
        let obs: Vec<String> = run
            .trace
            .iter()
            .filter_map(|e| e.detail.observation.as_ref())
            .filter(|o| o.request.is_some())
            .map(|o| format!("{}:{}", o.request.unwrap(), o.data))
            .collect();
        println!(
            "{:<8} {:<18} {}",
            trigger.to_string(),
            run.verdict.outcome.to_string(),
            obs.join(" ")
        );
    }
}
