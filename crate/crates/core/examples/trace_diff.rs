//! Compare traces: a busy FEM against a direct link (equal once ticks and
//! counter events are masked), and a flipped run against a normal one.
//!
//! `cargo run -p femsim --example trace_diff`

use femsim::bus::Segment;
use femsim::faultload::{FaultNature, FaultSpec, Trigger};
use femsim::harness::{diff_traces, run_scenario, Link, Mask, Scenario};

fn main() {
    let base = Scenario {
        seed: 5,
        ..Scenario::new("diff")
    };
    let (fem, _) = run_scenario(&base);
    let (direct, _) = run_scenario(&Scenario {
        link: Link::Direct,
        ..base.clone()
    });
    println!(
        "FEM vs direct, unmasked: {} differences",
        diff_traces(&fem, &direct, Mask::NONE).len()
    );
    println!(
        "FEM vs direct, ticks and counters masked: {} differences\n",
        diff_traces(&fem, &direct, Mask::TRANSPARENCY).len()
    );

    let (flipped, _) = run_scenario(&base.clone().with_faults(vec![FaultSpec {
        id: "flip3".into(),
        location: Segment::SlaveSide,
        trigger: Trigger::read(3),
        nature: FaultNature::flip(0, 2),
    }]));
    println!("normal vs flipped:");
    for d in diff_traces(&fem, &flipped, Mask::NONE) {
        println!("  {d}");
    }
}
