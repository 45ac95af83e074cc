//! Flip each bit of the first sample in turn. Flips that keep the value in
//! the expected range are accepted by the OBC: nothing on the bus catches
//! them.
//!
//! `cargo run -p femsim --example bitflip_sweep [seed]`

use femsim::bus::Segment;
use femsim::devices::slp_sample;
use femsim::faultload::{FaultNature, FaultSpec, Trigger};
use femsim::harness::{execute, Outcome, Scenario};

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("seed must be a number"))
        .unwrap_or(7);
    let sample = slp_sample(seed, 0);
    println!("seed {seed}: first sample {sample:#04x}\n");
    println!("bit  flipped  outcome");
    for bit in 0..8u8 {
        let sc = Scenario {
            seed,
            expect: Some(vec![Outcome::SutDetected, Outcome::SutSilentCorruption]),
            ..Scenario::new(format!("flip-bit{bit}"))
        }
        .with_faults(vec![FaultSpec {
            id: format!("bit{bit}"),
            location: Segment::SlaveSide,
            trigger: Trigger::read(1),
            nature: FaultNature::flip(0, bit),
        }]);
        let v = execute(&sc).verdict;
        let det = v.detection.map(|d| format!(" ({d})")).unwrap_or_default();
        println!(
            "{bit:>3}  {:#04x}     {}{det}",
            sample ^ (1 << bit),
            v.outcome
        );
    }
}
