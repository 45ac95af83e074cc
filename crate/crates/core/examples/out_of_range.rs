//! Replace a sample with a value outside the expected range; the OBC's
//! range check catches it.
//!
//! `cargo run -p femsim --example out_of_range`

use femsim::harness::{builtin, execute};

fn main() {
    let sc = builtin("fig4-out").expect("built-in scenario");
    println!("{}", femsim::faultload::serialize_faultload(&sc.faultload));
    let run = execute(&sc);
    if let Some(ev) = run.verdict.evidence.first() {
        println!("transform:   {}", run.trace.events[*ev as usize]);
    }
    if let Some(ev) = run.verdict.evidence.last() {
        println!("observation: {}", run.trace.events[*ev as usize]);
    }
    println!("\nverdict: {}", run.verdict);
}
