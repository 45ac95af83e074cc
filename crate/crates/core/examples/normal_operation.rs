//! A fault-free run through a busy FEM: every sample is read and accepted.
//!
//! `cargo run -p femsim --example normal_operation`

use femsim::harness::{builtin, execute};

fn main() {
    let sc = builtin("fig4-normal").expect("built-in scenario");
    let run = execute(&sc);
    for ev in run.trace.iter() {
        println!("{ev}");
    }
    println!();
    println!("verdict: {}", run.verdict);
    println!("ticks:   {}", run.final_tick.value());
    if let Some(c) = run.fem_counters {
        println!("FEM counted {} writes and {} reads", c.writes, c.reads);
    }
}
