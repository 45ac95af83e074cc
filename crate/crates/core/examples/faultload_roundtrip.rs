//! Parse a hand-written faultload, print its canonical form, and show how a
//! broken one is reported.
//!
//! `cargo run -p femsim --example faultload_roundtrip [file]`

use femsim::faultload::{parse_faultload, serialize_faultload};

const SAMPLE: &str = "\
# mixed faults, loosely formatted
version 1

fault   what=flip bit=7 byte=0 id=f1 when=read#0x2 where=slave-side
fault id=drop-req where=master-side when=write#3 what=provision   # lose request 2
fault id=slow where=slave-side when=read#4 what=time delay=25
fault id=junk where=slave-side when=read#1 what=replace bytes=C8ff
";

const BROKEN: &str = "\
version 1
fault id=a where=slave-side when=read#0 what=flip byte=0 bit=8
fault id=a where=sideways when=read#2 what=provision delay=3
fault id=b where=slave-side when=poke#1 what=melt
";

fn main() {
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(&path).expect("readable file"),
        None => SAMPLE.to_string(),
    };
    match parse_faultload(&text) {
        Ok(fl) => {
            let canonical = serialize_faultload(&fl);
            print!("canonical form:\n{canonical}");
            let again = parse_faultload(&canonical).expect("canonical text parses");
            assert_eq!(again, fl);
            assert_eq!(serialize_faultload(&again), canonical);
            println!("round trip: ok");
        }
        Err(errors) => errors.iter().for_each(|e| println!("{e}")),
    }
    println!("\nviolations in a broken faultload:");
    for e in parse_faultload(BROKEN).unwrap_err() {
        println!("  {e}");
    }
}
