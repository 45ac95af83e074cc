//! Write the four built-in reference scenarios, their traces and verdicts.
//!
//! `cargo run -p femsim --example goldens -- <out_dir>`

use std::path::PathBuf;

use femsim::harness::{write_golden, BUILTIN_NAMES};

fn main() {
    let Some(dir) = std::env::args().nth(1).map(PathBuf::from) else {
        eprintln!("usage: goldens <out_dir>");
        std::process::exit(2);
    };
    for name in BUILTIN_NAMES {
        let files = write_golden(name, &dir)
            .expect("output directory is writable")
            .expect("built-in name");
        for f in files {
            println!("{}", f.display());
        }
    }
}
