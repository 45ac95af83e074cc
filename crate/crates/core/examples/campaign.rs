//! Generate a campaign from a sweep, run it on several workers, and print
//! the table and the machine-readable report.
//!
//! `cargo run -p femsim --example campaign [workers]`

use femsim::harness::{run_campaign, CampaignConfig};

const CONFIG: &str = r#"
prefix = "demo"

[template]
seed = 11
n_requests = 3
timeout_ticks = 8

[sweep]
where = ["slave-side"]
when = ["read#1..3"]
what = ["provision", "time delay=3", "time delay=20", "flip byte=0 bit=6..7", "replace bytes=80"]
"#;

fn main() {
    let workers: usize = std::env::args()
        .nth(1)
        .map(|a| a.parse().expect("workers must be a number"))
        .unwrap_or(4);
    let config = CampaignConfig::from_toml(CONFIG).expect("valid config");
    let scenarios = config.scenarios().expect("valid sweep");
    let run = run_campaign(&scenarios, workers).expect("worker pool");
    print!("{}", run.report.table());
    println!();
    print!("{}", run.report.to_json());
}
