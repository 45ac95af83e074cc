//! The `femsim` command line.
//!
//! Exit codes: 0 success, 1 outcome differs from the expectation (or traces
//! differ), 2 usage or validation error, 3 internal or I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::faultload::parse_faultload;
use crate::harness::{
    builtin, diff_traces, execute, run_campaign, write_golden, CampaignConfig, CampaignError,
    CounterRecord, Mask, Outcome, RunStatus, Scenario, Trace, Verdict, BUILTIN_NAMES,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Prefix selecting a built-in scenario instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Parser)]
#[command(
    name = "femsim",
    version,
    about = "Fault-injection simulator for a master/slave serial bus"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a faultload file and list every violation.
    Validate { file: PathBuf },
    /// Run one scenario (a TOML file or `builtin:<name>`).
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Generate and run a fault campaign.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Compare two trace files.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        ignore_ticks: bool,
        #[arg(long)]
        ignore_counters: bool,
    },
    /// Write a built-in scenario with its trace and verdict (`all` for every one).
    Golden {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Machine-readable result of `run`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub verdict: Verdict,
    pub expected: Vec<Outcome>,
    pub as_expected: bool,
    pub status: RunStatus,
    pub ticks: u64,
    pub events: usize,
    pub trace_sha256: String,
    pub fem_counters: Option<CounterRecord>,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{
        let _ = writeln!($w, $($arg)*);
    }};
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let mut io = Io { out, err };
    match cli.command {
        Command::Validate { file } => cmd_validate(&mut io, &file),
        Command::Run {
            scenario,
            trace,
            report,
        } => cmd_run(&mut io, &scenario, &trace, &report),
        Command::Campaign {
            config,
            out,
            workers,
        } => cmd_campaign(&mut io, &config, &out, workers),
        Command::Diff {
            a,
            b,
            ignore_ticks,
            ignore_counters,
        } => cmd_diff(
            &mut io,
            &a,
            &b,
            Mask {
                ticks: ignore_ticks,
                counters: ignore_counters,
            },
        ),
        Command::Golden { name, out } => cmd_golden(&mut io, &name, &out),
    }
}

fn cmd_validate(io: &mut Io, path: &Path) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "error: cannot read {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    match parse_faultload(&text) {
        Ok(fl) => {
            say!(io.out, "valid ({} faults)", fl.specs.len());
            EXIT_OK
        }
        Err(errors) => {
            for e in &errors {
                say!(io.out, "{}: {e}", path.display());
            }
            say!(io.err, "{} violation(s)", errors.len());
            EXIT_USAGE
        }
    }
}

fn load_scenario(spec: &str) -> Result<Scenario, String> {
    if let Some(name) = spec.strip_prefix(BUILTIN_PREFIX) {
        return builtin(name).ok_or_else(|| {
            format!(
                "unknown built-in `{name}` (known: {})",
                BUILTIN_NAMES.join(", ")
            )
        });
    }
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(sc) = builtin(spec) {
            return Ok(sc);
        }
    }
    Scenario::load(path).map_err(|e| e.to_string())
}

fn write_file(io: &mut Io, path: &Path, body: &str) -> bool {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        if let Err(e) = std::fs::create_dir_all(parent) {
            say!(io.err, "error: cannot create {}: {e}", parent.display());
            return false;
        }
    }
    match std::fs::write(path, body) {
        Ok(()) => true,
        Err(e) => {
            say!(io.err, "error: cannot write {}: {e}", path.display());
            false
        }
    }
}

fn cmd_run(io: &mut Io, scenario: &str, trace_out: &Path, report_out: &Path) -> i32 {
    let sc = match load_scenario(scenario) {
        Ok(sc) => sc,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let run = execute(&sc);
    let expected = sc.expectation();
    let report = RunReport {
        as_expected: expected.contains(&run.verdict.outcome),
        expected,
        status: run.status,
        ticks: run.final_tick.value(),
        events: run.trace.len(),
        trace_sha256: run.trace.sha256(),
        fem_counters: run.fem_counters.map(CounterRecord::from),
        verdict: run.verdict,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if !write_file(io, trace_out, &run.trace.to_jsonl()) || !write_file(io, report_out, &json) {
        return EXIT_INTERNAL;
    }
    if report.as_expected {
        say!(io.out, "{}", report.verdict);
        EXIT_OK
    } else {
        let list: Vec<String> = report.expected.iter().map(Outcome::to_string).collect();
        say!(
            io.out,
            "{} (expected {})",
            report.verdict,
            list.join(" or ")
        );
        EXIT_MISMATCH
    }
}

fn cmd_campaign(io: &mut Io, config: &Path, out_dir: &Path, workers: usize) -> i32 {
    let scenarios = match CampaignConfig::load(config).and_then(|c| c.scenarios()) {
        Ok(s) => s,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        say!(io.err, "error: cannot create {}: {e}", out_dir.display());
        return EXIT_INTERNAL;
    }
    let run = match run_campaign(&scenarios, workers) {
        Ok(r) => r,
        Err(e @ CampaignError::Pool(_)) => {
            say!(io.err, "error: {e}");
            return EXIT_INTERNAL;
        }
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    for outcome in &run.runs {
        let path = out_dir.join(format!("{}.trace.jsonl", outcome.verdict.scenario));
        if !write_file(io, &path, &outcome.trace.to_jsonl()) {
            return EXIT_INTERNAL;
        }
    }
    if !write_file(io, &out_dir.join("report.json"), &run.report.to_json()) {
        return EXIT_INTERNAL;
    }
    let _ = write!(io.out, "{}", run.report.table());
    EXIT_OK
}

fn load_trace(io: &mut Io, path: &Path) -> Option<Trace> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "error: cannot read {}: {e}", path.display());
            return None;
        }
    };
    match Trace::from_jsonl(&text) {
        Ok(t) => Some(t),
        Err(e) => {
            say!(io.err, "error: {}: {e}", path.display());
            None
        }
    }
}

fn cmd_diff(io: &mut Io, a: &Path, b: &Path, mask: Mask) -> i32 {
    let (Some(ta), Some(tb)) = (load_trace(io, a), load_trace(io, b)) else {
        return EXIT_USAGE;
    };
    let diffs = diff_traces(&ta, &tb, mask);
    if diffs.is_empty() {
        say!(io.out, "traces equal");
        return EXIT_OK;
    }
    for d in &diffs {
        say!(io.out, "{d}");
    }
    say!(io.out, "{} difference(s)", diffs.len());
    EXIT_MISMATCH
}

fn cmd_golden(io: &mut Io, name: &str, out_dir: &Path) -> i32 {
    let names: Vec<&str> = if name == "all" {
        BUILTIN_NAMES.to_vec()
    } else if builtin(name).is_some() {
        vec![name]
    } else {
        say!(
            io.err,
            "error: unknown built-in `{name}` (known: all, {})",
            BUILTIN_NAMES.join(", ")
        );
        return EXIT_USAGE;
    };
    for n in names {
        match write_golden(n, out_dir) {
            Ok(Some(paths)) => {
                for p in paths {
                    say!(io.out, "{}", p.display());
                }
            }
            Ok(None) => unreachable!("name checked above"),
            Err(e) => {
                say!(
                    io.err,
                    "error: cannot write into {}: {e}",
                    out_dir.display()
                );
                return EXIT_INTERNAL;
            }
        }
    }
    EXIT_OK
}
