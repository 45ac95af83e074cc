//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line per
//! criterion; fails if any criterion fails.
//!
//! Run with `cargo test -p femsim --test acceptance -- --nocapture`.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use femsim::bus::{MessageKind, Segment};
use femsim::devices::ObservationKind;
use femsim::faultload::{
    generate_campaign, parse_faultload, serialize_faultload, FaultNature, FaultSpec, Faultload,
    Sweep, Trigger, TriggerKind,
};
use femsim::fem::apply_bitflip;
use femsim::harness::{
    builtin, execute, masked_jsonl, recount_counters, run_campaign, CampaignConfig, Dispositions,
    EventKind, FemStart, Link, Mask, Outcome, RunOutcome, Scenario, BUILTIN_NAMES,
};

/// Small deterministic generator for test inputs (splitmix64).
struct Gen(u64);

impl Gen {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

/// Independent model of the payload's sample stream: plain step-by-step
/// iteration of the 64-bit LCG, top bits folded into 7 bits.
fn oracle_samples(seed: u64, count: usize) -> Vec<u8> {
    const A: u64 = 6364136223846793005;
    const C: u64 = 1442695040888963407;
    let mut x = seed;
    (0..count)
        .map(|_| {
            x = x.wrapping_mul(A).wrapping_add(C);
            ((x >> 33) % 128) as u8
        })
        .collect()
}

type Criterion = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Counter soundness and conservation for one run; shared by criterion 5.
fn counters_sound(sc: &Scenario, run: &RunOutcome) -> Result<(), String> {
    let d = Dispositions::of(&run.trace);
    match sc.link {
        Link::Direct => check(run.fem_counters.is_none(), || {
            format!("{}: direct run has a FEM", sc.name)
        }),
        Link::Fem => {
            let counters = run.fem_counters.expect("FEM link");
            let entered = d.entered();
            check(entered == run.fem_inbound, || {
                format!(
                    "{}: {} messages entered the FEM, trace accounts for {entered}",
                    sc.name, run.fem_inbound
                )
            })?;
            check(d.released + u64::from(run.fem_holding) == d.held, || {
                format!("{}: held {} released {}", sc.name, d.held, d.released)
            })?;
            if sc.fem_mode_at_start == FemStart::Busy {
                let recount = recount_counters(&run.trace);
                check(recount == counters, || {
                    format!(
                        "{}: FEM counters {counters:?}, recount {recount:?}",
                        sc.name
                    )
                })?;
                // Independent recount: every message the runner handed the FEM,
                // classified by kind from the trace's message records.
                let mut w = 0;
                let mut r = 0;
                for e in run.trace.iter() {
                    if matches!(
                        e.kind,
                        EventKind::MsgForwarded
                            | EventKind::MsgTransformed
                            | EventKind::MsgDropped
                            | EventKind::MsgHeld
                    ) {
                        match e.detail.msg.as_ref().map(|m| m.kind) {
                            Some(MessageKind::ReadResponse) => r += 1,
                            Some(_) => w += 1,
                            None => {}
                        }
                    }
                }
                check(counters.writes == w && counters.reads == r, || {
                    format!("{}: counters {counters:?} vs kinds {w}/{r}", sc.name)
                })?;
                let last = run
                    .trace
                    .iter()
                    .filter_map(|e| e.detail.counters)
                    .last()
                    .map(|c| (c.writes, c.reads))
                    .unwrap_or((0, 0));
                check(last == (counters.writes, counters.reads), || {
                    format!("{}: last CounterUpdate {last:?} vs {counters:?}", sc.name)
                })
            } else {
                check(counters.writes == 0 && counters.reads == 0, || {
                    format!("{}: idle FEM counted", sc.name)
                })
            }
        }
    }
}

fn criterion_fig4(pool: &mut Vec<Scenario>) -> Criterion {
    let mut lines = Vec::new();
    for name in BUILTIN_NAMES {
        let sc = builtin(name).expect("builtin");
        let start = Instant::now();
        let run = execute(&sc);
        let took = start.elapsed();
        check(took < Duration::from_secs(1), || {
            format!("{name} took {took:?}")
        })?;
        let v = &run.verdict;
        let ok = match name {
            "fig4-normal" => v.outcome == Outcome::FaultFreeNominal,
            "fig4-timeout" => {
                v.outcome == Outcome::SutDetected && v.detection == Some(ObservationKind::AllFF)
            }
            "fig4-flip" => {
                // Whether the flipped byte still looks like a sample decides the outcome.
                let FaultNature::Value(femsim::faultload::ValueForm::Flip { bit_index, .. }) =
                    sc.faultload.specs[0].nature
                else {
                    return Err("fig4-flip is not a flip".into());
                };
                let flipped = oracle_samples(sc.seed, 1)[0] ^ (1 << bit_index);
                let expected = if flipped > 0x7F {
                    Outcome::SutDetected
                } else {
                    Outcome::SutSilentCorruption
                };
                v.outcome == expected
            }
            "fig4-out" => {
                v.outcome == Outcome::SutDetected
                    && v.detection == Some(ObservationKind::OutOfRangeDetected)
            }
            _ => false,
        };
        check(ok, || format!("{name}: got {v}"))?;
        lines.push(format!(
            "{name}={}{}",
            v.outcome,
            v.detection.map(|d| format!("({d})")).unwrap_or_default()
        ));
        pool.push(sc);
    }
    Ok(lines.join(", "))
}

fn criterion_ff_rule(pool: &mut Vec<Scenario>) -> Criterion {
    let mut g = Gen(0xFF);
    let mut total = 0;
    for n in [1u32, 2, 4, 8] {
        let timeout = 10;
        let mut triggers: Vec<Trigger> = (1..=n).map(Trigger::read).collect();
        triggers.extend((2..=n + 1).map(Trigger::write));
        let sweep = Sweep {
            segments: Segment::ALL.to_vec(),
            triggers,
            natures: vec![
                FaultNature::Provision,
                FaultNature::Time {
                    delay_ticks: timeout + 1,
                },
                FaultNature::Time {
                    delay_ticks: 3 * timeout,
                },
            ],
        };
        let loads = generate_campaign(&format!("ff{n}"), &sweep).map_err(|e| e.to_string())?;
        for fl in loads {
            let spec = fl.specs[0].clone();
            let read_len = 1 + g.below(3) as usize;
            let sc = Scenario {
                seed: g.next(),
                n_requests: n,
                timeout_ticks: timeout,
                read_len,
                faultload: fl,
                ..Scenario::new(spec.id.clone())
            };
            let run = execute(&sc);
            let request = match spec.trigger.kind {
                TriggerKind::ReadOrdinal => spec.trigger.ordinal,
                TriggerKind::WriteOrdinal => spec.trigger.ordinal - 1,
            };
            let obs = run
                .trace
                .iter()
                .filter_map(|e| e.detail.observation.as_ref())
                .find(|o| o.request == Some(request))
                .ok_or_else(|| format!("{}: no observation for request {request}", sc.name))?;
            let bytes = obs.bytes();
            check(
                obs.kind == ObservationKind::AllFF
                    && bytes.len() == read_len
                    && bytes.iter().all(|&b| b == 0xFF),
                || {
                    format!(
                        "{}: request {request} observed {:?} {}",
                        sc.name, obs.kind, obs.data
                    )
                },
            )?;
            total += 1;
            pool.push(sc);
        }
    }
    check(total >= 50, || format!("only {total} scenarios"))?;
    Ok(format!("{total}/{total} faulted requests read all-0xFF"))
}

fn criterion_transparency(pool: &mut Vec<Scenario>) -> Criterion {
    let mut g = Gen(0x7A);
    let mut ns = Vec::new();
    for i in 0..100 {
        let n = if i < 17 { i as u32 } else { g.below(17) as u32 };
        let fem = Scenario {
            seed: g.next(),
            n_requests: n,
            read_len: 1 + g.below(4) as usize,
            max_ticks: Scenario::minimum_budget(n),
            ..Scenario::new(format!("transparency-{i}"))
        };
        let direct = Scenario {
            link: Link::Direct,
            ..fem.clone()
        };
        let a = execute(&fem);
        let b = execute(&direct);
        check(a.verdict.outcome == Outcome::FaultFreeNominal, || {
            format!("{}: {}", fem.name, a.verdict)
        })?;
        let (ma, mb) = (
            masked_jsonl(&a.trace, Mask::TRANSPARENCY),
            masked_jsonl(&b.trace, Mask::TRANSPARENCY),
        );
        check(ma == mb, || format!("{}: masked traces differ", fem.name))?;
        ns.push(n);
        pool.push(fem);
        pool.push(direct);
    }
    Ok(format!(
        "100/100 seeds byte-identical under mask, n_requests {}..={}",
        ns.iter().min().unwrap(),
        ns.iter().max().unwrap()
    ))
}

fn hamming(a: &[u8], b: &[u8]) -> Option<u32> {
    (a.len() == b.len()).then(|| a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum())
}

fn criterion_exactly_once(pool: &mut Vec<Scenario>) -> Criterion {
    let mut g = Gen(0xE1);
    // Direct property of the flip operator.
    for _ in 0..2000 {
        let len = 1 + g.below(16) as usize;
        let payload: Vec<u8> = (0..len).map(|_| g.next() as u8).collect();
        let byte = g.below(len as u64) as usize;
        let bit = g.below(8) as u8;
        let out = apply_bitflip(&payload, byte, bit).map_err(|e| e.to_string())?;
        check(hamming(&payload, &out) == Some(1), || {
            format!("flip {payload:02x?} byte {byte} bit {bit}")
        })?;
        check(out[byte] == payload[byte] ^ (1 << bit), || {
            "wrong bit flipped".into()
        })?;
    }
    // Whole runs: random triples realised on the bus, some with several specs.
    let mut runs = 0;
    for i in 0..1000 {
        let n = 1 + g.below(6) as u32;
        let read_len = 1 + g.below(4) as usize;
        let n_specs = 1 + g.below(3) as usize;
        let mut specs = Vec::new();
        for j in 0..n_specs {
            let trigger = if g.below(2) == 0 {
                Trigger::read(1 + g.below(u64::from(n)) as u32)
            } else {
                // Data requests carry one command byte.
                Trigger::write(2 + g.below(u64::from(n)) as u32)
            };
            let byte = match trigger.kind {
                TriggerKind::ReadOrdinal => g.below(read_len as u64) as usize,
                TriggerKind::WriteOrdinal => 0,
            };
            specs.push(FaultSpec {
                id: format!("x{i}-{j}"),
                location: if g.below(2) == 0 {
                    Segment::MasterSide
                } else {
                    Segment::SlaveSide
                },
                trigger,
                nature: FaultNature::flip(byte, g.below(8) as u8),
            });
        }
        let sc = Scenario {
            seed: g.next(),
            n_requests: n,
            read_len,
            expect: Some(Outcome::ALL.to_vec()),
            ..Scenario::new(format!("flip-{i}"))
        }
        .with_faults(specs);
        let run = execute(&sc);
        let mut seen: HashMap<String, usize> = HashMap::new();
        for e in run.trace.iter().filter(|e| e.kind.is_fault_disposition()) {
            check(e.kind == EventKind::MsgTransformed, || {
                format!("{}: unexpected {:?}", sc.name, e.kind)
            })?;
            *seen
                .entry(e.detail.fault.clone().unwrap_or_default())
                .or_default() += 1;
            let msg = e.detail.msg.as_ref().expect("message");
            let original = hex::decode(e.detail.original.as_deref().unwrap_or(""))
                .map_err(|e| e.to_string())?;
            check(hamming(&original, &msg.bytes()) == Some(1), || {
                format!(
                    "{}: {} -> {} is not one bit",
                    sc.name,
                    hex::encode(&original),
                    msg.data
                )
            })?;
        }
        check(seen.values().all(|&c| c == 1), || {
            format!("{}: {seen:?}", sc.name)
        })?;
        check(!seen.is_empty(), || format!("{}: no fault fired", sc.name))?;
        runs += 1;
        pool.push(sc);
    }
    Ok(format!(
        "2000 operator triples and {runs} runs: one transform per fired spec, Hamming distance 1"
    ))
}

fn criterion_counters(pool: &[Scenario]) -> Criterion {
    let mut g = Gen(0xC0);
    let mut extra = Vec::new();
    // Mixed natures, Idle and Busy, several specs.
    for i in 0..200 {
        let n = g.below(6) as u32;
        let mut specs = Vec::new();
        for j in 0..g.below(4) {
            let trigger = if g.below(2) == 0 {
                Trigger::read(1 + g.below(u64::from(n) + 1) as u32)
            } else {
                Trigger::write(1 + g.below(u64::from(n) + 2) as u32)
            };
            let nature = match g.below(4) {
                0 => FaultNature::Provision,
                1 => FaultNature::Time {
                    delay_ticks: 1 + g.below(30),
                },
                2 => FaultNature::flip(0, g.below(8) as u8),
                _ => FaultNature::replace(vec![g.next() as u8]),
            };
            specs.push(FaultSpec {
                id: format!("c{i}-{j}"),
                location: Segment::SlaveSide,
                trigger,
                nature,
            });
        }
        extra.push(
            Scenario {
                seed: g.next(),
                n_requests: n,
                fem_mode_at_start: if g.below(4) == 0 {
                    FemStart::Idle
                } else {
                    FemStart::Busy
                },
                expect: Some(Outcome::ALL.to_vec()),
                ..Scenario::new(format!("counters-{i}"))
            }
            .with_faults(specs),
        );
    }
    let all: Vec<&Scenario> = pool.iter().chain(extra.iter()).collect();
    for sc in &all {
        counters_sound(sc, &execute(sc))?;
    }
    Ok(format!(
        "{} scenarios: counters equal recount, conservation holds",
        all.len()
    ))
}

fn criterion_determinism(pool: &[Scenario]) -> Criterion {
    let picks: Vec<&Scenario> = pool.iter().step_by((pool.len() / 40).max(1)).collect();
    for sc in &picks {
        let first = execute(sc).trace.sha256();
        for _ in 1..20 {
            let again = execute(sc).trace.sha256();
            check(again == first, || format!("{}: hash changed", sc.name))?;
        }
    }
    let scenarios = CampaignConfig::from_toml(
        r#"
[template]
seed = 99
[sweep]
where = ["master-side", "slave-side"]
when = ["read#1..3", "write#2"]
what = ["flip byte=0 bit=0..7", "provision", "time delay=5..6"]
"#,
    )
    .and_then(|c| c.scenarios())
    .map_err(|e| e.to_string())?;
    let baseline = run_campaign(&scenarios, 1).map_err(|e| e.to_string())?;
    let base_json = baseline.report.to_json();
    for round in 0..20 {
        let workers = 2 + round % 7;
        let run = run_campaign(&scenarios, workers).map_err(|e| e.to_string())?;
        check(run.report.to_json() == base_json, || {
            format!("report differs with {workers} workers")
        })?;
        for (a, b) in baseline.runs.iter().zip(&run.runs) {
            check(a.trace.sha256() == b.trace.sha256(), || {
                format!("{} differs", a.verdict.scenario)
            })?;
        }
    }
    Ok(format!(
        "{} scenarios x 20 runs, {}-scenario campaign x 20 runs with 2-8 workers: identical hashes",
        picks.len(),
        scenarios.len()
    ))
}

fn random_faultload(g: &mut Gen, i: usize) -> Faultload {
    let specs = (0..g.below(6))
        .map(|j| FaultSpec {
            id: match g.below(3) {
                0 => format!("f{i}-{j}"),
                1 => format!("Fault_{j}.v{i}"),
                _ => format!("{j}-{}", g.below(1000)),
            },
            location: if g.below(2) == 0 {
                Segment::MasterSide
            } else {
                Segment::SlaveSide
            },
            trigger: if g.below(2) == 0 {
                Trigger::read(1 + g.below(u64::from(u32::MAX) - 1) as u32)
            } else {
                Trigger::write(1 + g.below(50) as u32)
            },
            nature: match g.below(4) {
                0 => FaultNature::Provision,
                1 => FaultNature::Time {
                    delay_ticks: 1 + g.below(u64::MAX - 1),
                },
                2 => FaultNature::flip(g.below(1 << 20) as usize, g.below(8) as u8),
                _ => FaultNature::replace((0..1 + g.below(8)).map(|_| g.next() as u8).collect()),
            },
        })
        .collect();
    Faultload::new(specs).expect("generated faultload is valid")
}

fn criterion_round_trip() -> Criterion {
    let mut g = Gen(0x21);
    for i in 0..2000 {
        let fl = random_faultload(&mut g, i);
        let text = serialize_faultload(&fl);
        let parsed = parse_faultload(&text).map_err(|e| format!("case {i}: {e:?}\n{text}"))?;
        check(parsed == fl, || {
            format!("case {i}: structure changed\n{text}")
        })?;
        check(serialize_faultload(&parsed) == text, || {
            format!("case {i}: serialization not stable")
        })?;
    }
    Ok("2000/2000 faultloads: parse(serialize(x)) == x, canonical text stable".into())
}

fn criterion_silent_partition(pool: &mut Vec<Scenario>) -> Criterion {
    let mut g = Gen(0x5C);
    let (mut detected, mut silent, mut cases) = (0, 0, 0);
    for round in 0..32 {
        let seed = if round == 0 { 7 } else { g.next() % (1 << 62) };
        let text = format!(
            "prefix = \"bits{round}\"\n[template]\nseed = {seed}\n[sweep]\nwhere = [\"slave-side\"]\nwhen = [\"read#1\"]\nwhat = [\"flip byte=0 bit=0..7\"]\n"
        );
        let scenarios = CampaignConfig::from_toml(&text)
            .and_then(|c| c.scenarios())
            .map_err(|e| e.to_string())?;
        check(scenarios.len() == 8, || {
            format!("{} scenarios", scenarios.len())
        })?;
        let run = run_campaign(&scenarios, 2).map_err(|e| e.to_string())?;
        let sample = oracle_samples(seed, 1)[0];
        for (bit, entry) in run.report.entries.iter().enumerate() {
            let flipped = sample ^ (1u8 << bit);
            let expected = if flipped > 0x7F {
                Outcome::SutDetected
            } else {
                Outcome::SutSilentCorruption
            };
            check(entry.outcome == expected, || {
                format!(
                    "seed {seed} bit {bit}: sample {sample:#04x} -> {flipped:#04x}, got {}",
                    entry.outcome
                )
            })?;
            if expected == Outcome::SutDetected {
                check(
                    entry.detection == Some(ObservationKind::OutOfRangeDetected),
                    || "detection kind".into(),
                )?;
                detected += 1;
            } else {
                silent += 1;
            }
            cases += 1;
        }
        pool.extend(scenarios);
    }
    Ok(format!(
        "{cases} flips over 32 seeds match the oracle: {detected} detected, {silent} silent"
    ))
}

#[test]
fn acceptance() {
    let mut pool = Vec::new();
    let fig4 = criterion_fig4(&mut pool);
    let ff_rule = criterion_ff_rule(&mut pool);
    let transparency = criterion_transparency(&mut pool);
    let exactly_once = criterion_exactly_once(&mut pool);
    // The silent-corruption sweep also feeds the pool for criteria 5 and 6.
    let partition = criterion_silent_partition(&mut pool);
    let results: Vec<(&str, Criterion)> = vec![
        ("reference behaviors", fig4),
        ("0xFF rule", ff_rule),
        ("transparency", transparency),
        ("exactly-once and Hamming-1", exactly_once),
        ("counter soundness", criterion_counters(&pool)),
        ("determinism", criterion_determinism(&pool)),
        ("faultload round-trip", criterion_round_trip()),
        ("silent-corruption partition", partition),
    ];

    let mut failed = 0;
    for (i, (name, result)) in results.iter().enumerate() {
        match result {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
