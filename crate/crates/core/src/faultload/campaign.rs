use thiserror::Error;

use crate::bus::Segment;

use super::parse::{parse_u64, split_trigger};
use super::{spec_violations, FaultNature, FaultSpec, Faultload, Trigger, Violation};

/// Fault dimensions to enumerate. The campaign is their Cartesian product,
/// `segments` outermost and `natures` innermost.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sweep {
    pub segments: Vec<Segment>,
    pub triggers: Vec<Trigger>,
    pub natures: Vec<FaultNature>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SweepError {
    #[error("sweep dimension `{0}` is empty")]
    EmptyDimension(&'static str),
    #[error("sweep dimension `{dimension}` lists `{value}` twice")]
    DuplicateEntry {
        dimension: &'static str,
        value: String,
    },
    #[error("sweep entry `{entry}` violates the faultload schema: {violation}")]
    OutOfBounds { entry: String, violation: Violation },
    #[error("cannot parse sweep entry `{entry}`: {reason}")]
    Syntax { entry: String, reason: String },
}

fn check_unique<T: PartialEq + std::fmt::Debug>(
    dimension: &'static str,
    items: &[T],
) -> Result<(), SweepError> {
    if items.is_empty() {
        return Err(SweepError::EmptyDimension(dimension));
    }
    for (i, item) in items.iter().enumerate() {
        if items[..i].contains(item) {
            return Err(SweepError::DuplicateEntry {
                dimension,
                value: format!("{item:?}"),
            });
        }
    }
    Ok(())
}

impl Sweep {
    pub fn len(&self) -> usize {
        self.segments.len() * self.triggers.len() * self.natures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self) -> Result<(), SweepError> {
        check_unique("where", &self.segments)?;
        check_unique("when", &self.triggers)?;
        check_unique("what", &self.natures)?;
        for trigger in &self.triggers {
            let probe = probe_spec(Segment::MasterSide, *trigger, FaultNature::Provision);
            if let Some(v) = spec_violations(&probe).into_iter().next() {
                return Err(SweepError::OutOfBounds {
                    entry: trigger.to_string(),
                    violation: v,
                });
            }
        }
        for nature in &self.natures {
            let probe = probe_spec(Segment::MasterSide, Trigger::write(1), nature.clone());
            if let Some(v) = spec_violations(&probe).into_iter().next() {
                return Err(SweepError::OutOfBounds {
                    entry: nature.keyword().to_string(),
                    violation: v,
                });
            }
        }
        Ok(())
    }
}

fn probe_spec(location: Segment, trigger: Trigger, nature: FaultNature) -> FaultSpec {
    FaultSpec {
        id: "probe".into(),
        location,
        trigger,
        nature,
    }
}

/// One single-spec faultload per sweep combination, in product order.
///
/// Fault ids are `<prefix>-<index>` with a zero-padded 1-based index.
pub fn generate_campaign(prefix: &str, sweep: &Sweep) -> Result<Vec<Faultload>, SweepError> {
    sweep.check()?;
    let width = sweep.len().to_string().len().max(3);
    let mut out = Vec::with_capacity(sweep.len());
    for &location in &sweep.segments {
        for &trigger in &sweep.triggers {
            for nature in &sweep.natures {
                let id = format!("{prefix}-{:0width$}", out.len() + 1);
                out.push(
                    Faultload::new(vec![FaultSpec {
                        id,
                        location,
                        trigger,
                        nature: nature.clone(),
                    }])
                    .map_err(|mut v| SweepError::OutOfBounds {
                        entry: prefix.to_string(),
                        violation: v.remove(0),
                    })?,
                );
            }
        }
    }
    Ok(out)
}

/// Inclusive `a..b` range or a single number.
fn parse_range(entry: &str, text: &str) -> Result<Vec<u64>, SweepError> {
    let syntax = |reason: &str| SweepError::Syntax {
        entry: entry.to_string(),
        reason: reason.to_string(),
    };
    match text.split_once("..") {
        Some((a, b)) => {
            let a = parse_u64(a).ok_or_else(|| syntax("range start is not a number"))?;
            let b = parse_u64(b).ok_or_else(|| syntax("range end is not a number"))?;
            if a > b {
                return Err(syntax("range is empty"));
            }
            if b - a > 1 << 16 {
                return Err(syntax("range is too large"));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![parse_u64(text).ok_or_else(|| syntax("not a number"))?]),
    }
}

/// Expands `read#1..4` (or `write#2`) into triggers.
pub fn parse_trigger_sweep(entry: &str) -> Result<Vec<Trigger>, SweepError> {
    let (kind, ordinals) = split_trigger(entry).ok_or_else(|| SweepError::Syntax {
        entry: entry.to_string(),
        reason: "expected write#<n> or read#<n>[..<m>]".into(),
    })?;
    parse_range(entry, ordinals)?
        .into_iter()
        .map(|n| {
            u32::try_from(n)
                .map(|ordinal| Trigger { kind, ordinal })
                .map_err(|_| SweepError::Syntax {
                    entry: entry.to_string(),
                    reason: "ordinal does not fit 32 bits".into(),
                })
        })
        .collect()
}

/// Expands a nature written in faultload syntax, where any numeric
/// parameter may be an inclusive range: `flip byte=0 bit=0..7`,
/// `time delay=20..22`, `provision`, `replace bytes=c8`.
pub fn parse_nature_sweep(entry: &str) -> Result<Vec<FaultNature>, SweepError> {
    let syntax = |reason: &str| SweepError::Syntax {
        entry: entry.to_string(),
        reason: reason.to_string(),
    };
    let mut words = entry.split_whitespace();
    let keyword = words.next().ok_or_else(|| syntax("empty nature"))?;
    let mut params: Vec<(&str, &str)> = Vec::new();
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| syntax("expected key=value"))?;
        if params.iter().any(|(pk, _)| *pk == k) {
            return Err(syntax("duplicate parameter"));
        }
        params.push((k, v));
    }
    let allowed: &[&str] = match keyword {
        "time" => &["delay"],
        "provision" => &[],
        "flip" => &["byte", "bit"],
        "replace" => &["bytes"],
        _ => return Err(syntax("unknown nature")),
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(k)) {
        return Err(syntax(&format!("parameter `{k}` not valid here")));
    }
    let get = |k: &str| {
        params
            .iter()
            .find(|(pk, _)| *pk == k)
            .map(|(_, v)| *v)
            .ok_or_else(|| syntax(&format!("missing parameter `{k}`")))
    };
    Ok(match keyword {
        "time" => parse_range(entry, get("delay")?)?
            .into_iter()
            .map(|delay_ticks| FaultNature::Time { delay_ticks })
            .collect(),
        "provision" => vec![FaultNature::Provision],
        "flip" => {
            let bytes = parse_range(entry, get("byte")?)?;
            let bits = parse_range(entry, get("bit")?)?;
            let mut out = Vec::new();
            for &byte in &bytes {
                for &bit in &bits {
                    let bit = u8::try_from(bit).map_err(|_| syntax("bit does not fit a byte"))?;
                    out.push(FaultNature::flip(byte as usize, bit));
                }
            }
            out
        }
        _ => {
            let bytes = hex::decode(get("bytes")?).map_err(|_| syntax("bytes must be hex"))?;
            vec![FaultNature::replace(bytes)]
        }
    })
}
