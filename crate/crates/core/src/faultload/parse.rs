use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::bus::Segment;

use super::{
    spec_violations, FaultNature, FaultSpec, Faultload, Trigger, TriggerKind, ValueForm,
    FORMAT_VERSION,
};

/// One schema violation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("missing `version` header line")]
    MissingVersion,
    #[error("version mismatch: expected {FORMAT_VERSION}, found `{0}`")]
    VersionMismatch(String),
    #[error("unknown directive `{0}`")]
    UnknownDirective(String),
    #[error("malformed field `{0}` (expected key=value)")]
    MalformedField(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{key}` is not valid for nature `{nature}`")]
    FieldNotApplicable { key: String, nature: String },
    #[error("duplicate field `{0}`")]
    DuplicateField(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: &'static str,
    },
    #[error("invalid id `{0}` (use letters, digits, `-`, `_`, `.`)")]
    InvalidId(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown nature `{0}`")]
    UnknownNature(String),
    #[error("ordinal must be >= 1")]
    OrdinalZero,
    #[error("bit_index out of range: {0} (must be 0..=7)")]
    BitIndexOutOfRange(u64),
    #[error("time fault needs delay >= 1")]
    DelayZero,
    #[error("replacement bytes must be nonempty")]
    EmptyReplacement,
}

/// A violation located at a 1-based line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {violation}")]
pub struct ParseError {
    pub line: usize,
    pub violation: Violation,
}

pub(crate) fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

const FAULT_KEYS: [&str; 8] = [
    "id", "where", "when", "what", "delay", "byte", "bit", "bytes",
];

pub(crate) fn parse_segment(s: &str) -> Option<Segment> {
    Segment::from_name(s)
}

pub(crate) fn parse_u64(s: &str) -> Option<u64> {
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
        s.parse().ok()
    } else {
        None
    }
}

/// Splits `read#3` into its kind and the raw ordinal text.
pub(crate) fn split_trigger(s: &str) -> Option<(TriggerKind, &str)> {
    let (kind, ordinal) = s.split_once('#')?;
    let kind = match kind {
        "write" => TriggerKind::WriteOrdinal,
        "read" => TriggerKind::ReadOrdinal,
        _ => return None,
    };
    Some((kind, ordinal))
}

fn invalid(key: &str, value: &str, reason: &'static str) -> Violation {
    Violation::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason,
    }
}

/// Parses and validates a faultload document, reporting every violation.
pub fn parse_faultload(text: &str) -> Result<Faultload, Vec<ParseError>> {
    let mut errors = Vec::new();
    let mut specs: Vec<FaultSpec> = Vec::new();
    let mut seen_ids: Vec<String> = Vec::new();
    let mut version: Option<String> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        // A word starting with `#` opens a trailing comment.
        let mut words = line.split_whitespace().take_while(|w| !w.starts_with('#'));
        let directive = words.next().unwrap_or_default();
        let mut push = |v: Violation| {
            errors.push(ParseError {
                line: line_no,
                violation: v,
            })
        };
        match directive {
            "version" if version.is_none() && specs.is_empty() => {
                let found: Vec<&str> = words.collect();
                let found = found.join(" ");
                if found != FORMAT_VERSION {
                    push(Violation::VersionMismatch(found.clone()));
                }
                version = Some(found);
            }
            "fault" => {
                if version.is_none() {
                    push(Violation::MissingVersion);
                    // Only report the missing header once.
                    version = Some(String::new());
                }
                let (id, spec) = parse_fault_fields(words, &mut push);
                if let Some(id) = id {
                    if seen_ids.contains(&id) {
                        push(Violation::DuplicateId(id.clone()));
                    }
                    seen_ids.push(id);
                }
                if let Some(spec) = spec {
                    for v in spec_violations(&spec) {
                        push(v);
                    }
                    specs.push(spec);
                }
            }
            other => push(Violation::UnknownDirective(other.to_string())),
        }
    }

    if version.is_none() {
        errors.push(ParseError {
            line: 1,
            violation: Violation::MissingVersion,
        });
    }

    if errors.is_empty() {
        Ok(Faultload {
            version: FORMAT_VERSION.to_string(),
            specs,
        })
    } else {
        errors.sort_by_key(|e| e.line);
        Err(errors)
    }
}

/// Reads the `key=value` fields of one `fault` line. Returns the id when it
/// is usable, and the spec when the line is complete; everything wrong is
/// pushed.
fn parse_fault_fields<'a>(
    words: impl Iterator<Item = &'a str>,
    push: &mut impl FnMut(Violation),
) -> (Option<String>, Option<FaultSpec>) {
    let mut fields: Vec<(&str, &str)> = Vec::new();
    for word in words {
        let Some((key, value)) = word.split_once('=') else {
            push(Violation::MalformedField(word.to_string()));
            continue;
        };
        if !FAULT_KEYS.contains(&key) {
            push(Violation::UnknownField(key.to_string()));
            continue;
        }
        if fields.iter().any(|(k, _)| *k == key) {
            push(Violation::DuplicateField(key.to_string()));
            continue;
        }
        fields.push((key, value));
    }
    let get = |key: &str| fields.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);

    let mut ok = true;
    let id = match get("id") {
        Some(id) if is_valid_id(id) => Some(id.to_string()),
        Some(id) => {
            push(Violation::InvalidId(id.to_string()));
            None
        }
        None => {
            push(Violation::MissingField("id".into()));
            None
        }
    };
    let location = match get("where") {
        Some(w) => parse_segment(w).or_else(|| {
            push(invalid("where", w, "expected master-side or slave-side"));
            None
        }),
        None => {
            push(Violation::MissingField("where".into()));
            None
        }
    };
    let trigger = match get("when") {
        Some(w) => match split_trigger(w) {
            Some((kind, ord)) => match parse_u64(ord) {
                Some(0) => {
                    push(Violation::OrdinalZero);
                    None
                }
                Some(n) if n <= u64::from(u32::MAX) => Some(Trigger {
                    kind,
                    ordinal: n as u32,
                }),
                _ => {
                    push(invalid(
                        "when",
                        w,
                        "ordinal is not a 32-bit unsigned integer",
                    ));
                    None
                }
            },
            None => {
                push(invalid("when", w, "expected write#<n> or read#<n>"));
                None
            }
        },
        None => {
            push(Violation::MissingField("when".into()));
            None
        }
    };

    let what = get("what");
    let allowed: &[&str] = match what {
        Some("time") => &["delay"],
        Some("provision") => &[],
        Some("flip") => &["byte", "bit"],
        Some("replace") => &["bytes"],
        Some(other) => {
            push(Violation::UnknownNature(other.to_string()));
            ok = false;
            &[]
        }
        None => {
            push(Violation::MissingField("what".into()));
            ok = false;
            &[]
        }
    };
    if ok {
        for (key, _) in &fields {
            if matches!(*key, "delay" | "byte" | "bit" | "bytes") && !allowed.contains(key) {
                push(Violation::FieldNotApplicable {
                    key: key.to_string(),
                    nature: what.unwrap_or_default().to_string(),
                });
            }
        }
    }
    let mut number = |key: &str| -> Option<u64> {
        match get(key) {
            Some(v) => parse_u64(v).or_else(|| {
                push(invalid(key, v, "not an unsigned integer"));
                None
            }),
            None => {
                push(Violation::MissingField(key.to_string()));
                None
            }
        }
    };
    let nature = match what {
        Some("time") => match number("delay") {
            Some(0) => {
                push(Violation::DelayZero);
                None
            }
            delay => delay.map(|delay_ticks| FaultNature::Time { delay_ticks }),
        },
        Some("provision") => Some(FaultNature::Provision),
        Some("flip") => {
            let byte = number("byte");
            let bit = number("bit");
            match (byte, bit) {
                (Some(_), Some(bit)) if bit > 7 => {
                    push(Violation::BitIndexOutOfRange(bit));
                    None
                }
                (Some(byte), Some(bit)) => usize::try_from(byte)
                    .ok()
                    .map(|byte_index| FaultNature::flip(byte_index, bit as u8)),
                _ => None,
            }
        }
        Some("replace") => match get("bytes") {
            Some("") => {
                push(Violation::EmptyReplacement);
                None
            }
            Some(v) => match hex::decode(v) {
                Ok(bytes) => Some(FaultNature::replace(bytes)),
                Err(_) => {
                    push(invalid("bytes", v, "expected an even number of hex digits"));
                    None
                }
            },
            None => {
                push(Violation::MissingField("bytes".into()));
                None
            }
        },
        _ => None,
    };

    let spec = match (&id, location, trigger, nature) {
        (Some(id), Some(location), Some(trigger), Some(nature)) => Some(FaultSpec {
            id: id.clone(),
            location,
            trigger,
            nature,
        }),
        _ => None,
    };
    (id, spec)
}

fn write_spec(out: &mut String, spec: &FaultSpec) -> fmt::Result {
    write!(
        out,
        "fault id={} where={} when={} what={}",
        spec.id,
        spec.location,
        spec.trigger,
        spec.nature.keyword()
    )?;
    match &spec.nature {
        FaultNature::Time { delay_ticks } => write!(out, " delay={delay_ticks}")?,
        FaultNature::Provision => {}
        FaultNature::Value(ValueForm::Flip {
            byte_index,
            bit_index,
        }) => write!(out, " byte={byte_index} bit={bit_index}")?,
        FaultNature::Value(ValueForm::Replace { bytes }) => {
            write!(out, " bytes={}", hex::encode(bytes))?
        }
    }
    out.push('\n');
    Ok(())
}

/// Canonical text form of a faultload (see the module docs).
pub fn serialize_faultload(fl: &Faultload) -> String {
    let mut out = format!("version {}\n", fl.version);
    for spec in &fl.specs {
        write_spec(&mut out, spec).expect("writing to a String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str =
        "version 1\nfault id=f1 where=slave-side when=read#1 what=flip byte=0 bit=3\n";

    fn violations(text: &str) -> Vec<Violation> {
        parse_faultload(text)
            .unwrap_err()
            .into_iter()
            .map(|e| e.violation)
            .collect()
    }

    #[test]
    fn trailing_comments_are_ignored() {
        let text = "version 1 # header\nfault id=f1 where=slave-side when=read#1 what=flip byte=0 bit=3 # note\n";
        assert_eq!(
            parse_faultload(text).unwrap(),
            parse_faultload(MINIMAL).unwrap()
        );
        // `#` inside a word is part of the word.
        assert!(parse_faultload(
            "version 1\nfault id=a#b where=slave-side when=read#1 what=provision\n"
        )
        .is_err());
    }

    #[test]
    fn minimal_flip_document() {
        let fl = parse_faultload(MINIMAL).unwrap();
        assert_eq!(fl.specs.len(), 1);
        assert_eq!(fl.specs[0].nature, FaultNature::flip(0, 3));
        assert_eq!(fl.specs[0].trigger, Trigger::read(1));
        assert_eq!(fl.specs[0].location, Segment::SlaveSide);
    }

    #[test]
    fn empty_spec_list_is_pure_monitoring() {
        let fl = parse_faultload("version 1\n").unwrap();
        assert!(fl.is_empty());
        let fl = parse_faultload("# monitoring only\n\nversion 1\n").unwrap();
        assert!(fl.is_empty());
    }

    #[test]
    fn bit_index_nine_is_out_of_range() {
        let errs = parse_faultload(
            "version 1\nfault id=f1 where=slave-side when=read#1 what=flip byte=0 bit=9\n",
        )
        .unwrap_err();
        assert_eq!(errs[0].line, 2);
        assert_eq!(errs[0].violation, Violation::BitIndexOutOfRange(9));
        assert!(errs[0].to_string().contains("bit_index out of range"));
    }

    #[test]
    fn all_violations_are_reported() {
        let text = "version 1\n\
                    fault id=a where=slave-side when=read#0 what=provision\n\
                    fault id=a where=up when=read#1 what=provision colour=red\n\
                    fault id=b where=slave-side when=read#1 what=explode\n\
                    fault id=c where=slave-side when=write#2 what=time\n\
                    fault id=d where=slave-side when=write#2 what=time delay=0 bit=1\n\
                    fault id=e where=slave-side when=write#2 what=replace bytes=\n\
                    fault id=f where=slave-side when=write#2 what=replace bytes=abc\n\
                    frobnicate\n";
        let v = violations(text);
        assert!(v.contains(&Violation::OrdinalZero));
        assert!(v.contains(&Violation::UnknownField("colour".into())));
        assert!(v
            .iter()
            .any(|e| matches!(e, Violation::InvalidValue { key, .. } if key == "where")));
        assert!(v.contains(&Violation::UnknownNature("explode".into())));
        assert!(v.contains(&Violation::MissingField("delay".into())));
        assert!(v.contains(&Violation::DelayZero));
        assert!(v.contains(&Violation::FieldNotApplicable {
            key: "bit".into(),
            nature: "time".into()
        }));
        assert!(v.contains(&Violation::EmptyReplacement));
        assert!(v
            .iter()
            .any(|e| matches!(e, Violation::InvalidValue { key, .. } if key == "bytes")));
        assert!(v.contains(&Violation::UnknownDirective("frobnicate".into())));
    }

    #[test]
    fn duplicate_ids_and_other_errors_listed_together() {
        let text = "version 1\n\
                    fault id=x where=slave-side when=read#1 what=provision\n\
                    fault id=x where=slave-side when=read#2 what=flip byte=0 bit=8\n";
        let errs = parse_faultload(text).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|e| e.line == 3));
    }

    #[test]
    fn version_is_checked() {
        assert_eq!(
            violations("version 2\n"),
            vec![Violation::VersionMismatch("2".into())]
        );
        assert_eq!(
            violations("fault id=a where=slave-side when=read#1 what=provision\n"),
            vec![Violation::MissingVersion]
        );
        assert_eq!(violations(""), vec![Violation::MissingVersion]);
        assert!(violations("version 1\nversion 1\n")
            .contains(&Violation::UnknownDirective("version".into())));
    }

    #[test]
    fn hex_and_decimal_numbers() {
        let fl = parse_faultload(
            "version 1\nfault id=t where=master-side when=write#0x2 what=time delay=0x32\n",
        )
        .unwrap();
        assert_eq!(fl.specs[0].trigger, Trigger::write(2));
        assert_eq!(fl.specs[0].nature, FaultNature::Time { delay_ticks: 50 });
        assert_eq!(
            serialize_faultload(&fl),
            "version 1\nfault id=t where=master-side when=write#2 what=time delay=50\n"
        );
    }

    #[test]
    fn canonical_form_is_exact() {
        let fl = Faultload::new(vec![
            FaultSpec {
                id: "r".into(),
                location: Segment::SlaveSide,
                trigger: Trigger::read(1),
                nature: FaultNature::replace(vec![0xC8, 0x0A]),
            },
            FaultSpec {
                id: "p".into(),
                location: Segment::MasterSide,
                trigger: Trigger::write(3),
                nature: FaultNature::Provision,
            },
        ])
        .unwrap();
        assert_eq!(
            serialize_faultload(&fl),
            "version 1\n\
             fault id=r where=slave-side when=read#1 what=replace bytes=c80a\n\
             fault id=p where=master-side when=write#3 what=provision\n"
        );
    }

    #[test]
    fn field_order_in_input_does_not_matter() {
        let a = parse_faultload(
            "version 1\nfault bit=1 what=flip byte=0 when=read#2 where=slave-side id=q\n",
        )
        .unwrap();
        let b = parse_faultload(
            "version 1\nfault id=q where=slave-side when=read#2 what=flip byte=0 bit=1\n",
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(serialize_faultload(&a), serialize_faultload(&b));
    }

    fn arb_spec(idx: usize) -> impl Strategy<Value = FaultSpec> {
        let nature = prop_oneof![
            (1u64..10_000).prop_map(|d| FaultNature::Time { delay_ticks: d }),
            Just(FaultNature::Provision),
            (0usize..8, 0u8..8).prop_map(|(b, i)| FaultNature::flip(b, i)),
            proptest::collection::vec(any::<u8>(), 1..6).prop_map(FaultNature::replace),
        ];
        (any::<bool>(), any::<bool>(), 1u32..64, nature).prop_map(
            move |(side, kind, ord, nature)| FaultSpec {
                id: format!("f{idx}"),
                location: if side {
                    Segment::MasterSide
                } else {
                    Segment::SlaveSide
                },
                trigger: Trigger {
                    kind: if kind {
                        TriggerKind::WriteOrdinal
                    } else {
                        TriggerKind::ReadOrdinal
                    },
                    ordinal: ord,
                },
                nature,
            },
        )
    }

    fn arb_faultload() -> impl Strategy<Value = Faultload> {
        (0usize..6).prop_flat_map(|n| {
            (0..n)
                .map(arb_spec)
                .collect::<Vec<_>>()
                .prop_map(|specs| Faultload::new(specs).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trip(fl in arb_faultload()) {
            let text = serialize_faultload(&fl);
            let back = parse_faultload(&text).unwrap();
            prop_assert_eq!(&back, &fl);
            prop_assert_eq!(serialize_faultload(&back), text);
        }

        #[test]
        fn invalidating_mutation_is_rejected(fl in arb_faultload(), pick in 0usize..6, which in any::<prop::sample::Index>()) {
            prop_assume!(!fl.specs.is_empty());
            let text = serialize_faultload(&fl);
            let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
            let target = 1 + which.index(fl.specs.len());
            let line = lines[target].clone();
            let mutated = match pick {
                0 => regex_free_replace(&line, "when=", |v| {
                    let (k, _) = v.split_once('#').unwrap();
                    format!("{k}#0")
                }),
                1 => format!("{line} colour=red"),
                2 => line.replace(&format!("id={}", fl.specs[target - 1].id), "id=bad!id"),
                3 => line.replace("what=", "what=x"),
                4 => {
                    lines[0] = "version 9".into();
                    line.clone()
                }
                _ => {
                    // duplicate the line (duplicate id)
                    lines.push(line.clone());
                    line.clone()
                }
            };
            lines[target] = mutated;
            let doc = lines.join("\n");
            prop_assert!(parse_faultload(&doc).is_err(), "accepted mutated doc:\n{}", doc);
        }
    }

    fn regex_free_replace(line: &str, key: &str, f: impl Fn(&str) -> String) -> String {
        line.split(' ')
            .map(|w| match w.strip_prefix(key) {
                Some(v) => format!("{key}{}", f(v)),
                None => w.to_string(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}
