//! Scenarios and their TOML configuration.
//!
//! Every key is optional except `name`; omitted keys take the defaults of
//! [`Scenario::new`]. A faultload is given either inline as `faultload`
//! (faultload text) or as `faultload_file`, a path relative to the scenario
//! file.
//!
//! ```toml
//! name = "timeout-on-second-read"
//! seed = 7
//! n_requests = 4
//! timeout_ticks = 10
//! expected_range = [0, 127]
//! fem_mode = "busy"        # or "idle"
//! link = "fem"             # or "direct" (no FEM on the bus)
//! max_ticks = 1000
//! expect = ["SutDetected"]
//! faultload = """
//! version 1
//! fault id=d1 where=slave-side when=read#2 what=time delay=50
//! """
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{Segment, MAX_ADDRESS};
use crate::devices::{ByteRange, CommandSet, DuplicateCommandByte, ObcConfig, SlpConfig};
use crate::faultload::{
    parse_faultload, serialize_faultload, FaultNature, FaultSpec, Faultload, ParseError, Trigger,
    Violation,
};

use super::oracle::Outcome;

/// Largest read the OBC may request in one transfer.
pub const MAX_READ_LEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FemStart {
    Idle,
    Busy,
}

/// How the OBC and SLP are wired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    /// OBC - FEM - SLP.
    Fem,
    /// OBC - SLP with no interceptor.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub slp_address: u8,
    pub n_requests: u32,
    pub timeout_ticks: u64,
    pub expected_range: ByteRange,
    pub fem_mode_at_start: FemStart,
    pub link: Link,
    pub faultload: Faultload,
    pub max_ticks: u64,
    pub retries: u32,
    pub read_len: usize,
    pub write_settle_ticks: u64,
    pub commands: CommandSet,
    /// Acceptable outcomes. `None` means the default expectation.
    pub expect: Option<Vec<Outcome>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("name must be non-empty and use only [A-Za-z0-9_.-]: `{0}`")]
    InvalidName(String),
    #[error("slp_address {0:#04x} is outside the 7-bit range")]
    AddressOutOfRange(u8),
    #[error("expected_range [{lo:#04x}, {hi:#04x}] is empty")]
    EmptyRange { lo: u8, hi: u8 },
    #[error("timeout_ticks must be at least 1")]
    ZeroTimeout,
    #[error("read_len must be between 1 and {MAX_READ_LEN}, got {0}")]
    ReadLen(usize),
    #[error("expect must list at least one outcome")]
    EmptyExpectation,
    #[error(transparent)]
    Commands(#[from] DuplicateCommandByte),
    #[error("faultload: {0}")]
    Faultload(Violation),
}

impl Scenario {
    /// Fault-free scenario with default parameters.
    pub fn new(name: impl Into<String>) -> Self {
        let obc = ObcConfig::default();
        Scenario {
            name: name.into(),
            seed: 1,
            slp_address: obc.address,
            n_requests: obc.n_requests,
            timeout_ticks: obc.timeout_ticks,
            expected_range: obc.expected_range,
            fem_mode_at_start: FemStart::Busy,
            link: Link::Fem,
            faultload: Faultload::empty(),
            max_ticks: 1000,
            retries: obc.retries,
            read_len: obc.read_len,
            write_settle_ticks: obc.write_settle_ticks,
            commands: obc.commands,
            expect: None,
        }
    }

    pub fn with_faults(mut self, specs: Vec<FaultSpec>) -> Self {
        self.faultload = Faultload {
            specs,
            ..Faultload::empty()
        };
        self
    }

    /// Tick budget that always suffices for a fault-free run.
    pub fn minimum_budget(n_requests: u32) -> u64 {
        4 * (2 + 2 * u64::from(n_requests))
    }

    pub fn obc_config(&self) -> ObcConfig {
        ObcConfig {
            address: self.slp_address,
            commands: self.commands,
            n_requests: self.n_requests,
            timeout_ticks: self.timeout_ticks,
            expected_range: self.expected_range,
            retries: self.retries,
            read_len: self.read_len,
            write_settle_ticks: self.write_settle_ticks,
        }
    }

    pub fn slp_config(&self) -> SlpConfig {
        SlpConfig {
            address: self.slp_address,
            commands: self.commands,
            seed: self.seed,
        }
    }

    /// Outcomes that count as success for this scenario.
    pub fn expectation(&self) -> Vec<Outcome> {
        match &self.expect {
            Some(list) => list.clone(),
            None if self.faultload.is_empty() => vec![Outcome::FaultFreeNominal],
            None => vec![Outcome::FaultFreeNominal, Outcome::SutDetected],
        }
    }

    pub fn validate(&self) -> Result<(), Vec<ScenarioError>> {
        let mut errs = Vec::new();
        if !is_valid_name(&self.name) {
            errs.push(ScenarioError::InvalidName(self.name.clone()));
        }
        if self.slp_address > MAX_ADDRESS {
            errs.push(ScenarioError::AddressOutOfRange(self.slp_address));
        }
        if self.expected_range.lo > self.expected_range.hi {
            errs.push(ScenarioError::EmptyRange {
                lo: self.expected_range.lo,
                hi: self.expected_range.hi,
            });
        }
        if self.timeout_ticks == 0 {
            errs.push(ScenarioError::ZeroTimeout);
        }
        if self.read_len == 0 || self.read_len > MAX_READ_LEN {
            errs.push(ScenarioError::ReadLen(self.read_len));
        }
        if self.expect.as_ref().is_some_and(|e| e.is_empty()) {
            errs.push(ScenarioError::EmptyExpectation);
        }
        if let Err(e) = self.commands.check() {
            errs.push(e.into());
        }
        errs.extend(
            self.faultload
                .violations()
                .into_iter()
                .map(ScenarioError::Faultload),
        );
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            name: Some(self.name.clone()),
            seed: Some(self.seed),
            slp_address: Some(self.slp_address),
            n_requests: Some(self.n_requests),
            timeout_ticks: Some(self.timeout_ticks),
            expected_range: Some(self.expected_range),
            fem_mode: Some(self.fem_mode_at_start),
            link: Some(self.link),
            max_ticks: Some(self.max_ticks),
            retries: Some(self.retries),
            read_len: Some(self.read_len),
            write_settle_ticks: Some(self.write_settle_ticks),
            expect: self.expect.clone(),
            faultload: Some(serialize_faultload(&self.faultload)),
            faultload_file: None,
            commands: Some(self.commands),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_config()).expect("scenario serializes")
    }

    /// Parses a scenario; `base` resolves a relative `faultload_file`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Scenario, ConfigError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Toml(e.message().to_string()))?;
        cfg.into_scenario(base)
    }

    pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Scenario::from_toml(&text, path.parent())
    }
}

fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !name.starts_with('.')
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
    #[error("malformed config: {0}")]
    Toml(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("give either `faultload` or `faultload_file`, not both")]
    TwoFaultloads,
    #[error("faultload: {}", join(.0))]
    Faultload(Vec<ParseError>),
    #[error("invalid scenario: {}", join(.0))]
    Invalid(Vec<ScenarioError>),
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// On-disk form of a [`Scenario`]. Also the `[template]` of a campaign.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slp_address: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_requests: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ticks: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_range: Option<ByteRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fem_mode: Option<FemStart>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<Link>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ticks: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retries: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub read_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_settle_ticks: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Vec<Outcome>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faultload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faultload_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commands: Option<CommandSet>,
}

impl ScenarioConfig {
    /// Builds and validates the scenario.
    pub fn into_scenario(self, base: Option<&Path>) -> Result<Scenario, ConfigError> {
        let name = self.name.clone().ok_or(ConfigError::MissingKey("name"))?;
        let sc = self.into_unvalidated(name, base)?;
        sc.validate().map_err(ConfigError::Invalid)?;
        Ok(sc)
    }

    /// Builds a scenario without validating it, under an explicit name.
    pub fn into_unvalidated(
        self,
        name: String,
        base: Option<&Path>,
    ) -> Result<Scenario, ConfigError> {
        let d = Scenario::new(name);
        let faultload = match (self.faultload, self.faultload_file) {
            (Some(_), Some(_)) => return Err(ConfigError::TwoFaultloads),
            (Some(text), None) => parse_faultload(&text).map_err(ConfigError::Faultload)?,
            (None, Some(file)) => {
                let path = base.map_or_else(|| PathBuf::from(&file), |b| b.join(&file));
                let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
                parse_faultload(&text).map_err(ConfigError::Faultload)?
            }
            (None, None) => Faultload::empty(),
        };
        Ok(Scenario {
            seed: self.seed.unwrap_or(d.seed),
            slp_address: self.slp_address.unwrap_or(d.slp_address),
            n_requests: self.n_requests.unwrap_or(d.n_requests),
            timeout_ticks: self.timeout_ticks.unwrap_or(d.timeout_ticks),
            expected_range: self.expected_range.unwrap_or(d.expected_range),
            fem_mode_at_start: self.fem_mode.unwrap_or(d.fem_mode_at_start),
            link: self.link.unwrap_or(d.link),
            faultload,
            max_ticks: self.max_ticks.unwrap_or(d.max_ticks),
            retries: self.retries.unwrap_or(d.retries),
            read_len: self.read_len.unwrap_or(d.read_len),
            write_settle_ticks: self.write_settle_ticks.unwrap_or(d.write_settle_ticks),
            commands: self.commands.unwrap_or(d.commands),
            expect: self.expect,
            name: d.name,
        })
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["fig4-normal", "fig4-timeout", "fig4-flip", "fig4-out"];

/// The four reference behaviors: normal operation, a response delayed past
/// the timeout, a bit-flipped sample, and an out-of-range sample.
pub fn builtin(name: &str) -> Option<Scenario> {
    let base = Scenario {
        seed: 7,
        ..Scenario::new(name)
    };
    let spec = |id: &str, trigger, nature| FaultSpec {
        id: id.into(),
        location: Segment::SlaveSide,
        trigger,
        nature,
    };
    Some(match name {
        "fig4-normal" => base,
        "fig4-timeout" => Scenario {
            expect: Some(vec![Outcome::SutDetected]),
            ..base.with_faults(vec![spec(
                "delay-read2",
                Trigger::read(2),
                FaultNature::Time { delay_ticks: 50 },
            )])
        },
        "fig4-flip" => Scenario {
            expect: Some(vec![Outcome::SutDetected, Outcome::SutSilentCorruption]),
            ..base.with_faults(vec![spec(
                "flip-read1",
                Trigger::read(1),
                FaultNature::flip(0, 0),
            )])
        },
        "fig4-out" => Scenario {
            expect: Some(vec![Outcome::SutDetected]),
            ..base.with_faults(vec![spec(
                "out-read1",
                Trigger::read(1),
                FaultNature::replace(vec![0xC8]),
            )])
        },
        _ => return None,
    })
}
