//! TypeID agent identifiers: `agent_` followed by a base32 UUIDv7.

use std::fmt;
use std::str::FromStr;

use crate::base32::{self, DecodeError};
use crate::error::ParseError;

pub const ID_PREFIX: &str = "agent";
const ID_PREFIX_WITH_SEP: &str = "agent_";

/// Largest timestamp representable in the 48-bit UUIDv7 field.
pub const MAX_UNIX_MILLIS: u64 = (1 << 48) - 1;

/// Mask for the 74 random bits carried by a UUIDv7.
pub const RANDOM_MASK: u128 = (1 << 74) - 1;

/// How much of the UUID structure is checked when parsing an identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdValidation {
    /// Require UUID version 7 and the RFC 4122 variant.
    #[default]
    Strict,
    /// Accept any well-formed 26-symbol suffix.
    Lenient,
}

/// Agent identifier. The suffix is stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentId {
    suffix: String,
    uuid: u128,
}

impl AgentId {
    /// Builds a UUIDv7 from a millisecond timestamp and 74 random bits
    /// (higher bits of `random_bits` are ignored).
    pub fn new(unix_millis: u64, random_bits: u128) -> Result<Self, ParseError> {
        if unix_millis > MAX_UNIX_MILLIS {
            return Err(ParseError::TimestampOverflow(unix_millis));
        }
        let random = random_bits & RANDOM_MASK;
        let rand_a = (random >> 62) & 0xfff;
        let rand_b = random & ((1 << 62) - 1);
        let uuid = (u128::from(unix_millis) << 80) | (0x7 << 76) | (rand_a << 64) | (0b10 << 62) | rand_b;
        Ok(Self::from_uuid(uuid))
    }

    /// Wraps an arbitrary 128-bit value without checking version bits.
    pub fn from_uuid(uuid: u128) -> Self {
        AgentId { suffix: base32::encode(uuid), uuid }
    }

    /// Parses `agent_<suffix>` (either case).
    pub fn parse(text: &str, validation: IdValidation) -> Result<Self, ParseError> {
        let suffix = match text.get(..ID_PREFIX_WITH_SEP.len()) {
            Some(p) if p.eq_ignore_ascii_case(ID_PREFIX_WITH_SEP) => &text[ID_PREFIX_WITH_SEP.len()..],
            _ => return Err(ParseError::BadAgentId(format!("missing `{ID_PREFIX_WITH_SEP}` prefix"))),
        };
        Self::parse_suffix(suffix, validation)
    }

    pub fn parse_suffix(suffix: &str, validation: IdValidation) -> Result<Self, ParseError> {
        let uuid = base32::decode(suffix).map_err(|e| {
            ParseError::BadAgentId(match e {
                DecodeError::Length(n) => format!("suffix has {n} characters, expected 26"),
                DecodeError::Symbol(c) => format!("`{c}` is not a base32 symbol"),
                DecodeError::Overflow => "suffix exceeds 128 bits".to_string(),
            })
        })?;
        if validation == IdValidation::Strict {
            if version(uuid) != 7 {
                return Err(ParseError::BadAgentId(format!("uuid version {} is not 7", version(uuid))));
            }
            if (uuid >> 62) & 0b11 != 0b10 {
                return Err(ParseError::BadAgentId("uuid variant is not RFC 4122".into()));
            }
        }
        Ok(AgentId { suffix: suffix.to_ascii_lowercase(), uuid })
    }

    pub fn suffix(&self) -> &str {
        &self.suffix
    }

    pub fn uuid(&self) -> u128 {
        self.uuid
    }

    /// The 48-bit creation timestamp, in Unix milliseconds.
    pub fn unix_millis(&self) -> u64 {
        (self.uuid >> 80) as u64
    }

    pub fn version(&self) -> u8 {
        version(self.uuid)
    }

    /// Hyphenated UUID text, e.g. `01890a5d-ac96-774b-bcce-b302099a8057`.
    pub fn uuid_string(&self) -> String {
        let h = format!("{:032x}", self.uuid);
        format!("{}-{}-{}-{}-{}", &h[..8], &h[8..12], &h[12..16], &h[16..20], &h[20..])
    }

    /// Length of the serialized form in octets.
    pub(crate) fn text_len(&self) -> usize {
        ID_PREFIX_WITH_SEP.len() + self.suffix.len()
    }
}

fn version(uuid: u128) -> u8 {
    ((uuid >> 76) & 0xf) as u8
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{ID_PREFIX_WITH_SEP}{}", self.suffix)
    }
}

impl FromStr for AgentId {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentId::parse(s, IdValidation::Strict)
    }
}
