use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;

pub const MAX_LABEL_LEN: usize = 63;
pub const MAX_HOST_LEN: usize = 253;

/// DNS-style hostname of the organization vouching for an agent.
///
/// Stored lowercase without a trailing dot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TrustRoot {
    host: String,
}

impl TrustRoot {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let host = text.strip_suffix('.').unwrap_or(text);
        if host.is_empty() {
            return Err(ParseError::BadTrustRoot("empty host".into()));
        }
        if host.len() > MAX_HOST_LEN {
            return Err(ParseError::BadTrustRoot(format!("host exceeds {MAX_HOST_LEN} octets")));
        }
        for label in host.split('.') {
            check_label(label)?;
        }
        Ok(TrustRoot { host: host.to_ascii_lowercase() })
    }

    pub fn as_str(&self) -> &str {
        &self.host
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.host.split('.')
    }
}

fn check_label(label: &str) -> Result<(), ParseError> {
    if label.is_empty() {
        return Err(ParseError::BadTrustRoot("empty label".into()));
    }
    if label.len() > MAX_LABEL_LEN {
        return Err(ParseError::BadTrustRoot(format!("label `{label}` exceeds {MAX_LABEL_LEN} octets")));
    }
    if let Some(c) = label.chars().find(|c| !(c.is_ascii_alphanumeric() || *c == '-')) {
        return Err(ParseError::BadTrustRoot(format!("`{c}` not allowed in label")));
    }
    if label.starts_with('-') || label.ends_with('-') {
        return Err(ParseError::BadTrustRoot(format!("label `{label}` starts or ends with a hyphen")));
    }
    Ok(())
}

impl fmt::Display for TrustRoot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.host)
    }
}

impl FromStr for TrustRoot {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TrustRoot::parse(s)
    }
}

impl Serialize for TrustRoot {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.host)
    }
}

impl<'de> Deserialize<'de> for TrustRoot {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        TrustRoot::parse(&s).map_err(serde::de::Error::custom)
    }
}
