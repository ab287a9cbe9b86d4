//! The `agent://` URI: parsing, canonical form and equivalence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::agent_id::{AgentId, IdValidation};
use crate::capability::CapabilityPath;
use crate::error::ParseError;
use crate::trust_root::TrustRoot;

pub const SCHEME: &str = "agent";

/// Upper bound on the length of a URI, in octets, checked before any
/// normalization.
pub const MAX_URI_LEN: usize = 512;

const SCHEME_SEP: &str = "://";

/// A parsed, validated agent URI.
///
/// Query and fragment are kept verbatim for callers that need them but
/// are not part of the agent's identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentUri {
    trust_root: TrustRoot,
    capability_path: CapabilityPath,
    agent_id: AgentId,
    query: Option<String>,
    fragment: Option<String>,
}

/// Canonical serialization `agent://<trust-root>/<capability-path>/<agent-id>`.
///
/// This exact text is hashed for DHT keys and carried as the attestation
/// subject.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalUri(String);

impl AgentUri {
    /// Parses with strict agent id validation.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        Self::parse_with(text, IdValidation::Strict)
    }

    pub fn parse_with(text: &str, validation: IdValidation) -> Result<Self, ParseError> {
        if text.len() > MAX_URI_LEN {
            return Err(ParseError::TooLong(text.len()));
        }
        let (scheme, rest) = text.split_once(SCHEME_SEP).ok_or(ParseError::BadScheme)?;
        if !scheme.eq_ignore_ascii_case(SCHEME) {
            return Err(ParseError::BadScheme);
        }

        let (rest, fragment) = match rest.split_once('#') {
            Some((r, f)) => (r, Some(f.to_string())),
            None => (rest, None),
        };
        let (rest, query) = match rest.split_once('?') {
            Some((r, q)) => (r, Some(q.to_string())),
            None => (rest, None),
        };

        let (authority, path) = rest.split_once('/').unwrap_or((rest, ""));
        let trust_root = TrustRoot::parse(authority)?;

        let path = path.strip_suffix('/').unwrap_or(path);
        if path.is_empty() {
            return Err(ParseError::EmptyCapabilityPath);
        }
        let (caps, id) = match path.rsplit_once('/') {
            Some((caps, id)) => (caps, id),
            None => ("", path),
        };
        let agent_id = AgentId::parse(id, validation)?;
        if caps.is_empty() {
            return Err(ParseError::EmptyCapabilityPath);
        }
        let capability_path = CapabilityPath::parse(caps)?;

        Ok(AgentUri { trust_root, capability_path, agent_id, query, fragment })
    }

    /// Assembles a URI from validated parts, enforcing the length bound on
    /// the canonical form.
    pub fn new(trust_root: TrustRoot, capability_path: CapabilityPath, agent_id: AgentId) -> Result<Self, ParseError> {
        let uri = AgentUri { trust_root, capability_path, agent_id, query: None, fragment: None };
        let len = uri.canonical_len();
        if len > MAX_URI_LEN {
            return Err(ParseError::TooLong(len));
        }
        Ok(uri)
    }

    pub fn with_query(mut self, query: Option<String>) -> Self {
        self.query = query;
        self
    }

    pub fn with_fragment(mut self, fragment: Option<String>) -> Self {
        self.fragment = fragment;
        self
    }

    pub fn trust_root(&self) -> &TrustRoot {
        &self.trust_root
    }

    pub fn capability_path(&self) -> &CapabilityPath {
        &self.capability_path
    }

    pub fn agent_id(&self) -> &AgentId {
        &self.agent_id
    }

    pub fn query(&self) -> Option<&str> {
        self.query.as_deref()
    }

    pub fn fragment(&self) -> Option<&str> {
        self.fragment.as_deref()
    }

    pub fn canonical(&self) -> CanonicalUri {
        let mut text = String::with_capacity(self.canonical_len());
        text.push_str(SCHEME);
        text.push_str(SCHEME_SEP);
        text.push_str(self.trust_root.as_str());
        for seg in self.capability_path.segments() {
            text.push('/');
            text.push_str(seg);
        }
        text.push('/');
        text.push_str("agent_");
        text.push_str(self.agent_id.suffix());
        CanonicalUri(text)
    }

    /// Same agent iff canonical forms are byte-identical.
    pub fn equivalent(&self, other: &AgentUri) -> bool {
        self.canonical() == other.canonical()
    }

    fn canonical_len(&self) -> usize {
        SCHEME.len() + SCHEME_SEP.len() + self.trust_root.as_str().len() + 1 + self.capability_path.text_len() + 1 + self.agent_id.text_len()
    }
}

pub fn canonicalize(uri: &AgentUri) -> CanonicalUri {
    uri.canonical()
}

pub fn uris_equivalent(a: &AgentUri, b: &AgentUri) -> bool {
    a.equivalent(b)
}

/// Whole-segment prefix test on capability paths.
pub fn path_starts_with(path: &CapabilityPath, prefix: &CapabilityPath) -> bool {
    path.starts_with(prefix)
}

impl fmt::Display for AgentUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{SCHEME}{SCHEME_SEP}{}/{}/{}", self.trust_root, self.capability_path, self.agent_id)?;
        if let Some(q) = &self.query {
            write!(f, "?{q}")?;
        }
        if let Some(frag) = &self.fragment {
            write!(f, "#{frag}")?;
        }
        Ok(())
    }
}

impl FromStr for AgentUri {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentUri::parse(s)
    }
}

impl CanonicalUri {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Re-parses the canonical text (leniently: the id was already accepted
    /// once).
    pub fn to_uri(&self) -> AgentUri {
        AgentUri::parse_with(&self.0, IdValidation::Lenient).expect("canonical text always parses")
    }
}

impl fmt::Display for CanonicalUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for CanonicalUri {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Serialize for CanonicalUri {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for CanonicalUri {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let uri = AgentUri::parse_with(&s, IdValidation::Lenient).map_err(serde::de::Error::custom)?;
        Ok(uri.canonical())
    }
}
