use std::fmt;

use agenturi_core::{AgentUri, CanonicalUri};
use chrono::{DateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::SimError;

/// Simulation time in milliseconds since the network epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn plus_ms(self, ms: u64) -> SimTime {
        SimTime(self.0.saturating_add(ms))
    }

    pub fn to_datetime(self, epoch: DateTime<Utc>) -> DateTime<Utc> {
        epoch + TimeDelta::milliseconds(self.0 as i64)
    }

    pub fn from_datetime(t: DateTime<Utc>, epoch: DateTime<Utc>) -> Option<SimTime> {
        u64::try_from((t - epoch).num_milliseconds()).ok().map(SimTime)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t+{}ms", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub url: String,
    pub protocol: String,
}

impl Endpoint {
    pub fn new(url: impl Into<String>, protocol: impl Into<String>) -> Self {
        Endpoint { url: url.into(), protocol: protocol.into() }
    }

    pub fn https(url: impl Into<String>) -> Self {
        Endpoint::new(url, "https")
    }
}

/// DHT record binding an agent to where it can be reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registration {
    pub agent_uri: CanonicalUri,
    pub endpoints: Vec<Endpoint>,
    pub attestation: Option<String>,
    pub expires_at: SimTime,
    pub registered_at: SimTime,
}

/// How timestamps are rendered in registration JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFormat {
    #[default]
    Rfc3339,
    Ticks,
}

impl Registration {
    pub fn new(uri: &AgentUri, endpoints: Vec<Endpoint>, attestation: Option<String>, now: SimTime, ttl_ms: u64) -> Self {
        Registration { agent_uri: uri.canonical(), endpoints, attestation, registered_at: now, expires_at: now.plus_ms(ttl_ms) }
    }

    pub fn uri(&self) -> AgentUri {
        self.agent_uri.to_uri()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidRegistration(m.to_string()));
        if self.endpoints.is_empty() {
            return bad("at least one endpoint is required");
        }
        if self.endpoints.iter().any(|e| e.url.is_empty()) {
            return bad("endpoint url must not be empty");
        }
        if self.registered_at >= self.expires_at {
            return bad("registered_at must precede expires_at");
        }
        Ok(())
    }

    pub fn is_live(&self, now: SimTime) -> bool {
        self.expires_at > now
    }

    pub fn to_json(&self, format: TimeFormat, epoch: DateTime<Utc>) -> Value {
        let time = |t: SimTime| match format {
            TimeFormat::Ticks => json!(t.0),
            TimeFormat::Rfc3339 => json!(t.to_datetime(epoch)),
        };
        json!({
            "agent_uri": self.agent_uri,
            "endpoints": self.endpoints,
            "attestation": self.attestation,
            "expires_at": time(self.expires_at),
            "registered_at": time(self.registered_at),
        })
    }

    /// Accepts either integer ticks or RFC 3339 strings for each timestamp.
    pub fn from_json(value: &Value, epoch: DateTime<Utc>) -> Result<Self, SimError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            agent_uri: CanonicalUri,
            endpoints: Vec<Endpoint>,
            #[serde(default)]
            attestation: Option<String>,
            expires_at: Value,
            registered_at: Value,
        }
        let raw: Raw = serde_json::from_value(value.clone()).map_err(|e| SimError::InvalidRegistration(e.to_string()))?;
        let time = |v: &Value, field: &str| -> Result<SimTime, SimError> {
            match v {
                Value::Number(n) => n.as_u64().map(SimTime),
                Value::String(s) => DateTime::parse_from_rfc3339(s)
                    .ok()
                    .and_then(|t| SimTime::from_datetime(t.with_timezone(&Utc), epoch)),
                _ => None,
            }
            .ok_or_else(|| SimError::InvalidRegistration(format!("{field}: expected ticks or an RFC 3339 time after the epoch")))
        };
        let reg = Registration {
            agent_uri: raw.agent_uri,
            endpoints: raw.endpoints,
            attestation: raw.attestation,
            expires_at: time(&raw.expires_at, "expires_at")?,
            registered_at: time(&raw.registered_at, "registered_at")?,
        };
        reg.validate()?;
        Ok(reg)
    }
}
