use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::AttestationError;
use crate::agent_id::IdValidation;
use crate::capability::CapabilityPath;
use crate::uri::AgentUri;

/// Token payload. Timestamps serialize as RFC 3339 UTC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttestationClaims {
    pub iss: String,
    pub sub: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aud: Option<String>,
    pub iat: DateTime<Utc>,
    pub exp: DateTime<Utc>,
    pub capabilities: Vec<CapabilityPath>,
}

impl AttestationClaims {
    /// Claims for `uri`, issued by its own trust root.
    pub fn for_agent(uri: &AgentUri, capabilities: Vec<CapabilityPath>, iat: DateTime<Utc>, exp: DateTime<Utc>) -> Self {
        AttestationClaims {
            iss: uri.trust_root().to_string(),
            sub: uri.canonical().into_string(),
            aud: None,
            iat,
            exp,
            capabilities,
        }
    }

    pub fn with_audience(mut self, aud: impl Into<String>) -> Self {
        self.aud = Some(aud.into());
        self
    }

    pub fn validate(&self) -> Result<(), AttestationError> {
        let invalid = |m: String| Err(AttestationError::InvalidClaims(m));
        if self.iat >= self.exp {
            return invalid(format!("iat {} is not before exp {}", self.iat, self.exp));
        }
        if self.capabilities.is_empty() {
            return invalid("capabilities must not be empty".into());
        }
        let sub = match AgentUri::parse_with(&self.sub, IdValidation::Lenient) {
            Ok(uri) => uri,
            Err(e) => return invalid(format!("sub: {e}")),
        };
        if sub.canonical().as_str() != self.sub {
            return invalid(format!("sub `{}` is not in canonical form", self.sub));
        }
        if sub.trust_root().as_str() != self.iss {
            return invalid(format!("sub trust root `{}` differs from iss `{}`", sub.trust_root(), self.iss));
        }
        if matches!(&self.aud, Some(a) if a.is_empty()) {
            return invalid("aud must not be empty when present".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn sample() -> AttestationClaims {
        let uri = AgentUri::parse("agent://acme.com/workflow/approval/invoice/agent_01h455vb4pex5vsknk084sn02q").unwrap();
        let iat = Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap();
        AttestationClaims::for_agent(&uri, vec!["workflow/approval/invoice".parse().unwrap()], iat, iat + chrono::TimeDelta::days(30))
    }

    #[test]
    fn json_shape() {
        let json = serde_json::to_value(sample()).unwrap();
        assert_eq!(json["iss"], "acme.com");
        assert_eq!(json["iat"], "2026-01-01T00:00:00Z");
        assert_eq!(json["exp"], "2026-01-31T00:00:00Z");
        assert_eq!(json["capabilities"][0], "workflow/approval/invoice");
        assert!(json.get("aud").is_none());
    }

    #[test]
    fn validation_failures() {
        assert!(sample().validate().is_ok());

        let mut c = sample();
        c.exp = c.iat;
        assert!(c.validate().is_err());

        let mut c = sample();
        c.capabilities.clear();
        assert!(c.validate().is_err());

        let mut c = sample();
        c.iss = "globex.com".into();
        assert!(c.validate().is_err());

        let mut c = sample();
        c.sub = c.sub.to_uppercase().replace("AGENT://", "agent://");
        assert!(c.validate().is_err());

        assert!(sample().with_audience("").validate().is_err());
    }

    #[test]
    fn capabilities_deserialize_canonically() {
        let c: AttestationClaims = serde_json::from_str(
            r#"{"iss":"acme.com","sub":"agent://acme.com/w/agent_01h455vb4pex5vsknk084sn02q",
                "iat":"2026-01-01T00:00:00+02:00","exp":"2026-02-01T00:00:00Z","capabilities":["/Workflow"]}"#,
        )
        .unwrap();
        assert_eq!(c.capabilities[0].canonical(), "workflow");
        assert_eq!(c.iat, Utc.with_ymd_and_hms(2025, 12, 31, 22, 0, 0).unwrap());
    }
}
