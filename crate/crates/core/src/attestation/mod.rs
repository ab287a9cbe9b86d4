//! Capability attestations carried as PASETO v4.public tokens.
//!
//! A trust root signs claims binding an agent's canonical URI (`sub`) to the
//! capability paths it may claim. Verifiers check the token against the
//! trust root's published key document, usually served from
//! `https://{trust-root}/.well-known/agent-keys.json`.

mod cache;
mod claims;
mod keys;
pub mod paseto;

use chrono::{DateTime, TimeDelta, Utc};
use ed25519_dalek::SigningKey;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::uri::AgentUri;

pub use cache::{DirectoryKeySource, KeyCache, KeyFetch, KeySource, MemoryKeySource, SourceError, DEFAULT_CACHE_TTL_SECS};
pub use claims::AttestationClaims;
pub use keys::{parse_key_document, select_key, KeyDocument, VerificationKey, ALGORITHM_ED25519};

/// Default tolerance for clock skew on every time comparison.
pub const DEFAULT_LEEWAY_SECS: i64 = 60;

pub fn well_known_url(trust_root: &crate::TrustRoot) -> String {
    format!("https://{trust_root}/.well-known/agent-keys.json")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttestationError {
    #[error("invalid claims: {0}")]
    InvalidClaims(String),
    #[error("malformed token: {0}")]
    MalformedToken(String),
    #[error("no key with kid `{0}`")]
    UnknownKid(String),
    #[error("key `{0}` is revoked")]
    KeyRevoked(String),
    #[error("key `{0}` is outside its validity window")]
    KeyOutsideValidity(String),
    #[error("signature verification failed")]
    BadSignature,
    #[error("attestation expired at {0}")]
    Expired(DateTime<Utc>),
    #[error("attestation issued in the future ({0})")]
    IssuedInFuture(DateTime<Utc>),
    #[error("issuer `{found}` does not match trust root `{expected}`")]
    IssuerMismatch { expected: String, found: String },
    #[error("subject `{found}` does not match `{expected}`")]
    SubjectMismatch { expected: String, found: String },
    #[error("audience `{aud}` does not admit {}", verifier.as_deref().map_or("an anonymous verifier".to_string(), |v| format!("verifier `{v}`")))]
    AudienceMismatch { aud: String, verifier: Option<String> },
    #[error("capabilities do not cover `{0}`")]
    CapabilityNotCovered(String),
    #[error("malformed key document: {0}")]
    MalformedDocument(String),
    #[error("unsupported key algorithm `{0}`")]
    UnsupportedAlgorithm(String),
    #[error("trust root `{root}` is not in the trusted set")]
    UntrustedRoot { root: String },
    #[error("keys for `{root}` unavailable (stale cache: {stale_cache})")]
    TrustRootUnavailable { root: String, stale_cache: bool },
}

/// Coarse grouping of failures, used for reporting and exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    /// Key selection or signature check failed.
    Signature,
    /// Signature was fine but a claim check failed.
    Claim,
    /// Inputs could not be decoded or keys could not be obtained.
    Input,
}

impl AttestationError {
    pub fn name(&self) -> &'static str {
        use AttestationError::*;
        match self {
            InvalidClaims(_) => "InvalidClaims",
            MalformedToken(_) => "MalformedToken",
            UnknownKid(_) => "UnknownKid",
            KeyRevoked(_) => "KeyRevoked",
            KeyOutsideValidity(_) => "KeyOutsideValidity",
            BadSignature => "BadSignature",
            Expired(_) => "Expired",
            IssuedInFuture(_) => "IssuedInFuture",
            IssuerMismatch { .. } => "IssuerMismatch",
            SubjectMismatch { .. } => "SubjectMismatch",
            AudienceMismatch { .. } => "AudienceMismatch",
            CapabilityNotCovered(_) => "CapabilityNotCovered",
            MalformedDocument(_) => "MalformedDocument",
            UnsupportedAlgorithm(_) => "UnsupportedAlgorithm",
            UntrustedRoot { .. } => "UntrustedRoot",
            TrustRootUnavailable { .. } => "TrustRootUnavailable",
        }
    }

    pub fn class(&self) -> FailureClass {
        use AttestationError::*;
        match self {
            UnknownKid(_) | KeyRevoked(_) | KeyOutsideValidity(_) | BadSignature => FailureClass::Signature,
            Expired(_) | IssuedInFuture(_) | IssuerMismatch { .. } | SubjectMismatch { .. } | AudienceMismatch { .. } | CapabilityNotCovered(_) => {
                FailureClass::Claim
            }
            InvalidClaims(_) | MalformedToken(_) | MalformedDocument(_) | UnsupportedAlgorithm(_) | UntrustedRoot { .. } | TrustRootUnavailable { .. } => {
                FailureClass::Input
            }
        }
    }

    /// Failures that a fresher key document might resolve.
    pub fn may_resolve_on_refresh(&self) -> bool {
        matches!(
            self,
            AttestationError::UnknownKid(_) | AttestationError::BadSignature | AttestationError::KeyOutsideValidity(_)
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Footer {
    kid: String,
}

/// Successful verification: the authenticated claims and the key used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationOutcome {
    pub claims: AttestationClaims,
    pub verified_with: String,
}

/// Signs `claims` under `signing_key`, recording `kid` in the footer.
pub fn issue_attestation(claims: &AttestationClaims, signing_key: &SigningKey, kid: &str) -> Result<String, AttestationError> {
    claims.validate()?;
    let payload = serde_json::to_vec(claims).map_err(|e| AttestationError::InvalidClaims(e.to_string()))?;
    let footer = serde_json::to_vec(&Footer { kid: kid.to_string() }).expect("footer serializes");
    Ok(paseto::sign(signing_key, &payload, &footer, b""))
}

/// Reads the `kid` from a token footer without verifying anything.
pub fn token_kid(token: &str) -> Result<String, AttestationError> {
    let parsed = paseto::UntrustedToken::parse(token)?;
    footer_kid(parsed.footer())
}

fn footer_kid(footer: &[u8]) -> Result<String, AttestationError> {
    serde_json::from_slice::<Footer>(footer)
        .map(|f| f.kid)
        .map_err(|e| AttestationError::MalformedToken(format!("footer: {e}")))
}

/// Verification settings.
#[derive(Debug, Clone, Copy)]
pub struct Verifier {
    pub leeway: TimeDelta,
}

impl Default for Verifier {
    fn default() -> Self {
        Verifier { leeway: TimeDelta::seconds(DEFAULT_LEEWAY_SECS) }
    }
}

impl Verifier {
    pub fn with_leeway(leeway: TimeDelta) -> Self {
        Verifier { leeway }
    }

    /// Runs every check in order and reports the first that fails:
    /// key document scope, key selection, signature, expiry, issuer,
    /// subject, audience, capability coverage.
    pub fn verify(
        &self,
        token: &str,
        uri: &AgentUri,
        keys: &KeyDocument,
        now: DateTime<Utc>,
        verifier_id: Option<&str>,
    ) -> Result<VerificationOutcome, AttestationError> {
        // Keys published by one trust root never vouch for another's agents.
        if keys.trust_root() != uri.trust_root() {
            return Err(AttestationError::IssuerMismatch {
                expected: uri.trust_root().to_string(),
                found: keys.trust_root().to_string(),
            });
        }

        let parsed = paseto::UntrustedToken::parse(token)?;
        let kid = footer_kid(parsed.footer())?;
        let key = keys::select_key_with_leeway(keys, &kid, now, self.leeway)?;
        let message = parsed.verify(key.verifying_key(), b"")?;
        let claims: AttestationClaims =
            serde_json::from_slice(message).map_err(|e| AttestationError::MalformedToken(format!("claims: {e}")))?;

        if claims.exp + self.leeway <= now {
            return Err(AttestationError::Expired(claims.exp));
        }
        if claims.iat > now + self.leeway {
            return Err(AttestationError::IssuedInFuture(claims.iat));
        }
        if claims.iss != uri.trust_root().as_str() {
            return Err(AttestationError::IssuerMismatch { expected: uri.trust_root().to_string(), found: claims.iss });
        }
        let canonical = uri.canonical();
        if claims.sub != canonical.as_str() {
            return Err(AttestationError::SubjectMismatch { expected: canonical.into_string(), found: claims.sub });
        }
        if let Some(aud) = &claims.aud {
            if verifier_id != Some(aud.as_str()) {
                return Err(AttestationError::AudienceMismatch { aud: aud.clone(), verifier: verifier_id.map(str::to_string) });
            }
        }
        if !crate::capability_covers(uri.capability_path(), &claims.capabilities) {
            return Err(AttestationError::CapabilityNotCovered(uri.capability_path().to_string()));
        }
        Ok(VerificationOutcome { claims, verified_with: kid })
    }
}

/// [`Verifier::verify`] with the default leeway.
pub fn verify_attestation(
    token: &str,
    uri: &AgentUri,
    keys: &KeyDocument,
    now: DateTime<Utc>,
    verifier_id: Option<&str>,
) -> Result<VerificationOutcome, AttestationError> {
    Verifier::default().verify(token, uri, keys, now, verifier_id)
}

/// Verifies against cached keys, refreshing the document once when the
/// failure could be caused by a stale cache (for example a newly rotated
/// key).
pub fn verify_with_cache<S: KeySource>(
    verifier: &Verifier,
    cache: &KeyCache<S>,
    token: &str,
    uri: &AgentUri,
    now: DateTime<Utc>,
    verifier_id: Option<&str>,
) -> Result<VerificationOutcome, AttestationError> {
    let fetched = cache.get(uri.trust_root(), now)?;
    match verifier.verify(token, uri, &fetched.doc, now, verifier_id) {
        Err(e) if e.may_resolve_on_refresh() && fetched.from_cache => {
            let refreshed = match cache.refresh(uri.trust_root(), now) {
                Ok(doc) => doc,
                Err(_) => return Err(e),
            };
            verifier.verify(token, uri, &refreshed, now, verifier_id)
        }
        other => other,
    }
}
