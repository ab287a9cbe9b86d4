use std::collections::BTreeSet;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use chrono::{DateTime, TimeDelta, Utc};
use ed25519_dalek::VerifyingKey;
use serde::{Deserialize, Serialize};

use super::AttestationError;
use crate::trust_root::TrustRoot;

pub const ALGORITHM_ED25519: &str = "Ed25519";

/// One published verification key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationKey {
    pub kid: String,
    public_key: VerifyingKey,
    pub not_before: DateTime<Utc>,
    pub not_after: DateTime<Utc>,
    pub revoked: bool,
}

impl VerificationKey {
    pub fn new(kid: impl Into<String>, public_key: VerifyingKey, not_before: DateTime<Utc>, not_after: DateTime<Utc>) -> Result<Self, AttestationError> {
        let kid = kid.into();
        if not_before >= not_after {
            return Err(AttestationError::MalformedDocument(format!("key `{kid}`: not_before is not before not_after")));
        }
        Ok(VerificationKey { kid, public_key, not_before, not_after, revoked: false })
    }

    pub fn algorithm(&self) -> &'static str {
        ALGORITHM_ED25519
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.public_key.to_bytes()
    }

    pub fn verifying_key(&self) -> &VerifyingKey {
        &self.public_key
    }

    pub fn valid_at(&self, now: DateTime<Utc>, leeway: TimeDelta) -> bool {
        self.not_before - leeway <= now && now < self.not_after + leeway
    }
}

/// A trust root's published keys plus its revocation list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyDocument {
    trust_root: TrustRoot,
    keys: Vec<VerificationKey>,
    revoked_kids: Vec<String>,
}

impl KeyDocument {
    pub fn new(trust_root: TrustRoot, keys: Vec<VerificationKey>, revoked_kids: Vec<String>) -> Result<Self, AttestationError> {
        let mut seen = BTreeSet::new();
        for k in &keys {
            if !seen.insert(k.kid.as_str()) {
                return Err(AttestationError::MalformedDocument(format!("duplicate kid `{}`", k.kid)));
            }
        }
        Ok(KeyDocument { trust_root, keys, revoked_kids })
    }

    pub fn trust_root(&self) -> &TrustRoot {
        &self.trust_root
    }

    pub fn keys(&self) -> &[VerificationKey] {
        &self.keys
    }

    pub fn revoked_kids(&self) -> &[String] {
        &self.revoked_kids
    }

    pub fn is_revoked(&self, kid: &str) -> bool {
        self.revoked_kids.iter().any(|r| r == kid) || self.keys.iter().any(|k| k.kid == kid && k.revoked)
    }

    pub fn add_key(&mut self, key: VerificationKey) -> Result<(), AttestationError> {
        if self.keys.iter().any(|k| k.kid == key.kid) {
            return Err(AttestationError::MalformedDocument(format!("duplicate kid `{}`", key.kid)));
        }
        self.keys.push(key);
        Ok(())
    }

    pub fn revoke(&mut self, kid: impl Into<String>) {
        let kid = kid.into();
        if !self.revoked_kids.contains(&kid) {
            self.revoked_kids.push(kid);
        }
    }

    pub fn to_json(&self) -> String {
        let doc = DocumentJson {
            trust_root: self.trust_root.to_string(),
            keys: self
                .keys
                .iter()
                .map(|k| KeyJson {
                    kid: k.kid.clone(),
                    algorithm: ALGORITHM_ED25519.to_string(),
                    public_key: STANDARD.encode(k.public_key()),
                    not_before: k.not_before,
                    not_after: k.not_after,
                    revoked: k.revoked,
                })
                .collect(),
            revoked_keys: self.revoked_kids.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("document serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct DocumentJson {
    trust_root: String,
    keys: Vec<KeyJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    revoked_keys: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct KeyJson {
    kid: String,
    algorithm: String,
    public_key: String,
    not_before: DateTime<Utc>,
    not_after: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    revoked: bool,
}

/// Parses the well-known key document format.
pub fn parse_key_document(json_text: &str) -> Result<KeyDocument, AttestationError> {
    let malformed = |m: String| AttestationError::MalformedDocument(m);
    let raw: DocumentJson = serde_json::from_str(json_text).map_err(|e| malformed(e.to_string()))?;
    let trust_root = TrustRoot::parse(&raw.trust_root).map_err(|e| malformed(format!("trust_root: {e}")))?;
    let mut keys = Vec::with_capacity(raw.keys.len());
    for k in raw.keys {
        if k.algorithm != ALGORITHM_ED25519 {
            return Err(AttestationError::UnsupportedAlgorithm(k.algorithm));
        }
        let bytes = STANDARD
            .decode(k.public_key.trim())
            .map_err(|e| malformed(format!("key `{}`: public_key: {e}", k.kid)))?;
        let bytes: [u8; 32] = bytes
            .try_into()
            .map_err(|b: Vec<u8>| malformed(format!("key `{}`: public_key is {} octets, expected 32", k.kid, b.len())))?;
        let public_key =
            VerifyingKey::from_bytes(&bytes).map_err(|e| malformed(format!("key `{}`: public_key: {e}", k.kid)))?;
        let mut key = VerificationKey::new(k.kid, public_key, k.not_before, k.not_after)?;
        key.revoked = k.revoked;
        keys.push(key);
    }
    KeyDocument::new(trust_root, keys, raw.revoked_keys)
}

/// Picks the key named `kid` if it is not revoked and `now` lies within
/// `[not_before, not_after)`.
pub fn select_key<'a>(doc: &'a KeyDocument, kid: &str, now: DateTime<Utc>) -> Result<&'a VerificationKey, AttestationError> {
    select_key_with_leeway(doc, kid, now, TimeDelta::zero())
}

pub(crate) fn select_key_with_leeway<'a>(
    doc: &'a KeyDocument,
    kid: &str,
    now: DateTime<Utc>,
    leeway: TimeDelta,
) -> Result<&'a VerificationKey, AttestationError> {
    if doc.revoked_kids.iter().any(|r| r == kid) {
        return Err(AttestationError::KeyRevoked(kid.to_string()));
    }
    let key = doc
        .keys
        .iter()
        .find(|k| k.kid == kid)
        .ok_or_else(|| AttestationError::UnknownKid(kid.to_string()))?;
    if key.revoked {
        return Err(AttestationError::KeyRevoked(kid.to_string()));
    }
    if !key.valid_at(now, leeway) {
        return Err(AttestationError::KeyOutsideValidity(kid.to_string()));
    }
    Ok(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use ed25519_dalek::SigningKey;

    fn listing(public_key: &str, algorithm: &str) -> String {
        format!(
            r#"{{
  "trust_root": "acme.com",
  "keys": [{{
    "kid": "key-2026-01",
    "algorithm": "{algorithm}",
    "public_key": "{public_key}",
    "not_before": "2026-01-01T00:00:00Z",
    "not_after": "2027-01-01T00:00:00Z"
  }}]
}}"#
        )
    }

    fn pk_b64() -> String {
        STANDARD.encode(SigningKey::from_bytes(&[1u8; 32]).verifying_key().to_bytes())
    }

    fn at(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap()
    }

    #[test]
    fn parses_published_listing() {
        let doc = parse_key_document(&listing(&pk_b64(), "Ed25519")).unwrap();
        assert_eq!(doc.trust_root().as_str(), "acme.com");
        assert_eq!(doc.keys().len(), 1);
        assert_eq!(doc.keys()[0].kid, "key-2026-01");
        assert_eq!(doc.keys()[0].not_before, at(2026, 1, 1));
        assert!(doc.revoked_kids().is_empty());
        let again = parse_key_document(&doc.to_json()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn rejects_other_algorithms() {
        assert_eq!(
            parse_key_document(&listing(&pk_b64(), "RSA")),
            Err(AttestationError::UnsupportedAlgorithm("RSA".into()))
        );
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(parse_key_document("{"), Err(AttestationError::MalformedDocument(_))));
        assert!(matches!(parse_key_document(&listing("AAAA", "Ed25519")), Err(AttestationError::MalformedDocument(_))));
        assert!(matches!(parse_key_document(&listing("!!", "Ed25519")), Err(AttestationError::MalformedDocument(_))));
        let swapped = listing(&pk_b64(), "Ed25519").replace("2027-01-01", "2025-01-01");
        assert!(matches!(parse_key_document(&swapped), Err(AttestationError::MalformedDocument(_))));
    }

    #[test]
    fn duplicate_kids_rejected() {
        let vk = SigningKey::from_bytes(&[1u8; 32]).verifying_key();
        let k = VerificationKey::new("a", vk, at(2026, 1, 1), at(2027, 1, 1)).unwrap();
        assert!(KeyDocument::new("acme.com".parse().unwrap(), vec![k.clone(), k], vec![]).is_err());
    }

    #[test]
    fn empty_key_list_yields_unknown_kid() {
        let doc = parse_key_document(r#"{"trust_root":"acme.com","keys":[]}"#).unwrap();
        assert_eq!(select_key(&doc, "any", at(2026, 6, 1)), Err(AttestationError::UnknownKid("any".into())));
    }

    #[test]
    fn selection_checks_window_and_revocation() {
        let mut doc = parse_key_document(&listing(&pk_b64(), "Ed25519")).unwrap();
        assert!(select_key(&doc, "key-2026-01", at(2026, 6, 1)).is_ok());
        assert!(matches!(select_key(&doc, "key-2026-01", at(2025, 12, 31)), Err(AttestationError::KeyOutsideValidity(_))));
        assert!(matches!(select_key(&doc, "key-2026-01", at(2027, 1, 1)), Err(AttestationError::KeyOutsideValidity(_))));
        doc.revoke("key-2026-01");
        assert!(matches!(select_key(&doc, "key-2026-01", at(2026, 6, 1)), Err(AttestationError::KeyRevoked(_))));
        // revocation of kids the document never published is allowed
        doc.revoke("ghost");
        assert!(doc.is_revoked("ghost"));
    }

    #[test]
    fn revoked_keys_list_parses() {
        let text = listing(&pk_b64(), "Ed25519").replacen("\"keys\"", "\"revoked_keys\": [\"key-2026-01\"],\n  \"keys\"", 1);
        let doc = parse_key_document(&text).unwrap();
        assert_eq!(doc.revoked_kids(), ["key-2026-01"]);
        assert!(matches!(select_key(&doc, "key-2026-01", at(2026, 6, 1)), Err(AttestationError::KeyRevoked(_))));
    }
}
