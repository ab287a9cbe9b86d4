//! PASETO v4.public: Ed25519 signatures over the pre-authentication
//! encoding of header, message, footer and implicit assertion.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey, SIGNATURE_LENGTH};

use super::AttestationError;

pub const HEADER: &str = "v4.public.";

/// Pre-authentication encoding: little-endian length prefixes (top bit
/// cleared) for the piece count and for each piece.
pub fn pae(pieces: &[&[u8]]) -> Vec<u8> {
    fn le64(n: usize) -> [u8; 8] {
        ((n as u64) & (u64::MAX >> 1)).to_le_bytes()
    }
    let mut out = Vec::with_capacity(8 + pieces.iter().map(|p| 8 + p.len()).sum::<usize>());
    out.extend_from_slice(&le64(pieces.len()));
    for p in pieces {
        out.extend_from_slice(&le64(p.len()));
        out.extend_from_slice(p);
    }
    out
}

/// Signs `message` and returns `v4.public.<payload>[.<footer>]`.
pub fn sign(key: &SigningKey, message: &[u8], footer: &[u8], implicit: &[u8]) -> String {
    let m2 = pae(&[HEADER.as_bytes(), message, footer, implicit]);
    let sig = key.sign(&m2);
    let mut body = Vec::with_capacity(message.len() + SIGNATURE_LENGTH);
    body.extend_from_slice(message);
    body.extend_from_slice(&sig.to_bytes());
    let mut token = String::from(HEADER);
    token.push_str(&URL_SAFE_NO_PAD.encode(body));
    if !footer.is_empty() {
        token.push('.');
        token.push_str(&URL_SAFE_NO_PAD.encode(footer));
    }
    token
}

/// A token split into its parts; nothing has been authenticated yet.
#[derive(Debug, Clone)]
pub struct UntrustedToken {
    message: Vec<u8>,
    signature: [u8; SIGNATURE_LENGTH],
    footer: Vec<u8>,
}

impl UntrustedToken {
    pub fn parse(token: &str) -> Result<Self, AttestationError> {
        let rest = token
            .strip_prefix(HEADER)
            .ok_or_else(|| AttestationError::MalformedToken("not a v4.public token".into()))?;
        let mut parts = rest.split('.');
        let payload = parts.next().unwrap_or_default();
        let footer = parts.next();
        if parts.next().is_some() {
            return Err(AttestationError::MalformedToken("too many sections".into()));
        }
        let body = URL_SAFE_NO_PAD
            .decode(payload)
            .map_err(|e| AttestationError::MalformedToken(format!("payload: {e}")))?;
        if body.len() < SIGNATURE_LENGTH {
            return Err(AttestationError::MalformedToken("payload shorter than a signature".into()));
        }
        let footer = match footer {
            Some(f) => URL_SAFE_NO_PAD
                .decode(f)
                .map_err(|e| AttestationError::MalformedToken(format!("footer: {e}")))?,
            None => Vec::new(),
        };
        let (message, sig) = body.split_at(body.len() - SIGNATURE_LENGTH);
        Ok(UntrustedToken { message: message.to_vec(), signature: sig.try_into().expect("length checked"), footer })
    }

    /// Footer bytes. Unauthenticated until [`verify`](Self::verify) succeeds.
    pub fn footer(&self) -> &[u8] {
        &self.footer
    }

    pub fn untrusted_message(&self) -> &[u8] {
        &self.message
    }

    /// Checks the signature and returns the authenticated message.
    pub fn verify(&self, key: &VerifyingKey, implicit: &[u8]) -> Result<&[u8], AttestationError> {
        let m2 = pae(&[HEADER.as_bytes(), &self.message, &self.footer, implicit]);
        let sig = Signature::from_bytes(&self.signature);
        key.verify(&m2, &sig).map_err(|_| AttestationError::BadSignature)?;
        Ok(&self.message)
    }
}
