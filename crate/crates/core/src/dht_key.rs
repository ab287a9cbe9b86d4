//! Trust-scoped DHT keys.
//!
//! A record key is `SHA-256(trust_root "/" capability_path)` over the
//! canonical texts. Child-index keys carry a `children:` domain prefix so
//! they can never coincide with a record key.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::capability::CapabilityPath;
use crate::trust_root::TrustRoot;

const CHILD_INDEX_DOMAIN: &[u8] = b"children:";

macro_rules! key_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub [u8; 32]);

        impl $name {
            pub fn as_bytes(&self) -> &[u8; 32] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = hex::FromHexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let mut out = [0u8; 32];
                hex::decode_to_slice(s, &mut out)?;
                Ok($name(out))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

key_type!(
    /// 256-bit key under which registrations for one (trust root, path)
    /// are stored.
    DhtKey
);

key_type!(
    /// 256-bit key of the record listing the child segments under a path.
    ChildIndexKey
);

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    hasher.finalize().into()
}

fn hash_path(prefix: &[&[u8]], path: &CapabilityPath) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for p in prefix {
        hasher.update(p);
    }
    for (i, seg) in path.segments().iter().enumerate() {
        if i > 0 {
            hasher.update(b"/");
        }
        hasher.update(seg.as_bytes());
    }
    hasher.finalize().into()
}

pub fn derive_key(trust_root: &TrustRoot, path: &CapabilityPath) -> DhtKey {
    DhtKey(hash_path(&[trust_root.as_str().as_bytes(), b"/"], path))
}

/// Keys for each prefix of `path`, shallowest first.
pub fn derive_level_keys(trust_root: &TrustRoot, path: &CapabilityPath) -> Vec<DhtKey> {
    path.prefixes().map(|p| derive_key(trust_root, &p)).collect()
}

pub fn derive_child_index_key(trust_root: &TrustRoot, path: &CapabilityPath) -> ChildIndexKey {
    ChildIndexKey(hash_path(&[CHILD_INDEX_DOMAIN, trust_root.as_str().as_bytes(), b"/"], path))
}

/// Key derived from the capability path alone, ignoring the trust root.
///
/// Only used to measure what happens without trust scoping; nothing in
/// the registration or lookup path uses it by default.
pub fn derive_unscoped_key(path: &CapabilityPath) -> DhtKey {
    DhtKey(hash_path(&[], path))
}

pub fn derive_unscoped_child_index_key(path: &CapabilityPath) -> ChildIndexKey {
    ChildIndexKey(hash_path(&[CHILD_INDEX_DOMAIN], path))
}

/// SHA-256 of arbitrary text, for tests and tooling that need the raw
/// digest of a known preimage.
pub fn sha256_hex(text: &str) -> String {
    hex::encode(digest(&[text.as_bytes()]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root(s: &str) -> TrustRoot {
        s.parse().unwrap()
    }

    fn path(s: &str) -> CapabilityPath {
        s.parse().unwrap()
    }

    #[test]
    fn trust_root_scopes_keys() {
        let p = path("workflow/approval");
        assert_ne!(derive_key(&root("acme.com"), &p), derive_key(&root("globex.com"), &p));
        assert_eq!(derive_key(&root("acme.com"), &p), derive_key(&root("acme.com"), &p));
    }

    #[test]
    fn case_folds_before_hashing() {
        assert_eq!(
            derive_key(&root("ACME.COM"), &path("Workflow")),
            derive_key(&root("acme.com"), &path("workflow"))
        );
    }

    #[test]
    fn level_keys() {
        let r = root("acme.com");
        let keys = derive_level_keys(&r, &path("workflow/approval/invoice"));
        assert_eq!(
            keys,
            vec![
                derive_key(&r, &path("workflow")),
                derive_key(&r, &path("workflow/approval")),
                derive_key(&r, &path("workflow/approval/invoice")),
            ]
        );
        assert_eq!(derive_level_keys(&r, &path("workflow")), vec![derive_key(&r, &path("workflow"))]);
    }

    #[test]
    fn child_index_is_domain_separated() {
        let r = root("acme.com");
        let p = path("workflow");
        assert_ne!(derive_child_index_key(&r, &p).0, derive_key(&r, &p).0);
        assert_eq!(derive_child_index_key(&r, &p), derive_child_index_key(&r, &p));
    }

    #[test]
    fn hex_round_trip() {
        let k = derive_key(&root("acme.com"), &path("workflow"));
        assert_eq!(k.to_hex().len(), 64);
        assert_eq!(k.to_hex().parse::<DhtKey>().unwrap(), k);
    }
}
