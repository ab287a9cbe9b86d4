//! Identity, discovery keys and attestations for `agent://` URIs.
//!
//! ```
//! use agenturi_core::{AgentUri, derive_key};
//!
//! let uri: AgentUri = "agent://Acme.com/workflow/approval/agent_01h455vb4pex5vsknk084sn02q?v=2".parse().unwrap();
//! assert_eq!(uri.canonical().as_str(), "agent://acme.com/workflow/approval/agent_01h455vb4pex5vsknk084sn02q");
//! let key = derive_key(uri.trust_root(), uri.capability_path());
//! assert_eq!(key.to_hex().len(), 64);
//! ```

pub mod agent_id;
pub mod attestation;
pub mod base32;
pub mod capability;
pub mod dht_key;
mod error;
pub mod trust_root;
pub mod uri;

pub use agent_id::{AgentId, IdValidation};
pub use capability::{capability_covers, CapabilityPath};
pub use dht_key::{derive_child_index_key, derive_key, derive_level_keys, ChildIndexKey, DhtKey};
pub use error::ParseError;
pub use trust_root::TrustRoot;
pub use uri::{canonicalize, path_starts_with, uris_equivalent, AgentUri, CanonicalUri, MAX_URI_LEN};
