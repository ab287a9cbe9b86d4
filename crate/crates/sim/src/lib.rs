//! Deterministic in-memory Kademlia network for registering and
//! discovering agents by capability path.
//!
//! ```
//! use agenturi_core::AgentUri;
//! use agenturi_sim::{Endpoint, Network, NetworkConfig, Registration, SimTime};
//!
//! let mut net = Network::new(NetworkConfig::with_nodes(200, 7)).unwrap();
//! let uri: AgentUri = "agent://acme.com/workflow/approval/agent_01h455vb4pex5vsknk084sn02q".parse().unwrap();
//! let reg = Registration::new(&uri, vec![Endpoint::https("https://agents.acme.com/a")], None, SimTime::ZERO, 60_000);
//! let receipt = net.register(reg, false).unwrap();
//! assert_eq!(receipt.replicas.len(), 20);
//!
//! let found = net.lookup_prefix(uri.trust_root(), &"workflow".parse().unwrap(), SimTime(1));
//! assert_eq!(found.records.len(), 1);
//! ```

mod config;
mod id;
mod lookup;
mod network;
mod record;
mod routing;
pub mod scenario;

use agenturi_core::attestation::AttestationError;
use thiserror::Error;

pub use config::{KeyScheme, NetworkConfig, RttModel};
pub use id::{bucket_of, Distance, NodeId};
pub use network::{LookupResult, Network, NodeBehavior, SimNode, StoreReceipt};
pub use record::{Endpoint, Registration, SimTime, TimeFormat};
pub use routing::RoutingTable;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("invalid registration: {0}")]
    InvalidRegistration(String),
    #[error("attestation rejected: {0}")]
    AttestationRejected(AttestationError),
    #[error("no live node reachable")]
    NetworkUnavailable,
    #[error("`{0}` is not registered")]
    NotRegistered(String),
}

impl SimError {
    pub fn name(&self) -> &'static str {
        match self {
            SimError::BadConfig(_) => "BadConfig",
            SimError::InvalidRegistration(_) => "InvalidRegistration",
            SimError::AttestationRejected(_) => "AttestationRejected",
            SimError::NetworkUnavailable => "NetworkUnavailable",
            SimError::NotRegistered(_) => "NotRegistered",
        }
    }
}
