use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::SimError;

/// Which preimage record and child-index keys are derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyScheme {
    /// Trust root and capability path (the normal mode).
    #[default]
    TrustScoped,
    /// Capability path only. Exists to measure cross-organization pollution.
    Global,
}

/// Per-link round-trip latency, drawn uniformly from `[min_ms, max_ms]`.
/// Each link's latency is fixed for the lifetime of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RttModel {
    pub min_ms: u64,
    pub max_ms: u64,
}

impl Default for RttModel {
    fn default() -> Self {
        RttModel { min_ms: 10, max_ms: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub node_count: usize,
    /// Bucket size and replication factor.
    pub k: usize,
    /// Lookup parallelism.
    pub alpha: usize,
    pub rtt: RttModel,
    pub seed: u64,
    /// Registration lifetime used by helpers that build registrations.
    pub default_ttl_ms: u64,
    pub key_scheme: KeyScheme,
    /// Wall-clock instant corresponding to simulation time zero, used when
    /// attestations are checked.
    pub epoch: DateTime<Utc>,
    /// Drop expired records from node stores when time advances.
    pub compact_on_advance: bool,
    /// Re-verify attestations on records returned by lookups.
    pub verify_on_read: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            node_count: 1000,
            k: 20,
            alpha: 3,
            rtt: RttModel::default(),
            seed: 0,
            default_ttl_ms: 3_600_000,
            key_scheme: KeyScheme::TrustScoped,
            epoch: Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap(),
            compact_on_advance: false,
            verify_on_read: false,
        }
    }
}

impl NetworkConfig {
    pub fn with_nodes(node_count: usize, seed: u64) -> Self {
        NetworkConfig { node_count, seed, k: NetworkConfig::default().k.min(node_count.max(1)), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadConfig(m.to_string()));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if self.node_count < self.k {
            return bad("node_count must be at least k");
        }
        if self.node_count > u32::MAX as usize {
            return bad("node_count too large");
        }
        if self.alpha < 1 {
            return bad("alpha must be at least 1");
        }
        if self.rtt.min_ms > self.rtt.max_ms {
            return bad("rtt.min_ms exceeds rtt.max_ms");
        }
        if self.default_ttl_ms == 0 {
            return bad("default_ttl_ms must be positive");
        }
        Ok(())
    }
}
