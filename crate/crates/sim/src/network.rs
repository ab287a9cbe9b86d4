use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use agenturi_core::attestation::{paseto::UntrustedToken, KeyDocument, Verifier};
use agenturi_core::dht_key::{derive_unscoped_child_index_key, derive_unscoped_key};
use agenturi_core::{derive_child_index_key, derive_key, AgentUri, CanonicalUri, CapabilityPath, ChildIndexKey, DhtKey, TrustRoot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{KeyScheme, NetworkConfig};
use crate::id::{Distance, NodeId};
use crate::record::{Endpoint, Registration, SimTime};
use crate::routing::{build_tables, RoutingTable};
use crate::SimError;

#[derive(Debug, Clone)]
struct StoredRecord {
    revision: u64,
    reg: Arc<Registration>,
}

/// How a node answers record reads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum NodeBehavior {
    #[default]
    Honest,
    /// Answers every record read with these registrations in addition to
    /// whatever it really stores, claiming they are the newest copies.
    Forge(Vec<Registration>),
}

#[derive(Debug, Clone)]
pub struct SimNode {
    pub(crate) table: RoutingTable,
    records: HashMap<DhtKey, BTreeMap<CanonicalUri, StoredRecord>>,
    children: HashMap<ChildIndexKey, BTreeSet<String>>,
    pub(crate) alive: bool,
    tag: u8,
    behavior: NodeBehavior,
}

impl SimNode {
    pub fn table(&self) -> &RoutingTable {
        &self.table
    }

    pub fn alive(&self) -> bool {
        self.alive
    }

    pub fn partition_tag(&self) -> u8 {
        self.tag
    }

    pub fn holds(&self, key: &DhtKey) -> bool {
        self.records.get(key).is_some_and(|r| !r.is_empty())
    }

    pub fn holds_child_index(&self, key: &ChildIndexKey) -> bool {
        self.children.contains_key(key)
    }

    /// Registrations this node stores under `key`, in URI order.
    pub fn stored(&self, key: &DhtKey) -> Vec<Registration> {
        self.records
            .get(key)
            .map(|m| m.values().map(|r| (*r.reg).clone()).collect())
            .unwrap_or_default()
    }

    pub fn record_count(&self) -> usize {
        self.records.values().map(BTreeMap::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoreReceipt {
    pub key: DhtKey,
    /// Nodes now holding the record, nearest the key first.
    pub replicas: Vec<u32>,
    pub hops: u32,
    /// Child-index maintenance hops, summed over ancestor levels.
    pub index_hops: u32,
    /// Time from the start of the lookup until the last replica
    /// acknowledged the store.
    pub propagation_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupResult {
    /// Unexpired records, one per agent URI, in URI order.
    pub records: Vec<Registration>,
    pub hops: u32,
    pub nodes_contacted: u32,
    pub elapsed_ms: u64,
}

impl LookupResult {
    fn empty() -> Self {
        LookupResult { records: Vec::new(), hops: 0, nodes_contacted: 0, elapsed_ms: 0 }
    }

    pub fn uris(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.agent_uri.as_str()).collect()
    }
}

/// In-memory Kademlia network. Nodes are indexed `0..node_count` in
/// ascending ID order.
#[derive(Debug, Clone)]
pub struct Network {
    pub(crate) config: NetworkConfig,
    pub(crate) ids: Vec<NodeId>,
    pub(crate) nodes: Vec<SimNode>,
    clock: SimTime,
    revision: u64,
    key_docs: BTreeMap<TrustRoot, KeyDocument>,
    verifier: Verifier,
}

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self, SimError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut ids = BTreeSet::new();
        while ids.len() < config.node_count {
            ids.insert(NodeId(rng.gen()));
        }
        let ids: Vec<NodeId> = ids.into_iter().collect();
        let tables = build_tables(&ids, config.k, &mut rng);
        let nodes = tables
            .into_iter()
            .map(|table| SimNode {
                table,
                records: HashMap::new(),
                children: HashMap::new(),
                alive: true,
                tag: 0,
                behavior: NodeBehavior::Honest,
            })
            .collect();
        Ok(Network {
            config,
            ids,
            nodes,
            clock: SimTime::ZERO,
            revision: 0,
            key_docs: BTreeMap::new(),
            verifier: Verifier::default(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn node(&self, index: u32) -> &SimNode {
        &self.nodes[index as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn live_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive).count()
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn set_verifier(&mut self, verifier: Verifier) {
        self.verifier = verifier;
    }

    /// Makes a trust root's key document available to storing nodes.
    pub fn publish_keys(&mut self, doc: KeyDocument) {
        self.key_docs.insert(doc.trust_root().clone(), doc);
    }

    pub fn record_key(&self, root: &TrustRoot, path: &CapabilityPath) -> DhtKey {
        match self.config.key_scheme {
            KeyScheme::TrustScoped => derive_key(root, path),
            KeyScheme::Global => derive_unscoped_key(path),
        }
    }

    pub fn child_index_key(&self, root: &TrustRoot, path: &CapabilityPath) -> ChildIndexKey {
        match self.config.key_scheme {
            KeyScheme::TrustScoped => derive_child_index_key(root, path),
            KeyScheme::Global => derive_unscoped_child_index_key(path),
        }
    }

    pub(crate) fn reachable(&self, from: u32, to: u32) -> bool {
        let to = &self.nodes[to as usize];
        to.alive && to.tag == self.nodes[from as usize].tag
    }

    /// Fixed round-trip time of the link between two nodes.
    pub fn rtt_ms(&self, a: u32, b: u32) -> u64 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let h = splitmix64(self.config.seed ^ ((lo as u64) << 32 | hi as u64));
        let span = self.config.rtt.max_ms - self.config.rtt.min_ms + 1;
        self.config.rtt.min_ms + h % span
    }

    /// The live node a lookup for `key` starts from when none is given.
    pub fn default_origin(&self, key: &[u8; 32]) -> Option<u32> {
        let n = self.nodes.len() as u64;
        let start = splitmix64(self.config.seed ^ u64::from_be_bytes(key[..8].try_into().expect("8 bytes"))) % n;
        (0..n).map(|i| ((start + i) % n) as u32).find(|&i| self.nodes[i as usize].alive)
    }

    /// Global view: the `n` live nodes nearest `key`, ignoring partitions.
    pub fn closest_live_nodes(&self, key: &[u8; 32], n: usize) -> Vec<u32> {
        let target = NodeId::from_bytes(key);
        let mut live: Vec<(Distance, u32)> = self
            .ids
            .iter()
            .enumerate()
            .filter(|(i, _)| self.nodes[*i].alive)
            .map(|(i, id)| (id.distance(&target), i as u32))
            .collect();
        if live.len() > n {
            live.select_nth_unstable(n);
            live.truncate(n);
        }
        live.sort_unstable();
        live.into_iter().map(|(_, i)| i).collect()
    }

    /// Nodes whose store holds at least one record under `key`.
    pub fn holders(&self, key: &DhtKey) -> Vec<u32> {
        (0..self.nodes.len() as u32).filter(|&i| self.nodes[i as usize].holds(key)).collect()
    }

    fn verify_registration(&self, reg: &Registration, uri: &AgentUri, now: SimTime) -> Result<(), SimError> {
        let token = reg
            .attestation
            .as_deref()
            .ok_or_else(|| SimError::InvalidRegistration("verification requested but no attestation attached".into()))?;
        self.check_token(token, uri, now).map_err(SimError::AttestationRejected)
    }

    fn check_token(&self, token: &str, uri: &AgentUri, now: SimTime) -> Result<(), agenturi_core::attestation::AttestationError> {
        use agenturi_core::attestation::AttestationError;
        let doc = self
            .key_docs
            .get(uri.trust_root())
            .ok_or_else(|| AttestationError::TrustRootUnavailable { root: uri.trust_root().to_string(), stale_cache: false })?;
        // Storing nodes are not the audience of a token; they check
        // everything else and leave the audience to the eventual consumer.
        let aud = token_audience(token);
        self.verifier
            .verify(token, uri, doc, now.to_datetime(self.config.epoch), aud.as_deref())
            .map(|_| ())
    }

    /// Stores `reg` on the k closest nodes to its key and indexes it under
    /// every ancestor path. With `verify`, the attestation is checked
    /// first against the published key document at the current clock.
    pub fn register(&mut self, reg: Registration, verify: bool) -> Result<StoreReceipt, SimError> {
        reg.validate()?;
        let uri = reg.uri();
        if verify {
            self.verify_registration(&reg, &uri, self.clock)?;
        }
        let key = self.record_key(uri.trust_root(), uri.capability_path());
        let origin = self.default_origin(&key.0).ok_or(SimError::NetworkUnavailable)?;
        let mut receipt = self.store_record(origin, key, reg)?;
        receipt.index_hops = self.index_ancestors(origin, &uri);
        Ok(receipt)
    }

    fn store_record(&mut self, origin: u32, key: DhtKey, reg: Registration) -> Result<StoreReceipt, SimError> {
        let trace = self.iterative_lookup(origin, &NodeId::from_bytes(&key.0));
        if trace.closest.is_empty() {
            return Err(SimError::NetworkUnavailable);
        }
        self.revision += 1;
        let stored = StoredRecord { revision: self.revision, reg: Arc::new(reg) };
        for &n in &trace.closest {
            self.nodes[n as usize]
                .records
                .entry(key)
                .or_default()
                .insert(stored.reg.agent_uri.clone(), stored.clone());
        }
        let propagation_ms = trace.elapsed_ms + self.store_waves_ms(origin, &trace.closest);
        Ok(StoreReceipt { key, replicas: trace.closest, hops: trace.hops, index_hops: 0, propagation_ms })
    }

    /// STOREs go out alpha at a time; each wave lasts as long as its
    /// slowest link.
    fn store_waves_ms(&self, origin: u32, replicas: &[u32]) -> u64 {
        replicas
            .chunks(self.config.alpha)
            .map(|wave| wave.iter().filter(|&&n| n != origin).map(|&n| self.rtt_ms(origin, n)).max().unwrap_or(0))
            .sum()
    }

    fn index_ancestors(&mut self, origin: u32, uri: &AgentUri) -> u32 {
        let path = uri.capability_path();
        let mut hops = 0;
        for depth in 1..path.depth() {
            let parent = path.ancestor(depth).expect("depth within path");
            let key = self.child_index_key(uri.trust_root(), &parent);
            let trace = self.iterative_lookup(origin, &NodeId::from_bytes(&key.0));
            hops += trace.hops;
            let segment = &path.segments()[depth];
            for &n in &trace.closest {
                self.nodes[n as usize].children.entry(key).or_default().insert(segment.clone());
            }
        }
        hops
    }

    fn read_records(&self, origin: u32, key: DhtKey, now: SimTime) -> (Vec<Registration>, super::lookup::Trace) {
        let trace = self.iterative_lookup(origin, &NodeId::from_bytes(&key.0));
        let mut merged: BTreeMap<&CanonicalUri, (u64, &Registration)> = BTreeMap::new();
        let mut candidates: Vec<(u64, &Registration)> = Vec::new();
        for &n in &trace.closest {
            let node = &self.nodes[n as usize];
            if let Some(recs) = node.records.get(&key) {
                candidates.extend(recs.values().map(|r| (r.revision, &*r.reg)));
            }
            if let NodeBehavior::Forge(forged) = &node.behavior {
                candidates.extend(forged.iter().map(|r| (u64::MAX, r)));
            }
        }
        for (rev, reg) in candidates {
            if !reg.is_live(now) {
                continue;
            }
            if self.config.verify_on_read && !self.attested(reg, now) {
                continue;
            }
            match merged.get(&reg.agent_uri) {
                Some((have, _)) if *have >= rev => {}
                _ => {
                    merged.insert(&reg.agent_uri, (rev, reg));
                }
            }
        }
        (merged.into_values().map(|(_, r)| r.clone()).collect(), trace)
    }

    fn attested(&self, reg: &Registration, now: SimTime) -> bool {
        let Some(token) = reg.attestation.as_deref() else { return false };
        self.check_token(token, &reg.uri(), now).is_ok()
    }

    pub fn lookup_exact(&self, root: &TrustRoot, path: &CapabilityPath, now: SimTime) -> LookupResult {
        let key = self.record_key(root, path);
        match self.default_origin(&key.0) {
            Some(origin) => self.lookup_exact_from(origin, root, path, now),
            None => LookupResult::empty(),
        }
    }

    pub fn lookup_exact_from(&self, origin: u32, root: &TrustRoot, path: &CapabilityPath, now: SimTime) -> LookupResult {
        if !self.nodes[origin as usize].alive {
            return LookupResult::empty();
        }
        let (records, trace) = self.read_records(origin, self.record_key(root, path), now);
        LookupResult { records, hops: trace.hops, nodes_contacted: trace.contacted, elapsed_ms: trace.elapsed_ms }
    }

    /// Records at `path` and at every descendant reachable through the
    /// child index.
    pub fn lookup_prefix(&self, root: &TrustRoot, path: &CapabilityPath, now: SimTime) -> LookupResult {
        let key = self.record_key(root, path);
        match self.default_origin(&key.0) {
            Some(origin) => self.lookup_prefix_from(origin, root, path, now),
            None => LookupResult::empty(),
        }
    }

    pub fn lookup_prefix_from(&self, origin: u32, root: &TrustRoot, path: &CapabilityPath, now: SimTime) -> LookupResult {
        if !self.nodes[origin as usize].alive {
            return LookupResult::empty();
        }
        let mut out = LookupResult::empty();
        let mut merged: BTreeMap<CanonicalUri, Registration> = BTreeMap::new();
        let mut queue = VecDeque::from([path.clone()]);
        let mut seen = BTreeSet::new();
        while let Some(p) = queue.pop_front() {
            if !seen.insert(p.clone()) {
                continue;
            }
            let (records, trace) = self.read_records(origin, self.record_key(root, &p), now);
            out.hops += trace.hops;
            out.nodes_contacted += trace.contacted;
            out.elapsed_ms += trace.elapsed_ms;
            for r in records {
                merged.entry(r.agent_uri.clone()).or_insert(r);
            }
            let (children, trace) = self.read_children(origin, self.child_index_key(root, &p));
            out.hops += trace.hops;
            out.nodes_contacted += trace.contacted;
            out.elapsed_ms += trace.elapsed_ms;
            for seg in children {
                if let Ok(child) = p.child(&seg) {
                    queue.push_back(child);
                }
            }
        }
        out.records = merged.into_values().collect();
        out
    }

    fn read_children(&self, origin: u32, key: ChildIndexKey) -> (BTreeSet<String>, super::lookup::Trace) {
        let trace = self.iterative_lookup(origin, &NodeId::from_bytes(&key.0));
        let mut out = BTreeSet::new();
        for &n in &trace.closest {
            if let Some(set) = self.nodes[n as usize].children.get(&key) {
                out.extend(set.iter().cloned());
            }
        }
        (out, trace)
    }

    /// Re-stores an existing registration with new endpoints. The URI and
    /// attestation are kept; the record's lifetime restarts at `now`.
    pub fn migrate(&mut self, uri: &AgentUri, endpoints: Vec<Endpoint>, now: SimTime) -> Result<StoreReceipt, SimError> {
        let canonical = uri.canonical();
        let current = self
            .lookup_exact(uri.trust_root(), uri.capability_path(), now)
            .records
            .into_iter()
            .find(|r| r.agent_uri == canonical)
            .ok_or_else(|| SimError::NotRegistered(canonical.to_string()))?;
        let lifetime = current.expires_at.millis() - current.registered_at.millis();
        let next = Registration {
            agent_uri: canonical,
            endpoints,
            attestation: current.attestation,
            registered_at: now,
            expires_at: now.plus_ms(lifetime),
        };
        next.validate()?;
        let key = self.record_key(uri.trust_root(), uri.capability_path());
        let origin = self.default_origin(&key.0).ok_or(SimError::NetworkUnavailable)?;
        self.store_record(origin, key, next)
    }

    /// Assigns each node a partition tag. Nodes only reach nodes with the
    /// same tag until [`Network::heal`].
    pub fn partition(&mut self, tags: &[u8]) -> Result<(), SimError> {
        if tags.len() != self.nodes.len() {
            return Err(SimError::BadConfig(format!("expected {} partition tags, got {}", self.nodes.len(), tags.len())));
        }
        for (node, &t) in self.nodes.iter_mut().zip(tags) {
            node.tag = t;
        }
        Ok(())
    }

    /// Removes partitions and moves every record and child index onto the
    /// k live nodes closest to its key, keeping the newest copy of each
    /// registration.
    pub fn heal(&mut self) {
        for node in &mut self.nodes {
            node.tag = 0;
        }
        let k = self.config.k;

        let mut record_keys: Vec<DhtKey> = self.live_nodes().flat_map(|n| n.records.keys().copied()).collect();
        record_keys.sort_unstable();
        record_keys.dedup();
        for key in record_keys {
            let mut merged: BTreeMap<CanonicalUri, StoredRecord> = BTreeMap::new();
            for node in self.nodes.iter_mut().filter(|n| n.alive) {
                for (uri, rec) in node.records.remove(&key).unwrap_or_default() {
                    match merged.get(&uri) {
                        Some(have) if have.revision >= rec.revision => {}
                        _ => {
                            merged.insert(uri, rec);
                        }
                    }
                }
            }
            for n in self.closest_live_nodes(&key.0, k) {
                self.nodes[n as usize].records.insert(key, merged.clone());
            }
        }

        let mut child_keys: Vec<ChildIndexKey> = self.live_nodes().flat_map(|n| n.children.keys().copied()).collect();
        child_keys.sort_unstable();
        child_keys.dedup();
        for key in child_keys {
            let mut union = BTreeSet::new();
            for node in self.nodes.iter_mut().filter(|n| n.alive) {
                union.extend(node.children.remove(&key).unwrap_or_default());
            }
            for n in self.closest_live_nodes(&key.0, k) {
                self.nodes[n as usize].children.insert(key, union.clone());
            }
        }
    }

    fn live_nodes(&self) -> impl Iterator<Item = &SimNode> {
        self.nodes.iter().filter(|n| n.alive)
    }

    pub fn kill_node(&mut self, index: u32) {
        self.nodes[index as usize].alive = false;
    }

    pub fn revive_node(&mut self, index: u32) {
        self.nodes[index as usize].alive = true;
    }

    /// Test hook for adversarial nodes.
    pub fn set_node_behavior(&mut self, index: u32, behavior: NodeBehavior) {
        self.nodes[index as usize].behavior = behavior;
    }

    pub fn advance_time(&mut self, delta_ms: u64) {
        self.clock = self.clock.plus_ms(delta_ms);
        if self.config.compact_on_advance {
            let now = self.clock;
            for node in &mut self.nodes {
                node.records.retain(|_, recs| {
                    recs.retain(|_, r| r.reg.is_live(now));
                    !recs.is_empty()
                });
            }
        }
    }
}

fn token_audience(token: &str) -> Option<String> {
    let parsed = UntrustedToken::parse(token).ok()?;
    let claims: serde_json::Value = serde_json::from_slice(parsed.untrusted_message()).ok()?;
    claims.get("aud")?.as_str().map(str::to_string)
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
