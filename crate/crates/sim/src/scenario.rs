//! Scripted runs over a network, described in JSON.
//!
//! ```json
//! {
//!   "network": {"node_count": 100, "seed": 7},
//!   "steps": [
//!     {"op": "register", "uri": "agent://acme.com/workflow/agent_01h455vb4pex5vsknk084sn02q",
//!      "endpoints": [{"url": "https://agents.acme.com/w", "protocol": "https"}]},
//!     {"op": "lookup_prefix", "trust_root": "acme.com", "path": "workflow", "expect": {"count": 1}}
//!   ]
//! }
//! ```

use agenturi_core::attestation::parse_key_document;
use agenturi_core::{AgentUri, CapabilityPath, TrustRoot};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Endpoint, LookupResult, Network, NetworkConfig, Registration, SimError, TimeFormat};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub network: NetworkConfig,
    /// Key documents (in the published JSON format) made available to
    /// storing nodes.
    #[serde(default)]
    pub key_documents: Vec<Value>,
    #[serde(default)]
    pub time_format: TimeFormat,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Register {
        uri: String,
        endpoints: Vec<Endpoint>,
        #[serde(default)]
        attestation: Option<String>,
        #[serde(default)]
        ttl_ms: Option<u64>,
        #[serde(default)]
        verify: bool,
        #[serde(default)]
        expect_error: Option<String>,
    },
    LookupExact {
        trust_root: String,
        path: String,
        #[serde(default)]
        expect: Option<Expect>,
    },
    LookupPrefix {
        trust_root: String,
        path: String,
        #[serde(default)]
        expect: Option<Expect>,
    },
    Migrate {
        uri: String,
        endpoints: Vec<Endpoint>,
        #[serde(default)]
        expect_error: Option<String>,
    },
    Advance {
        ms: u64,
    },
    Kill {
        nodes: Vec<u32>,
    },
    Revive {
        nodes: Vec<u32>,
    },
    /// Either explicit per-node tags, or every node at index `split_at` and
    /// above moves to partition 1.
    Partition {
        #[serde(default)]
        tags: Option<Vec<u8>>,
        #[serde(default)]
        split_at: Option<usize>,
    },
    Heal,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub count: Option<usize>,
    /// Exact set of canonical URIs returned.
    pub uris: Option<Vec<String>>,
    /// Exact set of endpoint URLs across all returned records.
    pub endpoints: Option<Vec<String>>,
    pub max_hops: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub index: usize,
    pub op: &'static str,
    pub ok: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub passed: bool,
    pub steps: Vec<StepReport>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, SimError> {
    serde_json::from_str(text).map_err(|e| SimError::BadConfig(e.to_string()))
}

/// Runs every step, recording expectation failures instead of stopping.
/// Only configuration problems are returned as errors.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioReport, SimError> {
    let mut net = Network::new(scenario.network.clone())?;
    for doc in &scenario.key_documents {
        let doc = parse_key_document(&doc.to_string()).map_err(|e| SimError::BadConfig(e.to_string()))?;
        net.publish_keys(doc);
    }
    let epoch = scenario.network.epoch;
    let mut steps = Vec::with_capacity(scenario.steps.len());
    for (index, step) in scenario.steps.iter().enumerate() {
        let mut failures = Vec::new();
        let (op, detail) = match step {
            Step::Register { uri, endpoints, attestation, ttl_ms, verify, expect_error } => {
                let uri = parse_uri(uri)?;
                let ttl = ttl_ms.unwrap_or(net.config().default_ttl_ms);
                let reg = Registration::new(&uri, endpoints.clone(), attestation.clone(), net.now(), ttl);
                let json = reg.to_json(scenario.time_format, epoch);
                let outcome = net.register(reg, *verify);
                check_error(&outcome, expect_error.as_deref(), &mut failures);
                ("register", outcome_detail(outcome, json!({ "registration": json })))
            }
            Step::LookupExact { trust_root, path, expect } => {
                let (root, path) = (parse_root(trust_root)?, parse_path(path)?);
                let r = net.lookup_exact(&root, &path, net.now());
                check_lookup(&r, expect.as_ref(), &mut failures);
                ("lookup_exact", lookup_detail(&r, scenario.time_format, epoch))
            }
            Step::LookupPrefix { trust_root, path, expect } => {
                let (root, path) = (parse_root(trust_root)?, parse_path(path)?);
                let r = net.lookup_prefix(&root, &path, net.now());
                check_lookup(&r, expect.as_ref(), &mut failures);
                ("lookup_prefix", lookup_detail(&r, scenario.time_format, epoch))
            }
            Step::Migrate { uri, endpoints, expect_error } => {
                let uri = parse_uri(uri)?;
                let outcome = net.migrate(&uri, endpoints.clone(), net.now());
                check_error(&outcome, expect_error.as_deref(), &mut failures);
                ("migrate", outcome_detail(outcome, json!({ "canonical_uri": uri.canonical() })))
            }
            Step::Advance { ms } => {
                net.advance_time(*ms);
                ("advance", json!({ "now_ms": net.now().millis() }))
            }
            Step::Kill { nodes } => {
                check_nodes(&net, nodes)?;
                nodes.iter().for_each(|&n| net.kill_node(n));
                ("kill", json!({ "live_nodes": net.live_count() }))
            }
            Step::Revive { nodes } => {
                check_nodes(&net, nodes)?;
                nodes.iter().for_each(|&n| net.revive_node(n));
                ("revive", json!({ "live_nodes": net.live_count() }))
            }
            Step::Partition { tags, split_at } => {
                let tags = match (tags, split_at) {
                    (Some(t), None) => t.clone(),
                    (None, Some(s)) => (0..net.node_count()).map(|i| u8::from(i >= *s)).collect(),
                    _ => return Err(SimError::BadConfig(format!("step {index}: partition needs exactly one of tags, split_at"))),
                };
                net.partition(&tags)?;
                ("partition", json!({ "tags": tags.iter().collect::<std::collections::BTreeSet<_>>() }))
            }
            Step::Heal => {
                net.heal();
                ("heal", json!({}))
            }
        };
        steps.push(StepReport { index, op, ok: failures.is_empty(), failures, detail });
    }
    Ok(ScenarioReport { passed: steps.iter().all(|s| s.ok), steps })
}

fn parse_uri(text: &str) -> Result<AgentUri, SimError> {
    AgentUri::parse(text).map_err(|e| SimError::BadConfig(format!("uri `{text}`: {e}")))
}

fn parse_root(text: &str) -> Result<TrustRoot, SimError> {
    TrustRoot::parse(text).map_err(|e| SimError::BadConfig(format!("trust root `{text}`: {e}")))
}

fn parse_path(text: &str) -> Result<CapabilityPath, SimError> {
    CapabilityPath::parse(text).map_err(|e| SimError::BadConfig(format!("path `{text}`: {e}")))
}

fn check_nodes(net: &Network, nodes: &[u32]) -> Result<(), SimError> {
    match nodes.iter().find(|&&n| n as usize >= net.node_count()) {
        Some(n) => Err(SimError::BadConfig(format!("node {n} out of range"))),
        None => Ok(()),
    }
}

fn check_error<T>(outcome: &Result<T, SimError>, expected: Option<&str>, failures: &mut Vec<String>) {
    match (outcome, expected) {
        (Ok(_), Some(e)) => failures.push(format!("expected error {e}, succeeded")),
        (Err(err), None) => failures.push(format!("unexpected error {}: {err}", err.name())),
        (Err(err), Some(e)) if err.name() != e => failures.push(format!("expected error {e}, got {}", err.name())),
        _ => {}
    }
}

fn outcome_detail<T: Serialize>(outcome: Result<T, SimError>, mut base: Value) -> Value {
    match outcome {
        Ok(v) => base["receipt"] = serde_json::to_value(v).expect("receipt serializes"),
        Err(e) => base["error"] = json!({ "name": e.name(), "message": e.to_string() }),
    }
    base
}

fn check_lookup(r: &LookupResult, expect: Option<&Expect>, failures: &mut Vec<String>) {
    let Some(expect) = expect else { return };
    if let Some(c) = expect.count {
        if r.records.len() != c {
            failures.push(format!("expected {c} records, got {}", r.records.len()));
        }
    }
    if let Some(uris) = &expect.uris {
        let mut want: Vec<String> = uris.iter().map(|u| AgentUri::parse(u).map(|u| u.canonical().into_string()).unwrap_or_else(|_| u.clone())).collect();
        want.sort();
        let got: Vec<String> = r.uris().into_iter().map(str::to_string).collect();
        if got != want {
            failures.push(format!("expected uris {want:?}, got {got:?}"));
        }
    }
    if let Some(eps) = &expect.endpoints {
        let mut want = eps.clone();
        want.sort();
        want.dedup();
        let mut got: Vec<String> = r.records.iter().flat_map(|rec| rec.endpoints.iter().map(|e| e.url.clone())).collect();
        got.sort();
        got.dedup();
        if got != want {
            failures.push(format!("expected endpoints {want:?}, got {got:?}"));
        }
    }
    if let Some(max) = expect.max_hops {
        if r.hops > max {
            failures.push(format!("expected at most {max} hops, took {}", r.hops));
        }
    }
}

fn lookup_detail(r: &LookupResult, format: TimeFormat, epoch: chrono::DateTime<chrono::Utc>) -> Value {
    json!({
        "records": r.records.iter().map(|rec| rec.to_json(format, epoch)).collect::<Vec<_>>(),
        "hops": r.hops,
        "nodes_contacted": r.nodes_contacted,
        "elapsed_ms": r.elapsed_ms,
    })
}
