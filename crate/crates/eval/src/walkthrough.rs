//! End-to-end lifecycle of one agent: creation, attestation, registration,
//! discovery, verification, interaction, migration and attestation
//! refresh, plus two compound failure scenarios.

use std::sync::Arc;

use agenturi_core::attestation::{
    issue_attestation, verify_with_cache, well_known_url, AttestationClaims, KeyCache, KeyDocument, MemoryKeySource, VerificationKey,
    Verifier,
};
use agenturi_core::{derive_key, AgentId, AgentUri, CapabilityPath, IdValidation, TrustRoot};
use agenturi_sim::{Endpoint, Network, NetworkConfig, Registration, SimTime};
use chrono::{DateTime, TimeDelta, Utc};
use ed25519_dalek::SigningKey;
use serde::Serialize;
use serde_json::{json, Value};

use crate::EvalError;

pub const AGENT_URI: &str = "agent://acme.com/workflow/approval/invoice/agent_01h455vb4pex5vsknk084sn02q";
pub const OLD_ENDPOINT: &str = "https://agents.acme.com/v1/approvals";
pub const NEW_ENDPOINT: &str = "https://agents-new.acme.com/v1/approvals";

const DAY_MS: u64 = 86_400_000;
const ATTESTATION_DAYS: i64 = 30;
const REFRESH_AFTER_DAYS: u64 = 25;
const MIGRATION_DAY: u64 = 180;
/// Share of an attestation's lifetime that must remain when migrating.
pub const MIN_TTL_FRACTION_AT_MIGRATION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: String,
    pub day: f64,
    pub ok: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transcript {
    pub steps: Vec<StepRecord>,
    pub compound: Vec<StepRecord>,
    pub passed: bool,
}

struct World {
    epoch: DateTime<Utc>,
    root: TrustRoot,
    signing: SigningKey,
    kid: &'static str,
    source: Arc<MemoryKeySource>,
}

impl World {
    fn new(epoch: DateTime<Utc>) -> Self {
        let root = TrustRoot::parse("acme.com").expect("valid");
        let signing = SigningKey::from_bytes(&[0x41; 32]);
        let key = VerificationKey::new("acme-2026", signing.verifying_key(), epoch - TimeDelta::days(1), epoch + TimeDelta::days(400))
            .expect("window ordered");
        let source = Arc::new(MemoryKeySource::new());
        source.publish(KeyDocument::new(root.clone(), vec![key], vec![]).expect("unique kids"));
        World { epoch, root, signing, kid: "acme-2026", source }
    }

    fn at(&self, t: SimTime) -> DateTime<Utc> {
        t.to_datetime(self.epoch)
    }

    fn issue(&self, uri: &AgentUri, caps: &[&str], day: u64) -> String {
        let iat = self.at(SimTime(day * DAY_MS));
        let caps = caps.iter().map(|c| c.parse().expect("valid cap")).collect();
        let claims = AttestationClaims::for_agent(uri, caps, iat, iat + TimeDelta::days(ATTESTATION_DAYS));
        issue_attestation(&claims, &self.signing, self.kid).expect("claims valid")
    }
}

fn fail(steps: &[StepRecord]) -> Option<&StepRecord> {
    steps.iter().find(|s| !s.ok)
}

fn record(steps: &mut Vec<StepRecord>, step: &str, t: SimTime, ok: bool, detail: Value) {
    steps.push(StepRecord { step: step.to_string(), day: t.millis() as f64 / DAY_MS as f64, ok, detail });
}

pub fn run_walkthrough() -> Result<Transcript, EvalError> {
    let net_cfg = NetworkConfig { default_ttl_ms: ATTESTATION_DAYS as u64 * DAY_MS, ..NetworkConfig::with_nodes(500, 81) };
    let world = World::new(net_cfg.epoch);
    let mut net = Network::new(net_cfg).map_err(|e| EvalError::BadConfig(e.to_string()))?;
    net.publish_keys(world.source_doc());
    let cache = KeyCache::new(world.source.clone()).with_trusted_roots([world.root.clone()]);
    let verifier = Verifier::default();
    let mut steps = Vec::new();

    // 1. creation
    let id = AgentId::parse("agent_01h455vb4pex5vsknk084sn02q", IdValidation::Strict).map_err(sim)?;
    let uri = AgentUri::new(world.root.clone(), "workflow/approval/invoice".parse().map_err(sim)?, id).map_err(sim)?;
    let canonical = uri.canonical();
    record(&mut steps, "1 creation", net.now(), canonical.as_str() == AGENT_URI, json!({ "uri": canonical, "uuid": uri.agent_id().uuid_string() }));

    // 2. attestation
    let mut token = world.issue(&uri, &["/workflow/approval/invoice"], 0);
    record(&mut steps, "2 attestation", net.now(), token.starts_with("v4.public."), json!({ "kid": world.kid, "valid_days": ATTESTATION_DAYS }));

    // 3. registration
    let reg = Registration::new(&uri, vec![Endpoint::https(OLD_ENDPOINT)], Some(token.clone()), net.now(), net.config().default_ttl_ms);
    let receipt = net.register(reg, true).map_err(sim)?;
    let expected_key = derive_key(uri.trust_root(), uri.capability_path());
    record(
        &mut steps,
        "3 registration",
        net.now(),
        receipt.key == expected_key && receipt.replicas.len() == net.config().k,
        json!({ "dht_key": receipt.key, "replicas": receipt.replicas.len(), "hops": receipt.hops }),
    );

    // 4. discovery by a partner
    let query: CapabilityPath = "/workflow/approval".parse().map_err(sim)?;
    let found = net.lookup_prefix(&world.root, &query, net.now());
    let hit = found.records.iter().find(|r| r.agent_uri == canonical).cloned();
    record(&mut steps, "4 discovery", net.now(), hit.is_some(), json!({ "query": query.canonical(), "results": found.uris(), "hops": found.hops }));
    let hit = hit.ok_or_else(|| EvalError::Scenario("agent not discovered".into()))?;
    let cached_reference = hit.agent_uri.clone();

    // 5. verification against the well-known key document
    let verified = verify_with_cache(&verifier, &cache, hit.attestation.as_deref().unwrap_or_default(), &uri, world.at(net.now()), None);
    record(
        &mut steps,
        "5 verification",
        net.now(),
        verified.is_ok(),
        json!({ "keys_url": well_known_url(&world.root), "result": outcome(&verified) }),
    );

    // 6. interaction
    let endpoint = hit.endpoints[0].url.clone();
    record(&mut steps, "6 interaction", net.now(), endpoint == OLD_ENDPOINT, json!({ "request_sent_to": endpoint }));

    // six months of refresh cycles: a fresh attestation and heartbeat
    // registration every 25 days
    let mut issued_day = 0;
    let mut refreshes = 0;
    while issued_day + REFRESH_AFTER_DAYS <= MIGRATION_DAY {
        issued_day += REFRESH_AFTER_DAYS;
        net.advance_time(REFRESH_AFTER_DAYS * DAY_MS);
        token = world.issue(&uri, &["/workflow/approval/invoice"], issued_day);
        let reg = Registration::new(&uri, vec![Endpoint::https(OLD_ENDPOINT)], Some(token.clone()), net.now(), net.config().default_ttl_ms);
        net.register(reg, true).map_err(sim)?;
        refreshes += 1;
    }

    // 7. migration
    net.advance_time(MIGRATION_DAY * DAY_MS - net.now().millis());
    let remaining = remaining_fraction(issued_day * DAY_MS, net.now().millis());
    let mig = net.migrate(&uri, vec![Endpoint::https(NEW_ENDPOINT)], net.now()).map_err(sim)?;
    let resolved = net.lookup_exact(&world.root, uri.capability_path(), net.now());
    let rec = resolved.records.iter().find(|r| r.agent_uri == cached_reference);
    let still_valid = rec
        .and_then(|r| r.attestation.as_deref())
        .map(|t| verify_with_cache(&verifier, &cache, t, &cached_reference.to_uri(), world.at(net.now()), None).is_ok())
        .unwrap_or(false);
    let migrated_ok = rec.is_some_and(|r| r.endpoints == [Endpoint::https(NEW_ENDPOINT)])
        && cached_reference == uri.canonical()
        && remaining >= MIN_TTL_FRACTION_AT_MIGRATION
        && still_valid;
    record(
        &mut steps,
        "7 migration",
        net.now(),
        migrated_ok,
        json!({
            "uri_before": cached_reference,
            "uri_after": rec.map(|r| r.agent_uri.clone()),
            "endpoint": rec.map(|r| r.endpoints[0].url.clone()),
            "refresh_cycles_before_migration": refreshes,
            "attestation_ttl_remaining": remaining,
            "propagation_ms": mig.propagation_ms,
        }),
    );

    // 8. attestation refresh with overlap: old token valid to day 30 of its
    // cycle, new one requested at day 25
    let cycle = issued_day;
    let old_token = token.clone();
    let new_token = world.issue(&uri, &["/workflow/approval/invoice"], cycle + REFRESH_AFTER_DAYS);
    let check = |tok: &str, day_in_cycle: u64| {
        let t = SimTime((cycle + day_in_cycle) * DAY_MS);
        verify_with_cache(&verifier, &cache, tok, &uri, world.at(t), None)
    };
    let old_26 = check(&old_token, 26);
    let new_26 = check(&new_token, 26);
    let new_31 = check(&new_token, 31);
    let old_31 = check(&old_token, 31);
    record(
        &mut steps,
        "8 attestation refresh",
        SimTime((cycle + REFRESH_AFTER_DAYS) * DAY_MS),
        old_26.is_ok() && new_26.is_ok() && new_31.is_ok() && matches!(&old_31, Err(e) if e.name() == "Expired"),
        json!({
            "old_token_day_26": outcome(&old_26),
            "new_token_day_26": outcome(&new_26),
            "new_token_day_31": outcome(&new_31),
            "old_token_day_31": outcome(&old_31),
        }),
    );

    let mut compound = rotation_during_partition()?;
    compound.extend(expiry_and_migration()?);
    let passed = fail(&steps).is_none() && fail(&compound).is_none();
    Ok(Transcript { steps, compound, passed })
}

impl World {
    fn source_doc(&self) -> KeyDocument {
        use agenturi_core::attestation::KeySource;
        self.source.fetch(&self.root).expect("published")
    }
}

fn sim(e: impl std::fmt::Display) -> EvalError {
    EvalError::Scenario(e.to_string())
}

fn outcome<T>(r: &Result<T, agenturi_core::attestation::AttestationError>) -> Value {
    match r {
        Ok(_) => json!("verified"),
        Err(e) => json!({ "error": e.name(), "class": e.class() }),
    }
}

fn remaining_fraction(issued_ms: u64, now_ms: u64) -> f64 {
    let life = ATTESTATION_DAYS as f64 * DAY_MS as f64;
    ((issued_ms as f64 + life - now_ms as f64) / life).clamp(0.0, 1.0)
}

/// Whether migrating at `now_ms` keeps at least the minimum share of the
/// attestation lifetime.
pub fn migration_allowed(issued_ms: u64, now_ms: u64) -> bool {
    remaining_fraction(issued_ms, now_ms) >= MIN_TTL_FRACTION_AT_MIGRATION
}

/// A trust root rotates keys while the network is split. One side's
/// verifier still caches the pre-rotation document. With overlapping key
/// windows both agents verify from both sides after the split heals; with
/// no overlap, tokens under the retired key fail.
fn rotation_during_partition() -> Result<Vec<StepRecord>, EvalError> {
    let mut out = Vec::new();
    for overlap in [true, false] {
        let cfg = NetworkConfig::with_nodes(300, 17);
        let epoch = cfg.epoch;
        let root = TrustRoot::parse("acme.com").expect("valid");
        let old_sk = SigningKey::from_bytes(&[0x01; 32]);
        let new_sk = SigningKey::from_bytes(&[0x02; 32]);
        let day = |d: i64| epoch + TimeDelta::days(d);
        let old_end = if overlap { day(40) } else { day(30) };
        let old_key = VerificationKey::new("old", old_sk.verifying_key(), day(-10), old_end).expect("ordered");
        let new_key = VerificationKey::new("new", new_sk.verifying_key(), day(30), day(400)).expect("ordered");
        let source = Arc::new(MemoryKeySource::new());
        source.publish(KeyDocument::new(root.clone(), vec![old_key.clone()], vec![]).expect("unique"));

        let mut net = Network::new(cfg).map_err(sim)?;
        let half = net.node_count() / 2;
        let tags: Vec<u8> = (0..net.node_count()).map(|i| u8::from(i >= half)).collect();
        let x: AgentUri = "agent://acme.com/billing/agent_01h455vb4pex5vsknk084sn02q".parse().map_err(sim)?;
        let y: AgentUri = "agent://acme.com/billing/refunds/agent_01h455vb4pex5vsknk084sn02r".parse().map_err(sim)?;
        let token = |u: &AgentUri, sk: &SigningKey, kid: &str, d: i64| {
            let claims = AttestationClaims::for_agent(u, vec![u.capability_path().clone()], day(d), day(d + 30));
            issue_attestation(&claims, sk, kid).expect("valid claims")
        };
        let x_token = token(&x, &old_sk, "old", 20);
        let y_token = token(&y, &new_sk, "new", 30);

        // side 0 verifier fetched keys shortly before the rotation
        let side0 = KeyCache::new(source.clone());
        let t_fetch = day(31) - TimeDelta::seconds(120);
        side0.get(&root, t_fetch).map_err(sim)?;
        source.publish(KeyDocument::new(root.clone(), vec![old_key, new_key], vec![]).expect("unique"));
        let side1 = KeyCache::new(source.clone());

        net.partition(&tags).map_err(sim)?;
        net.advance_time(31 * DAY_MS);
        let now = net.now();
        for (u, tok) in [(&x, &x_token), (&y, &y_token)] {
            let reg = Registration::new(u, vec![Endpoint::https("https://agents.acme.com/b")], Some(tok.clone()), now, 10 * DAY_MS);
            net.register(reg, false).map_err(sim)?;
        }
        let during: Vec<usize> = [0, half as u32]
            .iter()
            .map(|&o| net.lookup_prefix_from(o, &root, &"billing".parse().expect("valid"), now).records.len())
            .collect();
        net.heal();
        let after: Vec<usize> = [0, half as u32]
            .iter()
            .map(|&o| net.lookup_prefix_from(o, &root, &"billing".parse().expect("valid"), now).records.len())
            .collect();

        let at = t_fetch + TimeDelta::seconds(60);
        let verifier = Verifier::default();
        let results: Vec<(&str, Result<_, _>)> = vec![
            ("side0_verifies_x", verify_with_cache(&verifier, &side0, &x_token, &x, at, None)),
            ("side0_verifies_y", verify_with_cache(&verifier, &side0, &y_token, &y, at, None)),
            ("side1_verifies_x", verify_with_cache(&verifier, &side1, &x_token, &x, at, None)),
            ("side1_verifies_y", verify_with_cache(&verifier, &side1, &y_token, &y, at, None)),
        ];
        let all_ok = results.iter().all(|(_, r)| r.is_ok());
        let x_fails_outside = results.iter().filter(|(n, _)| n.ends_with("_x")).all(|(_, r)| matches!(r, Err(e) if e.name() == "KeyOutsideValidity"));
        let y_ok = results.iter().filter(|(n, _)| n.ends_with("_y")).all(|(_, r)| r.is_ok());
        let ok = after == [2, 2] && if overlap { all_ok } else { x_fails_outside && y_ok };
        let detail: serde_json::Map<String, Value> = results.iter().map(|(n, r)| (n.to_string(), outcome(r))).collect();
        record(
            &mut out,
            if overlap { "rotation+partition, overlapping key windows" } else { "rotation+partition, no overlap" },
            now,
            ok,
            json!({ "found_during_partition": during, "found_after_heal": after, "verification_after_heal": detail }),
        );
    }
    Ok(out)
}

/// An agent migrates late in its attestation's life. The new location only
/// starts serving after a three-day cut-over, by which time an unrefreshed
/// token has expired.
fn expiry_and_migration() -> Result<Vec<StepRecord>, EvalError> {
    const CUTOVER_DAYS: u64 = 3;
    let mut out = Vec::new();
    let cases = [("migrate at day 28 without refresh", 28, false), ("refresh at day 27, migrate at day 28", 28, true), ("migrate at day 20", 20, false)];
    for (name, migrate_day, refresh) in cases {
        let cfg = NetworkConfig { default_ttl_ms: 40 * DAY_MS, ..NetworkConfig::with_nodes(200, 23) };
        let world = World::new(cfg.epoch);
        let mut net = Network::new(cfg).map_err(sim)?;
        let uri: AgentUri = AGENT_URI.parse().map_err(sim)?;
        let cache = KeyCache::new(world.source.clone());
        let mut issued = 0;
        let token = world.issue(&uri, &["workflow/approval"], 0);
        let reg = Registration::new(&uri, vec![Endpoint::https(OLD_ENDPOINT)], Some(token), SimTime::ZERO, net.config().default_ttl_ms);
        net.register(reg, false).map_err(sim)?;
        if refresh {
            issued = 27;
            net.advance_time(27 * DAY_MS);
            let token = world.issue(&uri, &["workflow/approval"], 27);
            let reg = Registration::new(&uri, vec![Endpoint::https(OLD_ENDPOINT)], Some(token), net.now(), net.config().default_ttl_ms);
            net.register(reg, false).map_err(sim)?;
        }
        net.advance_time(migrate_day * DAY_MS - net.now().millis());
        let allowed = migration_allowed(issued * DAY_MS, net.now().millis());
        net.migrate(&uri, vec![Endpoint::https(NEW_ENDPOINT)], net.now()).map_err(sim)?;

        let serving = SimTime((migrate_day + CUTOVER_DAYS) * DAY_MS);
        let rec = net.lookup_exact(uri.trust_root(), uri.capability_path(), serving).records.into_iter().next();
        let at_new = rec.as_ref().is_some_and(|r| r.endpoints[0].url == NEW_ENDPOINT);
        let verified = rec
            .and_then(|r| r.attestation)
            .map(|t| verify_with_cache(&Verifier::default(), &cache, &t, &uri, world.at(serving), None));
        let verified_ok = matches!(verified, Some(Ok(_)));
        // the rule predicts the outcome: violating it is what breaks service
        let ok = at_new && allowed == verified_ok;
        record(
            &mut out,
            &format!("expiry+migration: {name}"),
            net.now(),
            ok,
            json!({
                "migration_allowed_by_rule": allowed,
                "ttl_remaining_at_migration": remaining_fraction(issued * DAY_MS, migrate_day * DAY_MS),
                "record_points_to_new_endpoint": at_new,
                "verification_at_new_endpoint": verified.as_ref().map(outcome),
                "flagged": !allowed,
            }),
        );
    }
    Ok(out)
}
