use agenturi_core::attestation::{issue_attestation, AttestationClaims, KeyDocument, VerificationKey};
use agenturi_core::{AgentId, AgentUri, CapabilityPath, TrustRoot};
use agenturi_sim::scenario::{parse_scenario, run_scenario};
use agenturi_sim::{Endpoint, KeyScheme, Network, NetworkConfig, NodeBehavior, Registration, SimError, SimTime};
use chrono::TimeDelta;
use ed25519_dalek::SigningKey;
use proptest::prelude::*;

const TTL: u64 = 3_600_000;

fn uri(root: &str, path: &str, n: u64) -> AgentUri {
    let id = AgentId::new(1_750_000_000_000 + n, n as u128 * 0x9e37_79b9).unwrap();
    AgentUri::new(root.parse().unwrap(), path.parse().unwrap(), id).unwrap()
}

fn reg(u: &AgentUri, url: &str, now: SimTime) -> Registration {
    Registration::new(u, vec![Endpoint::https(url)], None, now, TTL)
}

fn root(s: &str) -> TrustRoot {
    s.parse().unwrap()
}

fn path(s: &str) -> CapabilityPath {
    s.parse().unwrap()
}

fn sorted(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v
}

#[test]
fn same_seed_same_network_and_results() {
    let run = || {
        let mut net = Network::new(NetworkConfig::with_nodes(300, 42)).unwrap();
        for i in 0..10 {
            net.register(reg(&uri("acme.com", &format!("c{}/t{i}", i % 3), i), "https://a", SimTime(0)), false).unwrap();
        }
        let results: Vec<_> = (0..3).map(|c| net.lookup_prefix(&root("acme.com"), &path(&format!("c{c}")), SimTime(5))).collect();
        (net.node_ids().to_vec(), results)
    };
    assert_eq!(run(), run());
    let other = Network::new(NetworkConfig::with_nodes(300, 43)).unwrap();
    assert_ne!(other.node_ids(), run().0.as_slice());
}

#[test]
fn single_node_network() {
    let mut net = Network::new(NetworkConfig::with_nodes(1, 0)).unwrap();
    assert_eq!(net.config().k, 1);
    let u = uri("acme.com", "workflow/approval", 1);
    let receipt = net.register(reg(&u, "https://a", SimTime(0)), false).unwrap();
    assert_eq!((receipt.replicas.clone(), receipt.hops, receipt.propagation_ms), (vec![0], 0, 0));
    let r = net.lookup_exact(u.trust_root(), u.capability_path(), SimTime(1));
    assert_eq!((r.records.len(), r.hops), (1, 0));
    let r = net.lookup_prefix(u.trust_root(), &path("workflow"), SimTime(1));
    assert_eq!((r.records.len(), r.hops), (1, 0));
}

#[test]
fn bad_configs_rejected() {
    for cfg in [
        NetworkConfig { node_count: 5, k: 20, ..Default::default() },
        NetworkConfig { k: 0, ..Default::default() },
        NetworkConfig { alpha: 0, ..Default::default() },
    ] {
        assert!(matches!(Network::new(cfg), Err(SimError::BadConfig(_))));
    }
}

#[test]
fn store_then_fetch_and_unregistered_path() {
    let mut net = Network::new(NetworkConfig::with_nodes(500, 1)).unwrap();
    let u = uri("acme.com", "workflow/approval/invoice", 1);
    net.register(reg(&u, "https://agents.acme.com/v1", SimTime(0)), false).unwrap();
    let r = net.lookup_exact(u.trust_root(), u.capability_path(), SimTime(1));
    assert_eq!(r.uris(), [u.canonical().as_str()]);
    assert_eq!(r.records[0].endpoints[0].url, "https://agents.acme.com/v1");

    let miss = net.lookup_exact(u.trust_root(), &path("nothing/here"), SimTime(1));
    assert!(miss.records.is_empty());
    assert!(miss.hops > 0);
}

#[test]
fn replicates_to_k_closest_live_nodes() {
    let mut net = Network::new(NetworkConfig::with_nodes(2000, 5)).unwrap();
    for i in 0..50 {
        let u = uri("acme.com", &format!("p{i}"), i);
        let receipt = net.register(reg(&u, "https://a", SimTime(0)), false).unwrap();
        assert_eq!(receipt.replicas.len(), 20);
        assert_eq!(sorted(receipt.replicas.clone()), sorted(net.closest_live_nodes(&receipt.key.0, 20)));
        assert_eq!(net.holders(&receipt.key), sorted(receipt.replicas));
    }

    // fewer live nodes than k
    let mut net = Network::new(NetworkConfig::with_nodes(30, 5)).unwrap();
    for n in 0..15 {
        net.kill_node(n * 2);
    }
    let receipt = net.register(reg(&uri("acme.com", "x", 1), "https://a", SimTime(0)), false).unwrap();
    assert_eq!(receipt.replicas.len(), 15);
    assert!(receipt.replicas.iter().all(|&n| net.node(n).alive()));

    for n in 0..30 {
        net.kill_node(n);
    }
    assert_eq!(net.register(reg(&uri("acme.com", "x", 2), "https://a", SimTime(0)), false), Err(SimError::NetworkUnavailable));
}

#[test]
fn hops_stay_logarithmic_at_one_thousand_nodes() {
    let mut total = 0;
    let mut count = 0;
    for seed in 0..10 {
        let mut net = Network::new(NetworkConfig::with_nodes(1000, seed)).unwrap();
        for i in 0..10 {
            let u = uri("acme.com", &format!("cat{i}/tool"), i);
            net.register(reg(&u, "https://a", SimTime(0)), false).unwrap();
            let r = net.lookup_exact(u.trust_root(), u.capability_path(), SimTime(1));
            assert_eq!(r.records.len(), 1);
            total += r.hops;
            count += 1;
        }
    }
    let mean = total as f64 / count as f64;
    assert!(mean <= 10.0 && mean <= (1000f64 / 20.0).log2() + 4.0, "mean hops {mean}");
}

#[test]
fn records_expire_at_read_time() {
    let mut net = Network::new(NetworkConfig::with_nodes(100, 2)).unwrap();
    let u = uri("acme.com", "workflow", 1);
    net.register(reg(&u, "https://a", SimTime(0)), false).unwrap();
    let find = |net: &Network| net.lookup_exact(u.trust_root(), u.capability_path(), net.now()).records.len();

    net.advance_time(0);
    assert_eq!(find(&net), 1);
    net.advance_time(TTL - 1);
    assert_eq!(find(&net), 1);
    net.advance_time(1);
    assert_eq!(find(&net), 0);
    // still physically stored without compaction
    assert!(net.node(net.holders(&net.record_key(u.trust_root(), u.capability_path()))[0]).record_count() > 0);

    // heartbeats keep the record discoverable
    let mut net = Network::new(NetworkConfig { compact_on_advance: true, ..NetworkConfig::with_nodes(100, 2) }).unwrap();
    for beat in 0..10 {
        net.register(reg(&u, "https://a", net.now()), false).unwrap();
        net.advance_time(TTL / 2);
        assert_eq!(find(&net), 1, "beat {beat}");
    }
    net.advance_time(TTL);
    assert_eq!(find(&net), 0);
    assert!(net.holders(&net.record_key(u.trust_root(), u.capability_path())).is_empty());
}

#[test]
fn prefix_lookup_walks_descendants() {
    let mut net = Network::new(NetworkConfig::with_nodes(400, 3)).unwrap();
    let a = uri("acme.com", "workflow", 1);
    let b = uri("acme.com", "workflow/approval", 2);
    let c = uri("acme.com", "workflow/approval/invoice", 3);
    let other = uri("acme.com", "workflows/x", 4);
    let foreign = uri("globex.com", "workflow/approval", 5);
    for u in [&a, &b, &c, &other, &foreign] {
        net.register(reg(u, "https://a", SimTime(0)), false).unwrap();
    }
    let acme = root("acme.com");
    let mut want = vec![a.canonical().into_string(), b.canonical().into_string(), c.canonical().into_string()];
    want.sort();
    let r = net.lookup_prefix(&acme, &path("workflow"), SimTime(1));
    assert_eq!(r.uris(), want);

    let leaf = net.lookup_prefix(&acme, c.capability_path(), SimTime(1));
    assert_eq!(leaf.records, net.lookup_exact(&acme, c.capability_path(), SimTime(1)).records);

    let g = net.lookup_prefix(&root("globex.com"), &path("workflow"), SimTime(1));
    assert_eq!(g.uris(), [foreign.canonical().as_str()]);
}

#[test]
fn global_keys_mix_trust_roots() {
    let cfg = NetworkConfig { key_scheme: KeyScheme::Global, ..NetworkConfig::with_nodes(200, 3) };
    let mut net = Network::new(cfg).unwrap();
    net.register(reg(&uri("acme.com", "search/web", 1), "https://a", SimTime(0)), false).unwrap();
    net.register(reg(&uri("globex.com", "search/web", 2), "https://g", SimTime(0)), false).unwrap();
    let r = net.lookup_prefix(&root("acme.com"), &path("search"), SimTime(1));
    assert_eq!(r.records.len(), 2);
}

#[test]
fn migration_keeps_uri_and_replaces_endpoints() {
    let mut net = Network::new(NetworkConfig::with_nodes(1000, 9)).unwrap();
    let u = uri("acme.com", "workflow/approval/invoice", 1);
    net.register(reg(&u, "https://agents.acme.com/v1/approvals", SimTime(0)), false).unwrap();
    net.advance_time(1000);
    let receipt = net.migrate(&u, vec![Endpoint::https("https://agents-new.acme.com/v1/approvals")], net.now()).unwrap();
    assert!(receipt.propagation_ms <= 20 * net.config().rtt.max_ms);
    let r = net.lookup_exact(u.trust_root(), u.capability_path(), SimTime(2000));
    assert_eq!(r.records.len(), 1);
    assert_eq!(r.records[0].agent_uri, u.canonical());
    assert_eq!(r.records[0].endpoints, [Endpoint::https("https://agents-new.acme.com/v1/approvals")]);
    assert_eq!(r.records[0].registered_at, SimTime(1000));
    assert_eq!(r.records[0].expires_at, SimTime(1000 + TTL));

    let ghost = uri("acme.com", "workflow", 99);
    assert!(matches!(net.migrate(&ghost, vec![Endpoint::https("https://x")], SimTime(0)), Err(SimError::NotRegistered(_))));
}

#[test]
fn newest_copy_wins_after_replica_set_shifts() {
    let mut net = Network::new(NetworkConfig::with_nodes(200, 4)).unwrap();
    let u = uri("acme.com", "ops", 1);
    let first = net.register(reg(&u, "https://old", SimTime(0)), false).unwrap();
    // half the old replicas die, migrate lands partly on new nodes, then they return
    for &n in first.replicas.iter().step_by(2) {
        net.kill_node(n);
    }
    net.migrate(&u, vec![Endpoint::https("https://new")], SimTime(10)).unwrap();
    for &n in first.replicas.iter().step_by(2) {
        net.revive_node(n);
    }
    let r = net.lookup_exact(u.trust_root(), u.capability_path(), SimTime(20));
    assert_eq!(r.records[0].endpoints[0].url, "https://new");
}

#[test]
fn partitions_and_heal() {
    let mut net = Network::new(NetworkConfig::with_nodes(400, 6)).unwrap();
    let acme = root("acme.com");
    let u = uri("acme.com", "billing", 1);
    let receipt = net.register(reg(&u, "https://a", SimTime(0)), false).unwrap();
    let (near, far): (Vec<u32>, Vec<u32>) = receipt.replicas.iter().partition(|&&n| n % 2 == 0);
    assert!(!near.is_empty() && !far.is_empty());

    // replicas on both sides: reachable from both
    let tags: Vec<u8> = (0..400).map(|i| (i % 2) as u8).collect();
    net.partition(&tags).unwrap();
    for origin in [near[0], far[0], 10, 11] {
        assert_eq!(net.lookup_exact_from(origin, &acme, u.capability_path(), SimTime(1)).records.len(), 1, "origin {origin}");
    }

    // every replica on the far side: empty from the near side
    let mut tags = vec![0u8; 400];
    for &n in &receipt.replicas {
        tags[n as usize] = 1;
    }
    net.partition(&tags).unwrap();
    let outside = (0..400).find(|n| tags[*n as usize] == 0).unwrap();
    assert!(net.lookup_exact_from(outside, &acme, u.capability_path(), SimTime(1)).records.is_empty());
    assert_eq!(net.lookup_exact_from(receipt.replicas[0], &acme, u.capability_path(), SimTime(1)).records.len(), 1);

    // a registration made during the partition lands on the near side only
    let v = uri("acme.com", "billing/refunds", 2);
    let during = net.register(reg(&v, "https://b", SimTime(2)), false);
    let during = during.unwrap();
    net.heal();
    assert!(net.lookup_exact_from(outside, &acme, u.capability_path(), SimTime(3)).records.len() == 1);
    for key in [receipt.key, during.key] {
        assert_eq!(net.holders(&key), sorted(net.closest_live_nodes(&key.0, 20)));
    }
    let all = net.lookup_prefix(&acme, &path("billing"), SimTime(3));
    assert_eq!(all.records.len(), 2);
}

struct Issuer {
    sk: SigningKey,
    doc: KeyDocument,
}

fn issuer(cfg: &NetworkConfig) -> Issuer {
    let sk = SigningKey::from_bytes(&[7; 32]);
    let key = VerificationKey::new("k1", sk.verifying_key(), cfg.epoch - TimeDelta::days(1), cfg.epoch + TimeDelta::days(365)).unwrap();
    Issuer { doc: KeyDocument::new(root("acme.com"), vec![key], vec![]).unwrap(), sk }
}

fn token(iss: &Issuer, u: &AgentUri, cfg: &NetworkConfig) -> String {
    let claims = AttestationClaims::for_agent(u, vec![u.capability_path().clone()], cfg.epoch, cfg.epoch + TimeDelta::days(30));
    issue_attestation(&claims, &iss.sk, "k1").unwrap()
}

#[test]
fn verified_registration() {
    let cfg = NetworkConfig::with_nodes(200, 8);
    let iss = issuer(&cfg);
    let mut net = Network::new(cfg.clone()).unwrap();
    net.publish_keys(iss.doc.clone());
    let u = uri("acme.com", "workflow/approval", 1);
    let good = token(&iss, &u, &cfg);

    let mut r = reg(&u, "https://a", SimTime(0));
    assert!(matches!(net.register(r.clone(), true), Err(SimError::InvalidRegistration(_))));

    // one flipped character in the signature
    let mut bad = good.clone().into_bytes();
    let at = good.find('.').unwrap() + 40;
    bad[at] = if bad[at] == b'A' { b'B' } else { b'A' };
    r.attestation = Some(String::from_utf8(bad).unwrap());
    match net.register(r.clone(), true) {
        Err(SimError::AttestationRejected(e)) => assert!(matches!(e.name(), "BadSignature" | "MalformedToken")),
        other => panic!("{other:?}"),
    }
    assert!(net.holders(&net.record_key(u.trust_root(), u.capability_path())).is_empty());

    // a token for another agent's path does not vouch for this one
    let other = uri("acme.com", "payments", 2);
    r.attestation = Some(token(&iss, &other, &cfg));
    assert!(matches!(net.register(r.clone(), true), Err(SimError::AttestationRejected(_))));

    r.attestation = Some(good);
    net.register(r, true).unwrap();
    assert_eq!(net.lookup_exact(u.trust_root(), u.capability_path(), SimTime(1)).records.len(), 1);

    // unknown trust root
    let g = uri("globex.com", "workflow", 3);
    let mut r = reg(&g, "https://g", SimTime(0));
    r.attestation = Some(token(&iss, &u, &cfg));
    match net.register(r, true) {
        Err(SimError::AttestationRejected(e)) => assert_eq!(e.name(), "TrustRootUnavailable"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn forged_records_filtered_when_verifying_reads() {
    for verify_on_read in [false, true] {
        let cfg = NetworkConfig { verify_on_read, ..NetworkConfig::with_nodes(200, 8) };
        let iss = issuer(&cfg);
        let mut net = Network::new(cfg.clone()).unwrap();
        net.publish_keys(iss.doc.clone());
        let u = uri("acme.com", "payments", 1);
        let mut r = reg(&u, "https://real", SimTime(0));
        r.attestation = Some(token(&iss, &u, &cfg));
        let receipt = net.register(r, true).unwrap();

        // eclipse: every replica also serves a forged record for the same
        // agent plus an impostor, both pointing at the attacker
        let impostor = uri("acme.com", "payments", 2);
        let forged = vec![reg(&u, "https://evil", SimTime(0)), reg(&impostor, "https://evil", SimTime(0))];
        for &n in &receipt.replicas {
            net.set_node_behavior(n, NodeBehavior::Forge(forged.clone()));
        }
        let got = net.lookup_exact(u.trust_root(), u.capability_path(), SimTime(1));
        let urls: Vec<_> = got.records.iter().map(|r| r.endpoints[0].url.as_str()).collect();
        if verify_on_read {
            assert_eq!(urls, ["https://real"]);
        } else {
            assert!(urls.contains(&"https://evil"));
        }
    }
}

#[test]
fn scenario_runner() {
    let text = r#"{
      "network": {"node_count": 120, "seed": 11, "default_ttl_ms": 10000},
      "time_format": "ticks",
      "steps": [
        {"op": "register", "uri": "agent://Acme.com/workflow/agent_01h455vb4pex5vsknk084sn02q",
         "endpoints": [{"url": "https://agents.acme.com/w", "protocol": "https"}]},
        {"op": "register", "uri": "agent://acme.com/workflow/approval/agent_01h455vb4pex5vsknk084sn02r",
         "endpoints": [{"url": "https://agents.acme.com/a", "protocol": "grpc"}]},
        {"op": "lookup_prefix", "trust_root": "acme.com", "path": "workflow", "expect": {"count": 2, "max_hops": 40}},
        {"op": "migrate", "uri": "agent://acme.com/workflow/agent_01h455vb4pex5vsknk084sn02q",
         "endpoints": [{"url": "https://agents-new.acme.com/w", "protocol": "https"}]},
        {"op": "lookup_exact", "trust_root": "acme.com", "path": "workflow",
         "expect": {"endpoints": ["https://agents-new.acme.com/w"]}},
        {"op": "migrate", "uri": "agent://acme.com/nope/agent_01h455vb4pex5vsknk084sn02q", "endpoints": [], "expect_error": "NotRegistered"},
        {"op": "partition", "split_at": 60},
        {"op": "heal"},
        {"op": "advance", "ms": 10000},
        {"op": "lookup_exact", "trust_root": "acme.com", "path": "workflow/approval", "expect": {"count": 1}}
      ]
    }"#;
    let report = run_scenario(&parse_scenario(text).unwrap()).unwrap();
    assert!(!report.passed);
    let failed: Vec<_> = report.steps.iter().filter(|s| !s.ok).map(|s| s.index).collect();
    assert_eq!(failed, [9], "{report:#?}");
    assert_eq!(report.steps[2].detail["records"].as_array().unwrap().len(), 2);
    assert_eq!(report.steps[4].detail["records"][0]["registered_at"], 0);
    assert_eq!(run_scenario(&parse_scenario(text).unwrap()).unwrap(), report);

    assert!(matches!(parse_scenario(r#"{"network": {}, "steps": [{"op": "fly"}]}"#), Err(SimError::BadConfig(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lookups_are_trust_scoped_and_unexpired(
        seed in any::<u64>(),
        regs in prop::collection::vec((0usize..3, 0usize..3, 0usize..3, 1u64..20_000), 1..25),
        at in 0u64..25_000,
    ) {
        let roots = ["acme.com", "globex.com", "initech.io"];
        let segs = ["search", "search/web", "billing/refund/issue"];
        let mut net = Network::new(NetworkConfig::with_nodes(60, seed)).unwrap();
        for (i, (r, p, _, ttl)) in regs.iter().enumerate() {
            let u = uri(roots[*r], segs[*p], i as u64);
            net.register(Registration::new(&u, vec![Endpoint::https("https://x")], None, SimTime(0), *ttl), false).unwrap();
        }
        for r in roots {
            for q in ["search", "billing", "billing/refund"] {
                let res = net.lookup_prefix(&root(r), &path(q), SimTime(at));
                for rec in &res.records {
                    let u = rec.uri();
                    prop_assert_eq!(u.trust_root().as_str(), r);
                    prop_assert!(u.capability_path().starts_with(&path(q)));
                    prop_assert!(rec.expires_at > SimTime(at));
                }
                let expected = regs.iter().enumerate().filter(|(_, (ri, pi, _, ttl))| {
                    roots[*ri] == r && path(segs[*pi]).starts_with(&path(q)) && *ttl > at
                }).count();
                prop_assert_eq!(res.records.len(), expected);
            }
        }
    }
}
