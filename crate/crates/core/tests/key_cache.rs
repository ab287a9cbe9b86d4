use std::sync::Arc;

use agenturi_core::attestation::{
    issue_attestation, verify_with_cache, AttestationClaims, AttestationError, DirectoryKeySource, KeyCache, KeyDocument, KeySource,
    MemoryKeySource, SourceError, VerificationKey, Verifier,
};
use agenturi_core::{AgentUri, TrustRoot};
use chrono::{DateTime, TimeDelta, TimeZone, Utc};
use ed25519_dalek::SigningKey;

fn root() -> TrustRoot {
    "acme.com".parse().unwrap()
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, 1, 0, 0, 0).unwrap()
}

fn doc(keys: &[(&str, &SigningKey)]) -> KeyDocument {
    let keys = keys
        .iter()
        .map(|(kid, sk)| VerificationKey::new(*kid, sk.verifying_key(), t0() - TimeDelta::days(60), t0() + TimeDelta::days(300)).unwrap())
        .collect();
    KeyDocument::new(root(), keys, vec![]).unwrap()
}

#[test]
fn fresh_entry_served_without_source_access() {
    let source = Arc::new(MemoryKeySource::new());
    source.publish(doc(&[]));
    let cache = KeyCache::new(source.clone());
    assert!(!cache.get(&root(), t0()).unwrap().from_cache);
    assert_eq!(source.fetch_count(), 1);
    for s in [1, 100, 299] {
        assert!(cache.get(&root(), t0() + TimeDelta::seconds(s)).unwrap().from_cache);
    }
    assert_eq!(source.fetch_count(), 1);
    cache.get(&root(), t0() + TimeDelta::seconds(300)).unwrap();
    assert_eq!(source.fetch_count(), 2);
}

#[test]
fn outage_behaviour() {
    let source = Arc::new(MemoryKeySource::new());
    source.publish(doc(&[]));
    let cache = KeyCache::new(source.clone());
    cache.get(&root(), t0()).unwrap();
    source.set_available(false);

    // cache still valid: served
    assert!(cache.get(&root(), t0() + TimeDelta::seconds(120)).is_ok());
    // cache expired: unavailable, with a stale copy known
    assert_eq!(
        cache.get(&root(), t0() + TimeDelta::seconds(600)).unwrap_err(),
        AttestationError::TrustRootUnavailable { root: "acme.com".into(), stale_cache: true }
    );
    // never fetched: hard failure
    let cold = KeyCache::new(source.clone());
    assert_eq!(
        cold.get(&root(), t0()).unwrap_err(),
        AttestationError::TrustRootUnavailable { root: "acme.com".into(), stale_cache: false }
    );
    // recovery is automatic
    source.set_available(true);
    assert!(cache.get(&root(), t0() + TimeDelta::seconds(600)).is_ok());
}

#[test]
fn untrusted_roots_are_not_fetched() {
    let source = Arc::new(MemoryKeySource::new());
    source.publish(doc(&[]));
    let cache = KeyCache::new(source.clone()).with_trusted_roots(["globex.com".parse().unwrap()]);
    assert_eq!(cache.get(&root(), t0()).unwrap_err().name(), "UntrustedRoot");
    assert_eq!(source.fetch_count(), 0);
}

#[test]
fn refresh_once_picks_up_rotated_key() {
    let old = SigningKey::from_bytes(&[1; 32]);
    let new = SigningKey::from_bytes(&[2; 32]);
    let source = Arc::new(MemoryKeySource::new());
    source.publish(doc(&[("old", &old)]));
    let cache = KeyCache::new(source.clone());
    cache.get(&root(), t0()).unwrap();

    // trust root publishes a new key while the verifier's cache is fresh
    source.publish(doc(&[("old", &old), ("new", &new)]));
    let agent: AgentUri = "agent://acme.com/workflow/agent_01h455vb4pex5vsknk084sn02q".parse().unwrap();
    let claims = AttestationClaims::for_agent(&agent, vec!["workflow".parse().unwrap()], t0(), t0() + TimeDelta::days(30));
    let token = issue_attestation(&claims, &new, "new").unwrap();

    let now = t0() + TimeDelta::seconds(10);
    let outcome = verify_with_cache(&Verifier::default(), &cache, &token, &agent, now, None).unwrap();
    assert_eq!(outcome.verified_with, "new");
    assert_eq!(source.fetch_count(), 2);

    // a token under a kid that never existed refreshes once then fails
    let bogus = issue_attestation(&claims, &new, "ghost").unwrap();
    let err = verify_with_cache(&Verifier::default(), &cache, &bogus, &agent, now, None).unwrap_err();
    assert_eq!(err.name(), "UnknownKid");
    assert_eq!(source.fetch_count(), 3);
}

#[test]
fn directory_source_reads_named_documents() {
    let dir = tempfile::tempdir().unwrap();
    let sk = SigningKey::from_bytes(&[3; 32]);
    let d = doc(&[("k", &sk)]);
    std::fs::write(dir.path().join("acme.com.agent-keys.json"), d.to_json()).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let source = DirectoryKeySource::new(dir.path());
    assert_eq!(source.fetch(&root()).unwrap(), d);
    assert_eq!(source.trust_roots().unwrap().into_iter().collect::<Vec<_>>(), vec![root()]);
    assert!(matches!(source.fetch(&"globex.com".parse().unwrap()), Err(SourceError::NotFound(_))));

    // a file whose contents name a different trust root is rejected
    std::fs::write(dir.path().join("globex.com.agent-keys.json"), d.to_json()).unwrap();
    assert!(matches!(
        source.fetch(&"globex.com".parse().unwrap()),
        Err(SourceError::Document(AttestationError::MalformedDocument(_)))
    ));
}

#[test]
fn concurrent_readers_see_whole_documents() {
    let source = Arc::new(MemoryKeySource::new());
    let a = SigningKey::from_bytes(&[1; 32]);
    let b = SigningKey::from_bytes(&[2; 32]);
    source.publish(doc(&[("a", &a)]));
    let cache = Arc::new(KeyCache::new(source.clone()).with_ttl(TimeDelta::zero()));
    std::thread::scope(|s| {
        for i in 0..8 {
            let cache = cache.clone();
            let source = source.clone();
            let (a, b) = (a.clone(), b.clone());
            s.spawn(move || {
                for j in 0..200 {
                    if i == 0 && j % 10 == 0 {
                        source.publish(if j % 20 == 0 { doc(&[("a", &a), ("b", &b)]) } else { doc(&[("a", &a)]) });
                    }
                    let d = cache.get(&root(), t0()).unwrap().doc;
                    let kids: Vec<_> = d.keys().iter().map(|k| k.kid.as_str()).collect();
                    assert!(kids == ["a"] || kids == ["a", "b"], "{kids:?}");
                }
            });
        }
    });
}
