use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use agenturi_core::agent_id::RANDOM_MASK;
use agenturi_core::attestation::{
    issue_attestation, parse_key_document, verify_with_cache, well_known_url, AttestationClaims, AttestationError, DirectoryKeySource,
    KeyCache, KeyDocument, VerificationKey, Verifier,
};
use agenturi_core::dht_key::{derive_unscoped_child_index_key, derive_unscoped_key};
use agenturi_core::{derive_child_index_key, derive_key, AgentId, AgentUri, CapabilityPath, IdValidation, ParseError, TrustRoot};
use agenturi_eval::bench::{run_benchmarks, BenchOptions};
use agenturi_eval::corpus::{collision_corpus, load_jsonl, sample_corpus};
use agenturi_eval::discovery::{run_ablation_global, run_discovery_experiment, run_drift_sweep, ExperimentConfig};
use agenturi_eval::expressiveness::{map_corpus, map_corpus_flat};
use agenturi_eval::hops::{run_hopcount_experiment, run_migration_comparison, run_propagation_check, HopConfig};
use agenturi_eval::walkthrough::run_walkthrough;
use agenturi_eval::{tables, EvalError};
use agenturi_sim::scenario::{parse_scenario, run_scenario};
use agenturi_sim::SimError;
use chrono::{DateTime, TimeDelta, Utc};
use ed25519_dalek::SigningKey;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{CliError, Output};

fn parse_error(e: ParseError) -> CliError {
    CliError::invalid(e.name(), "input", e)
}

fn attestation_error(e: AttestationError) -> CliError {
    let class = serde_json::to_value(e.class()).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    CliError::invalid(e.name(), class, e)
}

fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Io(m) => CliError::Io(m),
        other => CliError::Config(other.to_string()),
    }
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::BadConfig(m) => CliError::Config(m),
        other => CliError::invalid(other.name(), "simulation", other),
    }
}

fn parse_time(text: Option<&str>) -> Result<DateTime<Utc>, CliError> {
    match text {
        None => Ok(Utc::now()),
        Some(t) => DateTime::parse_from_rfc3339(t)
            .map(|d| d.with_timezone(&Utc))
            .map_err(|e| CliError::Config(format!("`{t}` is not an RFC 3339 timestamp: {e}"))),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_report(out: Option<&Path>, value: &Value) -> Result<(), CliError> {
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(value).expect("serializable");
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

fn to_json(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn validation(strict: bool) -> IdValidation {
    if strict {
        IdValidation::Strict
    } else {
        IdValidation::Lenient
    }
}

pub fn parse(text: &str, strict: bool) -> Result<Output, CliError> {
    let uri = AgentUri::parse_with(text, validation(strict)).map_err(parse_error)?;
    let id = uri.agent_id();
    let canonical = uri.canonical();
    let json = json!({
        "input": text,
        "trust_root": uri.trust_root().as_str(),
        "capability_path": uri.capability_path().segments(),
        "agent_id": id.to_string(),
        "uuid": id.uuid_string(),
        "uuid_version": id.version(),
        "timestamp_ms": id.unix_millis(),
        "query": uri.query(),
        "fragment": uri.fragment(),
        "canonical": canonical.as_str(),
        "dht_key": derive_key(uri.trust_root(), uri.capability_path()).to_string(),
    });
    let mut human = String::new();
    writeln!(human, "trust root:      {}", uri.trust_root()).ok();
    writeln!(human, "capability path: {}", uri.capability_path().canonical()).ok();
    writeln!(human, "agent id:        {id} (uuid {}, v{}, {} ms)", id.uuid_string(), id.version(), id.unix_millis()).ok();
    if let Some(q) = uri.query() {
        writeln!(human, "query (dropped): {q}").ok();
    }
    if let Some(f) = uri.fragment() {
        writeln!(human, "fragment (dropped): {f}").ok();
    }
    writeln!(human, "canonical:       {canonical}").ok();
    Ok(Output::new(json, human))
}

pub fn canon(uris: &[String], strict: bool) -> Result<Output, CliError> {
    let mut items = Vec::new();
    let mut human = String::new();
    for text in uris {
        let c = AgentUri::parse_with(text, validation(strict)).map_err(parse_error)?.canonical();
        writeln!(human, "{c}").ok();
        items.push(json!({ "input": text, "canonical": c.as_str() }));
    }
    Ok(Output::new(json!({ "uris": items }), human))
}

pub fn id_new(count: usize, seed: Option<u64>, now: Option<&str>) -> Result<Output, CliError> {
    let now = parse_time(now)?;
    let millis = u64::try_from(now.timestamp_millis()).map_err(|_| CliError::Config("time before 1970".into()))?;
    let mut rng: Box<dyn RngCore> = match seed {
        Some(s) => Box::new(ChaCha8Rng::seed_from_u64(s)),
        None => Box::new(rand::thread_rng()),
    };
    let mut ids = Vec::with_capacity(count);
    let mut human = String::new();
    for _ in 0..count {
        let id = AgentId::new(millis, rng.gen::<u128>() & RANDOM_MASK).map_err(parse_error)?;
        writeln!(human, "{id}").ok();
        ids.push(json!({ "agent_id": id.to_string(), "uuid": id.uuid_string(), "timestamp_ms": id.unix_millis() }));
    }
    Ok(Output::new(json!({ "ids": ids }), human))
}

pub fn key_derive(uri: Option<&str>, root: Option<&str>, path: Option<&str>, global: bool) -> Result<Output, CliError> {
    let (root, path) = match uri {
        Some(text) => {
            let u = AgentUri::parse_with(text, IdValidation::Lenient).map_err(parse_error)?;
            (u.trust_root().clone(), u.capability_path().clone())
        }
        None => (
            TrustRoot::parse(root.unwrap_or_default()).map_err(parse_error)?,
            CapabilityPath::parse(path.unwrap_or_default()).map_err(parse_error)?,
        ),
    };
    let (record, child) = if global {
        (derive_unscoped_key(&path).to_string(), derive_unscoped_child_index_key(&path).to_string())
    } else {
        (derive_key(&root, &path).to_string(), derive_child_index_key(&root, &path).to_string())
    };
    let levels: Vec<Value> = path
        .prefixes()
        .map(|p| {
            let key = if global { derive_unscoped_key(&p) } else { derive_key(&root, &p) };
            json!({ "path": p.canonical(), "key": key.to_string() })
        })
        .collect();
    let scheme = if global { "global" } else { "scoped" };
    let mut human = format!("record key:      {record}\nchild-index key: {child}\n");
    if levels.len() > 1 {
        human.push_str("levels:\n");
        for l in &levels {
            writeln!(human, "  {:<40} {}", l["path"].as_str().unwrap_or_default(), l["key"].as_str().unwrap_or_default()).ok();
        }
    }
    let json = json!({
        "trust_root": root.as_str(),
        "capability_path": path.canonical(),
        "scheme": scheme,
        "record_key": record,
        "child_index_key": child,
        "level_keys": levels,
    });
    Ok(Output::new(json, human))
}

fn load_document(dir: &Path, root: &TrustRoot) -> Result<Option<KeyDocument>, CliError> {
    let path = DirectoryKeySource::new(dir).path_for(root);
    if !path.exists() {
        return Ok(None);
    }
    parse_key_document(&read(&path)?).map(Some).map_err(attestation_error)
}

pub fn keygen(
    root: &str,
    kid: &str,
    dir: &Path,
    not_before: Option<&str>,
    valid_days: i64,
    now: Option<&str>,
    seed: Option<u64>,
) -> Result<Output, CliError> {
    let root = TrustRoot::parse(root).map_err(parse_error)?;
    if valid_days <= 0 {
        return Err(CliError::Config("--valid-days must be positive".into()));
    }
    let now = parse_time(now)?;
    let not_before = match not_before {
        Some(t) => parse_time(Some(t))?,
        None => now,
    };
    let not_after = not_before + TimeDelta::days(valid_days);
    let mut secret = [0u8; 32];
    match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s).fill_bytes(&mut secret),
        None => rand::thread_rng().fill_bytes(&mut secret),
    }
    let signing = SigningKey::from_bytes(&secret);
    let key = VerificationKey::new(kid, signing.verifying_key(), not_before, not_after).map_err(attestation_error)?;

    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let secret_path = dir.join(format!("{kid}.secret"));
    if secret_path.exists() {
        return Err(CliError::Config(format!("{} already exists", secret_path.display())));
    }
    let doc = match load_document(dir, &root)? {
        Some(mut doc) => {
            doc.add_key(key).map_err(attestation_error)?;
            doc
        }
        None => KeyDocument::new(root.clone(), vec![key], vec![]).map_err(attestation_error)?,
    };
    let doc_path = DirectoryKeySource::new(dir).path_for(&root);
    fs::write(&doc_path, doc.to_json() + "\n").map_err(|e| CliError::io(&doc_path, e))?;
    write_secret(&secret_path, &hex::encode(secret))?;

    let json = json!({
        "trust_root": root.as_str(),
        "kid": kid,
        "public_key_hex": hex::encode(signing.verifying_key().as_bytes()),
        "not_before": not_before,
        "not_after": not_after,
        "document_path": doc_path,
        "secret_key_path": secret_path,
        "keys_in_document": doc.keys().len(),
        "well_known_url": well_known_url(&root),
    });
    let human = format!(
        "key `{kid}` for {root}, valid {not_before} to {not_after}\ndocument: {} ({} keys; publish at {})\nsecret:   {}\n",
        doc_path.display(),
        doc.keys().len(),
        well_known_url(&root),
        secret_path.display()
    );
    Ok(Output::new(json, human))
}

fn write_secret(path: &Path, text: &str) -> Result<(), CliError> {
    #[cfg(unix)]
    {
        use std::io::Write;
        use std::os::unix::fs::OpenOptionsExt;
        let mut f = fs::OpenOptions::new().write(true).create_new(true).mode(0o600).open(path).map_err(|e| CliError::io(path, e))?;
        writeln!(f, "{text}").map_err(|e| CliError::io(path, e))
    }
    #[cfg(not(unix))]
    {
        fs::write(path, format!("{text}\n")).map_err(|e| CliError::io(path, e))
    }
}

fn read_secret(path: &Path) -> Result<SigningKey, CliError> {
    let text = read(path)?;
    let bytes: [u8; 32] = hex::decode(text.trim())
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| CliError::Config(format!("{}: expected 64 hex characters", path.display())))?;
    Ok(SigningKey::from_bytes(&bytes))
}

pub struct IssueInput {
    pub claims: Option<PathBuf>,
    pub uri: Option<String>,
    pub capabilities: Vec<String>,
    pub aud: Option<String>,
    pub valid_days: Option<i64>,
    pub now: Option<String>,
    pub secret_key: PathBuf,
    pub kid: String,
}

pub fn attest_issue(input: IssueInput) -> Result<Output, CliError> {
    let claims: AttestationClaims = match (&input.claims, &input.uri) {
        (Some(path), _) => serde_json::from_str(&read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        (None, Some(uri)) => {
            let uri = AgentUri::parse_with(uri, IdValidation::Lenient).map_err(parse_error)?;
            let caps = if input.capabilities.is_empty() {
                vec![uri.capability_path().clone()]
            } else {
                input.capabilities.iter().map(|c| CapabilityPath::parse(c)).collect::<Result<_, _>>().map_err(parse_error)?
            };
            let iat = parse_time(input.now.as_deref())?;
            let claims = AttestationClaims::for_agent(&uri, caps, iat, iat + TimeDelta::days(input.valid_days.unwrap_or(30)));
            match &input.aud {
                Some(a) => claims.with_audience(a.clone()),
                None => claims,
            }
        }
        (None, None) => return Err(CliError::Config("either --claims or --uri is required".into())),
    };
    let signing = read_secret(&input.secret_key)?;
    let token = issue_attestation(&claims, &signing, &input.kid).map_err(attestation_error)?;
    Ok(Output::new(json!({ "token": token, "kid": input.kid, "claims": claims }), format!("{token}\n")))
}

pub fn attest_verify(
    token: Option<String>,
    token_file: Option<&Path>,
    uri: &str,
    keys_dir: &Path,
    now: Option<&str>,
    verifier_id: Option<&str>,
) -> Result<Output, CliError> {
    let token = match (token, token_file) {
        (Some(t), _) => t,
        (None, Some(p)) => read(p)?.trim().to_string(),
        (None, None) => return Err(CliError::Config("either --token or --token-file is required".into())),
    };
    if !keys_dir.is_dir() {
        return Err(CliError::io(keys_dir, "not a directory"));
    }
    let uri = AgentUri::parse_with(uri, IdValidation::Lenient).map_err(parse_error)?;
    let now = parse_time(now)?;
    let cache = KeyCache::new(DirectoryKeySource::new(keys_dir));
    let outcome = verify_with_cache(&Verifier::default(), &cache, &token, &uri, now, verifier_id).map_err(attestation_error)?;
    let human = format!(
        "verified with key `{}`\nissuer:       {}\nsubject:      {}\ncapabilities: {}\nvalid:        {} to {}\n",
        outcome.verified_with,
        outcome.claims.iss,
        outcome.claims.sub,
        outcome.claims.capabilities.iter().map(|c| c.canonical()).collect::<Vec<_>>().join(", "),
        outcome.claims.iat,
        outcome.claims.exp,
    );
    Ok(Output::new(json!({ "ok": true, "verified_with": outcome.verified_with, "claims": outcome.claims }), human))
}

pub fn keys_show(dir: &Path, root: &str, now: Option<&str>) -> Result<Output, CliError> {
    let root = TrustRoot::parse(root).map_err(parse_error)?;
    let now = parse_time(now)?;
    let doc = load_document(dir, &root)?.ok_or_else(|| {
        let path = DirectoryKeySource::new(dir).path_for(&root);
        CliError::io(&path, "no key document")
    })?;
    let mut human = format!("{root} (published at {})\n", well_known_url(&root));
    let keys: Vec<Value> = doc
        .keys()
        .iter()
        .map(|k| {
            let status = if doc.is_revoked(&k.kid) || k.revoked {
                "revoked"
            } else if now < k.not_before {
                "pending"
            } else if now > k.not_after {
                "expired"
            } else {
                "active"
            };
            writeln!(human, "  {:<20} {:<8} {} .. {}", k.kid, status, k.not_before, k.not_after).ok();
            json!({
                "kid": k.kid,
                "public_key_hex": hex::encode(k.public_key()),
                "not_before": k.not_before,
                "not_after": k.not_after,
                "status": status,
            })
        })
        .collect();
    if !doc.revoked_kids().is_empty() {
        writeln!(human, "  revoked: {}", doc.revoked_kids().join(", ")).ok();
    }
    let json = json!({
        "trust_root": root.as_str(),
        "well_known_url": well_known_url(&root),
        "keys": keys,
        "revoked_keys": doc.revoked_kids(),
    });
    Ok(Output::new(json, human))
}

pub fn sim_run(path: &Path, out: Option<&Path>) -> Result<Output, CliError> {
    let scenario = parse_scenario(&read(path)?).map_err(sim_error)?;
    let report = run_scenario(&scenario).map_err(sim_error)?;
    let json = to_json(&report);
    write_report(out, &json)?;
    let mut human = String::new();
    for s in &report.steps {
        writeln!(human, "{} step {:>3} {:<14} {}", if s.ok { "ok  " } else { "FAIL" }, s.index, s.op, s.failures.join("; ")).ok();
    }
    writeln!(human, "{}", if report.passed { "scenario passed" } else { "scenario FAILED" }).ok();
    Ok(Output::new(json, human).failed_if(!report.passed))
}

pub fn eval_expressiveness(corpus: Option<&Path>, collisions: Option<&Path>, out: Option<&Path>) -> Result<Output, CliError> {
    let corpus = match corpus {
        Some(p) => load_jsonl(p).map_err(eval_error)?,
        None => sample_corpus(),
    };
    let collisions = match collisions {
        Some(p) => load_jsonl(p).map_err(eval_error)?,
        None => collision_corpus(),
    };
    let hier = map_corpus(&corpus).map_err(eval_error)?.1;
    let flat = map_corpus_flat(&corpus).map_err(eval_error)?;
    let c_hier = map_corpus(&collisions).map_err(eval_error)?.1;
    let c_flat = map_corpus_flat(&collisions).map_err(eval_error)?;
    let json = json!({
        "corpus": { "hierarchical": hier, "flat": flat },
        "collision_corpus": { "hierarchical": c_hier, "flat": c_flat },
    });
    write_report(out, &json)?;
    let human = format!(
        "corpus\n{}\ncollision corpus\n{}",
        tables::expressiveness_table(&hier, &flat),
        tables::expressiveness_table(&c_hier, &c_flat)
    );
    Ok(Output::new(json, human))
}

pub struct DiscoveryInput {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trust_roots: Option<usize>,
}

fn experiment_config(input: &DiscoveryInput) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &input.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = input.seed {
        cfg.discovery.seed = s;
        cfg.network.seed = s;
    }
    if let Some(r) = input.trust_roots {
        cfg.discovery.trust_root_count = r;
    }
    Ok(cfg)
}

fn report_json(report: &impl Serialize, records: bool) -> Value {
    let mut v = to_json(report);
    if !records {
        strip_records(&mut v);
    }
    v
}

fn strip_records(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("per_query_records");
            m.values_mut().for_each(strip_records);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_records),
        _ => {}
    }
}

pub fn eval_discovery(input: &DiscoveryInput, ablation: bool, records: bool, out: Option<&Path>) -> Result<Output, CliError> {
    let cfg = experiment_config(input)?;
    let report = run_discovery_experiment(&cfg.discovery, &cfg.network).map_err(eval_error)?;
    let mut human = format!(
        "{} agents, {} categories, {} trust roots, {} queries, {} nodes\n{}",
        cfg.discovery.agent_count,
        cfg.discovery.category_count,
        cfg.discovery.trust_root_count,
        cfg.discovery.query_count,
        cfg.network.node_count,
        tables::discovery_table(&report)
    );
    let abl = if ablation {
        let a = run_ablation_global(&cfg.discovery, &cfg.network).map_err(eval_error)?;
        write!(human, "\nkey scheme ablation\n{}", tables::ablation_table(&report, &a)).ok();
        Some(report_json(&a, records))
    } else {
        None
    };
    let json = json!({ "config": cfg, "report": report_json(&report, records), "ablation": abl });
    write_report(out, &json)?;
    Ok(Output::new(json, human))
}

pub fn eval_drift(input: &DiscoveryInput, fractions: &[f64], records: bool, out: Option<&Path>) -> Result<Output, CliError> {
    let cfg = experiment_config(input)?;
    let points = run_drift_sweep(&cfg.discovery, &cfg.network, fractions).map_err(eval_error)?;
    let json = json!({ "config": cfg, "points": report_json(&points, records) });
    write_report(out, &json)?;
    Ok(Output::new(json, tables::drift_table(&points)))
}

pub struct HopsInput {
    pub config: Option<PathBuf>,
    pub sizes: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub migration: bool,
    pub propagation: bool,
    pub out: Option<PathBuf>,
}

pub fn eval_hops(input: HopsInput) -> Result<Output, CliError> {
    let mut cfg: HopConfig = match &input.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => HopConfig::default(),
    };
    if let Some(s) = input.sizes {
        cfg.sizes = s;
    }
    if let Some(t) = input.trials {
        cfg.trials = t;
    }
    if let Some(s) = input.seed {
        cfg.network.seed = s;
    }
    let scaling = run_hopcount_experiment(&cfg).map_err(eval_error)?;
    let mut human = tables::scaling_table(&scaling);
    let migration = if input.migration {
        let m = run_migration_comparison(&cfg).map_err(eval_error)?;
        writeln!(
            human,
            "migration at N = {}: fresh {:.2} hops, after {} migrations {:.2} (diff {:.2}); latest endpoint resolved: {}",
            m.n, m.fresh_mean_hops, m.migrations, m.migrated_mean_hops, m.difference, m.resolved_to_latest
        )
        .ok();
        Some(m)
    } else {
        None
    };
    let propagation = if input.propagation {
        let p = run_propagation_check(&cfg).map_err(eval_error)?;
        writeln!(
            human,
            "propagation at N = {}: max {} ms, mean {:.0} ms, bound {} ms; within bound {}/{}; new endpoint only {}/{}",
            p.n, p.max_propagation_ms, p.mean_propagation_ms, p.bound_ms, p.within_bound, p.trials, p.new_endpoint_only, p.trials
        )
        .ok();
        Some(p)
    } else {
        None
    };
    let json = json!({ "config": cfg, "scaling": scaling, "migration": migration, "propagation": propagation });
    write_report(input.out.as_deref(), &json)?;
    Ok(Output::new(json, human))
}

pub fn eval_bench(samples: Option<usize>, iterations: Option<usize>, out: Option<&Path>) -> Result<Output, CliError> {
    let mut opts = BenchOptions::default();
    if let Some(s) = samples {
        opts.samples = s;
    }
    if let Some(i) = iterations {
        opts.iterations_per_sample = i;
    }
    if opts.samples == 0 || opts.iterations_per_sample == 0 {
        return Err(CliError::Config("samples and iterations must be positive".into()));
    }
    let report = run_benchmarks(opts);
    let json = to_json(&report);
    write_report(out, &json)?;
    Ok(Output::new(json, tables::bench_table(&report)).failed_if(!report.all_pass))
}

pub fn walkthrough(out: Option<&Path>) -> Result<Output, CliError> {
    let t = run_walkthrough().map_err(eval_error)?;
    let json = to_json(&t);
    write_report(out, &json)?;
    let mut human = String::new();
    for s in t.steps.iter().chain(&t.compound) {
        writeln!(human, "{} day {:>5.1}  {}", if s.ok { "ok  " } else { "FAIL" }, s.day, s.step).ok();
        writeln!(human, "      {}", s.detail).ok();
    }
    writeln!(human, "{}", if t.passed { "walkthrough passed" } else { "walkthrough FAILED" }).ok();
    Ok(Output::new(json, human).failed_if(!t.passed))
}
