use agenturi_core::{canonicalize, derive_key, AgentUri};
use agenturi_eval::bench::TYPICAL_URI;
use agenturi_eval::discovery::{build_network, evaluate, generate_population, sample_queries, DiscoveryConfig};
use agenturi_eval::hops::{run_hopcount_experiment, HopConfig};
use agenturi_eval::Execution;
use agenturi_sim::NetworkConfig;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn hop_trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("hop_trials");
    g.sample_size(10);
    for (name, execution) in MODES {
        let cfg = HopConfig { sizes: vec![1_000], trials: 16, probes: 10, execution, ..HopConfig::default() };
        g.bench_with_input(BenchmarkId::new(name, 1_000), &cfg, |b, cfg| b.iter(|| run_hopcount_experiment(cfg).unwrap()));
    }
    g.finish();
}

fn discovery_queries(c: &mut Criterion) {
    let cfg = DiscoveryConfig { agent_count: 2_000, category_count: 20, query_count: 400, ..DiscoveryConfig::default() };
    let agents = generate_population(&cfg).unwrap();
    let net = build_network(&agents, &NetworkConfig::with_nodes(500, 3)).unwrap();
    let mut g = c.benchmark_group("discovery_queries");
    g.sample_size(10);
    for (name, execution) in MODES {
        g.bench_function(name, |b| b.iter(|| evaluate(&net, &agents, sample_queries(&cfg, &agents), execution)));
    }
    g.finish();
}

fn uri_ops(c: &mut Criterion) {
    let uri = AgentUri::parse(TYPICAL_URI).unwrap();
    c.bench_function("parse_typical", |b| b.iter(|| AgentUri::parse(black_box(TYPICAL_URI)).unwrap()));
    c.bench_function("canonicalize", |b| b.iter(|| canonicalize(black_box(&uri))));
    c.bench_function("derive_key", |b| b.iter(|| derive_key(black_box(uri.trust_root()), black_box(uri.capability_path()))));
}

criterion_group!(benches, hop_trials, discovery_queries, uri_ops);
criterion_main!(benches);
