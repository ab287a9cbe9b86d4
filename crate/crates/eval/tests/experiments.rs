use agenturi_eval::corpus::{collision_corpus, sample_corpus, ToolCorpusEntry};
use agenturi_eval::discovery::{
    calibrate_depth_weights, generate_population, ground_truth_sizes, run_ablation_global, run_discovery_experiment, run_drift_sweep,
    DiscoveryConfig, CALIBRATED_DEPTH_WEIGHTS, TARGET_SIZE_RATIO,
};
use agenturi_eval::expressiveness::{map_corpus, map_corpus_flat, map_entry};
use agenturi_eval::hops::{fit_log2, run_hopcount_experiment, HopConfig};
use agenturi_eval::walkthrough::{run_walkthrough, AGENT_URI, NEW_ENDPOINT};
use agenturi_eval::{EvalError, Execution};
use agenturi_sim::NetworkConfig;

fn small(agents: usize, categories: usize, queries: usize) -> DiscoveryConfig {
    DiscoveryConfig { agent_count: agents, category_count: categories, query_count: queries, ..DiscoveryConfig::default() }
}

fn net(seed: u64) -> NetworkConfig {
    NetworkConfig::with_nodes(200, seed)
}

#[test]
fn tool_names_map_under_their_category() {
    let e = ToolCorpusEntry { framework: "LangChain".into(), category: "Web Search".into(), tool_name: "DuckDuckGo_Search".into() };
    assert_eq!(map_entry(&e).unwrap().canonical(), "web-search/duckduckgo-search");
    let (paths, report) = map_corpus(&sample_corpus()).unwrap();
    assert!(paths.iter().all(Option::is_some));
    assert_eq!((report.coverage, report.collisions, report.depth_max), (1.0, 0, 2));
    assert_eq!(report.depth_mean, 2.0);
}

#[test]
fn flat_namespace_collides_where_hierarchy_does_not() {
    let c = collision_corpus();
    assert_eq!(map_corpus(&c).unwrap().1.collisions, 0);
    let flat = map_corpus_flat(&c).unwrap();
    assert!(flat.collisions >= 1);
    assert!(flat.colliding_paths.contains_key("search"));
}

#[test]
fn empty_corpus_is_an_error() {
    assert!(matches!(map_corpus(&[]), Err(EvalError::EmptyCorpus)));
}

#[test]
fn single_agent_is_always_found() {
    let cfg = small(1, 1, 20);
    let r = run_discovery_experiment(&cfg, &NetworkConfig::with_nodes(5, 1)).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    assert_eq!(r.size_ratio, 1.0);
}

#[test]
fn scoped_discovery_matches_ground_truth_exactly() {
    let cfg = DiscoveryConfig { trust_root_count: 3, ..small(1500, 10, 300) };
    let r = run_discovery_experiment(&cfg, &net(4)).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    assert_eq!((r.precision_variance, r.recall_variance), (0.0, 0.0));
    assert!(r.per_query_records.iter().all(|q| q.cross_root == 0 && q.off_path == 0));
}

#[test]
fn unregistered_queries_return_nothing() {
    let cfg = DiscoveryConfig { unregistered_query_fraction: 1.0, ..small(300, 5, 50) };
    let r = run_discovery_experiment(&cfg, &net(5)).unwrap();
    assert!(r.per_query_records.iter().all(|q| q.returned == 0 && q.relevant == 0));
    assert_eq!(r.precision, 1.0);
}

#[test]
fn global_keys_leak_other_roots() {
    let cfg = DiscoveryConfig { trust_root_count: 3, ..small(1500, 10, 300) };
    let a = run_ablation_global(&cfg, &net(6)).unwrap();
    assert!(a.scoped_ground_truth.precision < 1.0);
    assert_eq!(a.false_positives, a.cross_root_false_positives);
    assert!(a.false_positives > 0);
    assert!(a.result_inflation > 2.0);
    assert!(a.illusory_recall >= a.scoped_ground_truth.recall);
}

#[test]
fn global_keys_are_harmless_with_one_root() {
    let a = run_ablation_global(&small(800, 8, 200), &net(7)).unwrap();
    assert_eq!(a.false_positives, 0);
    assert_eq!(a.scoped_ground_truth.precision, 1.0);
}

#[test]
fn drift_lowers_recall_monotonically() {
    let cfg = small(2000, 20, 400);
    let pts = run_drift_sweep(&cfg, &net(8), &[0.0, 0.1, 0.25, 0.5, 1.0]).unwrap();
    assert_eq!(pts[0].report.recall, 1.0);
    for w in pts.windows(2) {
        assert!(w[1].report.recall <= w[0].report.recall, "{} -> {}", w[0].report.recall, w[1].report.recall);
    }
    assert!(pts[4].report.recall < 0.1);
    assert_eq!(pts[4].drifted_agents, 2000);
}

#[test]
fn drift_fraction_is_validated() {
    assert!(run_drift_sweep(&small(10, 2, 5), &net(9), &[1.5]).is_err());
    assert!(run_drift_sweep(&small(10, 1, 5), &net(9), &[0.5]).is_err());
}

#[test]
fn experiments_are_reproducible() {
    let cfg = DiscoveryConfig { trust_root_count: 2, ..small(600, 6, 120) };
    let a = run_ablation_global(&cfg, &net(10)).unwrap();
    let b = run_ablation_global(&cfg, &net(10)).unwrap();
    assert_eq!(a, b);
    let seq = run_discovery_experiment(&DiscoveryConfig { execution: Execution::Sequential, ..cfg.clone() }, &net(10)).unwrap();
    let par = run_discovery_experiment(&DiscoveryConfig { execution: Execution::Parallel, ..cfg }, &net(10)).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn population_respects_config() {
    let cfg = DiscoveryConfig { trust_root_count: 4, ..small(400, 7, 10) };
    let agents = generate_population(&cfg).unwrap();
    assert_eq!(agents.len(), 400);
    let roots: std::collections::BTreeSet<_> = agents.iter().map(|a| a.uri.trust_root().to_string()).collect();
    assert_eq!(roots.len(), 4);
    assert!(agents.iter().all(|a| (1..=3).contains(&a.registered.depth())));
    assert!(generate_population(&DiscoveryConfig { depth_weights: [0.0; 3], ..cfg }).is_err());
}

/// Closed form for the default generator: with M agents per category and
/// branching B, a depth-d path is shared by 1 + (M-1) w_d / B^(d-1)
/// agents on average; prefix queries truncate uniformly.
fn analytic_sizes(w: [f64; 3], m: f64, b: f64) -> (f64, f64) {
    let exact: f64 = (0..3).map(|i| w[i] * (1.0 + (m - 1.0) * w[i] / b.powi(i as i32))).sum();
    let under = [m, 1.0 + (m - 1.0) * (w[1] + w[2]) / b, 1.0 + (m - 1.0) * w[2] / (b * b)];
    let prefix = w[0] * under[0] + w[1] * (under[0] + under[1]) / 2.0 + w[2] * (under[0] + under[1] + under[2]) / 3.0;
    (prefix, exact)
}

#[test]
fn simulated_sizes_agree_with_closed_form() {
    let cfg = DiscoveryConfig::default();
    let (ap, ae) = analytic_sizes(cfg.depth_weights, (cfg.agent_count / cfg.category_count) as f64, cfg.branching as f64);
    let seeds = [1u64, 2, 3, 4, 5, 6, 7, 8];
    let (mut p, mut e) = (0.0, 0.0);
    for s in seeds {
        let (sp, se) = ground_truth_sizes(&DiscoveryConfig { seed: s, query_count: 4000, ..cfg.clone() }).unwrap();
        p += sp / seeds.len() as f64;
        e += se / seeds.len() as f64;
    }
    assert!((p - ap).abs() / ap < 0.05, "prefix {p} vs {ap}");
    assert!((e - ae).abs() / ae < 0.05, "exact {e} vs {ae}");
    let r = ap / ae;
    assert!((r - 3.297).abs() < 0.01, "{r}");
    assert!((r - TARGET_SIZE_RATIO).abs() / TARGET_SIZE_RATIO < 0.02);
}

#[test]
fn pinned_weights_are_a_calibration_optimum() {
    // coarse grid over a few seeds: the pin must be among the best points
    let cfg = DiscoveryConfig { query_count: 1000, ..DiscoveryConfig::default() };
    let points = calibrate_depth_weights(&cfg, TARGET_SIZE_RATIO, 20, &[11, 12, 13, 14]).unwrap();
    let rank = points.iter().position(|p| p.depth_weights.iter().zip(CALIBRATED_DEPTH_WEIGHTS).all(|(a, b)| (a - b).abs() < 1e-9)).unwrap();
    assert!(rank < 5, "pinned weights ranked {rank}");
    assert!((points[rank].ratio - TARGET_SIZE_RATIO).abs() / TARGET_SIZE_RATIO < 0.1);
}

#[test]
fn log_fit_recovers_exact_line() {
    let fit = fit_log2(&[(2, 3.0), (8, 7.0), (32, 11.0)]);
    assert!((fit.a - 2.0).abs() < 1e-9 && (fit.b - 1.0).abs() < 1e-9);
    assert!((fit.r_squared - 1.0).abs() < 1e-9);
}

#[test]
fn hop_counts_grow_slowly() {
    let cfg = HopConfig { sizes: vec![64, 512], trials: 6, probes: 5, ..HopConfig::default() };
    let r = run_hopcount_experiment(&cfg).unwrap();
    assert_eq!(r.sizes.len(), 2);
    assert!(r.sizes.iter().all(|s| s.mean >= 1.0 && s.lookups == 30));
    assert!(r.growth_ratio < 10.0);
}

#[test]
fn walkthrough_keeps_uri_and_reaches_new_endpoint() {
    let t = run_walkthrough().unwrap();
    assert!(t.passed, "{t:#?}");
    assert_eq!(t.steps.len(), 8);
    let mig = &t.steps[6].detail;
    assert_eq!(mig["uri_before"], AGENT_URI);
    assert_eq!(mig["uri_after"], AGENT_URI);
    assert_eq!(mig["endpoint"], NEW_ENDPOINT);
    let late = t.compound.iter().find(|s| s.step.contains("without refresh")).unwrap();
    assert_eq!(late.detail["verification_at_new_endpoint"]["error"], "Expired");
    assert_eq!(late.detail["flagged"], true);
}
