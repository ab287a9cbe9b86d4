//! Precision/recall of trust-scoped discovery against a synthetic ground
//! truth, plus the global-key ablation and capability drift.

use std::collections::HashMap;

use agenturi_core::agent_id::RANDOM_MASK;
use agenturi_core::{AgentId, AgentUri, CapabilityPath, TrustRoot};
use agenturi_sim::{Endpoint, KeyScheme, Network, NetworkConfig, Registration, SimTime};
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{EvalError, Execution};

/// Millisecond timestamp of the first generated agent id.
const ID_EPOCH_MS: u64 = 1_767_225_600_000;
const QUERY_STREAM: u64 = 0x5155_4552_5953;
const DRIFT_STREAM: u64 = 0x4452_4946_5400;

/// Synthetic population and query workload.
///
/// Agents get trust roots round-robin, a uniform category, and a depth
/// drawn from `depth_weights`. Below the category, each level picks one of
/// `branching` child segments uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub agent_count: usize,
    pub category_count: usize,
    pub query_count: usize,
    pub trust_root_count: usize,
    /// Relative weights of path depths 1, 2 and 3.
    pub depth_weights: [f64; 3],
    pub branching: usize,
    pub prefix_query_fraction: f64,
    /// Share of queries aimed at paths nobody registered.
    pub unregistered_query_fraction: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            agent_count: 10_000,
            category_count: 50,
            query_count: 1_000,
            trust_root_count: 1,
            depth_weights: CALIBRATED_DEPTH_WEIGHTS,
            branching: 4,
            prefix_query_fraction: 0.5,
            unregistered_query_fraction: 0.0,
            seed: 2026,
            execution: Execution::default(),
        }
    }
}

/// Output of [`calibrate_depth_weights`] for the default workload, pinned.
pub const CALIBRATED_DEPTH_WEIGHTS: [f64; 3] = [0.05, 0.85, 0.10];

/// Prefix-to-exact mean result size ratio the generator is calibrated to.
pub const TARGET_SIZE_RATIO: f64 = 128.3 / 39.0;

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::BadConfig(m.to_string()));
        if self.agent_count == 0 || self.category_count == 0 || self.query_count == 0 || self.trust_root_count == 0 {
            return bad("agent_count, category_count, query_count and trust_root_count must be positive");
        }
        if self.branching == 0 {
            return bad("branching must be positive");
        }
        if self.depth_weights.iter().any(|w| !w.is_finite() || *w < 0.0) || self.depth_weights.iter().sum::<f64>() <= 0.0 {
            return bad("depth_weights must be non-negative with a positive sum");
        }
        for (name, f) in [("prefix_query_fraction", self.prefix_query_fraction), ("unregistered_query_fraction", self.unregistered_query_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(EvalError::BadConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// A discovery config together with the network it runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub discovery: DiscoveryConfig,
    pub network: NetworkConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { discovery: DiscoveryConfig::default(), network: NetworkConfig { seed: 2026, ..NetworkConfig::default() } }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub uri: AgentUri,
    /// Where the agent is registered.
    pub registered: CapabilityPath,
    /// What the agent actually does; differs from `registered` after drift.
    pub actual: CapabilityPath,
}

pub fn trust_root_name(i: usize) -> TrustRoot {
    TrustRoot::parse(&format!("org{i:02}.example")).expect("valid root")
}

fn random_path(cfg: &DiscoveryConfig, category: usize, depths: &WeightedIndex<f64>, rng: &mut ChaCha8Rng) -> CapabilityPath {
    let depth = depths.sample(rng) + 1;
    let mut segs = vec![format!("cat{category:02}")];
    if depth >= 2 {
        segs.push(format!("sub{}", rng.gen_range(0..cfg.branching)));
    }
    if depth >= 3 {
        segs.push(format!("leaf{}", rng.gen_range(0..cfg.branching)));
    }
    CapabilityPath::from_segments(segs).expect("generated segments are valid")
}

pub fn generate_population(cfg: &DiscoveryConfig) -> Result<Vec<Agent>, EvalError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let depths = WeightedIndex::new(cfg.depth_weights).map_err(|e| EvalError::BadConfig(e.to_string()))?;
    let roots: Vec<TrustRoot> = (0..cfg.trust_root_count).map(trust_root_name).collect();
    let mut agents = Vec::with_capacity(cfg.agent_count);
    for i in 0..cfg.agent_count {
        let category = rng.gen_range(0..cfg.category_count);
        let path = random_path(cfg, category, &depths, &mut rng);
        let id = AgentId::new(ID_EPOCH_MS + i as u64, rng.gen::<u128>() & RANDOM_MASK).expect("timestamp in range");
        let uri = AgentUri::new(roots[i % roots.len()].clone(), path.clone(), id).expect("generated uri fits");
        agents.push(Agent { uri, registered: path.clone(), actual: path });
    }
    Ok(agents)
}

/// Marks `fraction` of agents as drifted: their actual capability moves to
/// a different category under the same trust root, while the registration
/// stays where it was. Drifted sets are nested across fractions for a
/// fixed seed.
pub fn apply_drift(cfg: &DiscoveryConfig, agents: &mut [Agent], fraction: f64) -> Result<usize, EvalError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(EvalError::BadConfig("drift fraction must lie in [0, 1]".into()));
    }
    let count = (fraction * agents.len() as f64).round() as usize;
    if count > 0 && cfg.category_count < 2 {
        return Err(EvalError::BadConfig("drift needs at least two categories".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DRIFT_STREAM);
    let depths = WeightedIndex::new(cfg.depth_weights).map_err(|e| EvalError::BadConfig(e.to_string()))?;
    let mut order: Vec<usize> = (0..agents.len()).collect();
    order.shuffle(&mut rng);
    // every agent gets a drift target so targets do not depend on `fraction`
    let mut targets = Vec::with_capacity(agents.len());
    for a in agents.iter() {
        let current: usize = a.registered.segments()[0][3..].parse().expect("generated category");
        let category = (current + 1 + rng.gen_range(0..cfg.category_count.max(2) - 1)) % cfg.category_count.max(1);
        targets.push(random_path(cfg, category, &depths, &mut rng));
    }
    for a in agents.iter_mut() {
        a.actual = a.registered.clone();
    }
    for &i in &order[..count] {
        agents[i].actual = targets[i].clone();
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    Exact,
    Prefix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Query {
    pub mode: QueryMode,
    pub trust_root: TrustRoot,
    pub path: CapabilityPath,
}

/// Draws queries from agents' actual capabilities: pick an agent
/// uniformly, then either its full path (exact) or a uniformly chosen
/// prefix of it (prefix).
pub fn sample_queries(cfg: &DiscoveryConfig, agents: &[Agent]) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ QUERY_STREAM);
    (0..cfg.query_count)
        .map(|i| {
            let a = &agents[rng.gen_range(0..agents.len())];
            let mode = if rng.gen_bool(cfg.prefix_query_fraction) { QueryMode::Prefix } else { QueryMode::Exact };
            let path = if rng.gen_bool(cfg.unregistered_query_fraction) {
                CapabilityPath::from_segments(["unregistered".to_string(), format!("q{i}")]).expect("valid")
            } else if mode == QueryMode::Prefix {
                a.actual.ancestor(rng.gen_range(1..=a.actual.depth())).expect("depth in range")
            } else {
                a.actual.clone()
            };
            Query { mode, trust_root: a.uri.trust_root().clone(), path }
        })
        .collect()
}

fn matches(mode: QueryMode, path: &CapabilityPath, query: &CapabilityPath) -> bool {
    match mode {
        QueryMode::Exact => path == query,
        QueryMode::Prefix => path.starts_with(query),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub mode: QueryMode,
    pub trust_root: String,
    pub path: String,
    pub returned: usize,
    pub relevant: usize,
    /// Agents matching the path predicate under any trust root.
    pub relevant_any_root: usize,
    pub true_positives: usize,
    /// Returned records whose trust root differs from the query's.
    pub cross_root: usize,
    /// Returned records failing the path predicate under any root.
    pub off_path: usize,
    pub hops: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeMetrics {
    pub queries: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_result_size: f64,
    pub mean_relevant: f64,
    pub mean_hops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscoveryReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_result_size_prefix: f64,
    pub mean_result_size_exact: f64,
    pub size_ratio: f64,
    /// Population variance of per-query precision (queries returning
    /// something) and recall (queries with relevant agents).
    pub precision_variance: f64,
    pub recall_variance: f64,
    pub prefix: ModeMetrics,
    pub exact: ModeMetrics,
    pub mean_hops: f64,
    pub per_query_records: Vec<QueryRecord>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs.iter().copied());
    mean(xs.iter().map(|x| (x - m) * (x - m)))
}

fn mode_metrics(records: &[&QueryRecord]) -> ModeMetrics {
    let tp: usize = records.iter().map(|r| r.true_positives).sum();
    let returned: usize = records.iter().map(|r| r.returned).sum();
    let relevant: usize = records.iter().map(|r| r.relevant).sum();
    let (p, r) = (ratio(tp, returned), ratio(tp, relevant));
    ModeMetrics {
        queries: records.len(),
        precision: p,
        recall: r,
        f1: f1(p, r),
        mean_result_size: mean(records.iter().map(|q| q.returned as f64)),
        mean_relevant: mean(records.iter().map(|q| q.relevant as f64)),
        mean_hops: mean(records.iter().map(|q| q.hops as f64)),
    }
}

/// Micro-averaged metrics: true positives, returned and relevant counts are
/// summed over queries before dividing.
pub fn summarize(per_query: Vec<QueryRecord>) -> DiscoveryReport {
    let all: Vec<&QueryRecord> = per_query.iter().collect();
    let overall = mode_metrics(&all);
    let prefix = mode_metrics(&all.iter().copied().filter(|q| q.mode == QueryMode::Prefix).collect::<Vec<_>>());
    let exact = mode_metrics(&all.iter().copied().filter(|q| q.mode == QueryMode::Exact).collect::<Vec<_>>());
    let per_p: Vec<f64> = per_query.iter().filter(|q| q.returned > 0).map(|q| ratio(q.true_positives, q.returned)).collect();
    let per_r: Vec<f64> = per_query.iter().filter(|q| q.relevant > 0).map(|q| ratio(q.true_positives, q.relevant)).collect();
    DiscoveryReport {
        precision: overall.precision,
        recall: overall.recall,
        f1: overall.f1,
        mean_result_size_prefix: prefix.mean_result_size,
        mean_result_size_exact: exact.mean_result_size,
        size_ratio: if exact.mean_result_size > 0.0 { prefix.mean_result_size / exact.mean_result_size } else { 0.0 },
        precision_variance: variance(&per_p),
        recall_variance: variance(&per_r),
        prefix,
        exact,
        mean_hops: overall.mean_hops,
        per_query_records: per_query,
    }
}

/// Registers every agent at its registered path.
pub fn build_network(agents: &[Agent], net_cfg: &NetworkConfig) -> Result<Network, EvalError> {
    let mut net = Network::new(net_cfg.clone()).map_err(|e| EvalError::BadConfig(e.to_string()))?;
    let ttl = net_cfg.default_ttl_ms;
    for a in agents {
        let endpoint = Endpoint::https(format!("https://agents.{}/{}", a.uri.trust_root(), a.uri.agent_id()));
        let reg = Registration::new(&a.uri, vec![endpoint], None, SimTime::ZERO, ttl);
        net.register(reg, false).map_err(|e| EvalError::Simulation(e.to_string()))?;
    }
    Ok(net)
}

/// Runs each query against the network and scores it against the agents'
/// actual capabilities under the query's trust root.
pub fn evaluate(net: &Network, agents: &[Agent], queries: Vec<Query>, execution: Execution) -> Vec<QueryRecord> {
    let by_uri: HashMap<String, &Agent> = agents.iter().map(|a| (a.uri.canonical().into_string(), a)).collect();
    execution.map(queries, |q| {
        let res = match q.mode {
            QueryMode::Exact => net.lookup_exact(&q.trust_root, &q.path, SimTime(1)),
            QueryMode::Prefix => net.lookup_prefix(&q.trust_root, &q.path, SimTime(1)),
        };
        let (mut relevant, mut relevant_any_root) = (0, 0);
        for a in agents.iter().filter(|a| matches(q.mode, &a.actual, &q.path)) {
            relevant_any_root += 1;
            if a.uri.trust_root() == &q.trust_root {
                relevant += 1;
            }
        }
        let (mut tp, mut cross_root, mut off_path) = (0, 0, 0);
        for rec in &res.records {
            let agent = by_uri.get(rec.agent_uri.as_str()).copied();
            let uri = rec.uri();
            if uri.trust_root() != &q.trust_root {
                cross_root += 1;
            }
            if !matches(q.mode, uri.capability_path(), &q.path) {
                off_path += 1;
            }
            if let Some(a) = agent {
                if a.uri.trust_root() == &q.trust_root && matches(q.mode, &a.actual, &q.path) {
                    tp += 1;
                }
            }
        }
        QueryRecord {
            mode: q.mode,
            trust_root: q.trust_root.to_string(),
            path: q.path.canonical(),
            returned: res.records.len(),
            relevant,
            relevant_any_root,
            true_positives: tp,
            cross_root,
            off_path,
            hops: res.hops,
        }
    })
}

pub fn run_discovery_experiment(cfg: &DiscoveryConfig, net_cfg: &NetworkConfig) -> Result<DiscoveryReport, EvalError> {
    let agents = generate_population(cfg)?;
    let net = build_network(&agents, net_cfg)?;
    let queries = sample_queries(cfg, &agents);
    Ok(summarize(evaluate(&net, &agents, queries, cfg.execution)))
}

/// Discovery with keys derived from the capability path alone. Ground
/// truth stays trust-scoped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub scoped_ground_truth: DiscoveryReport,
    /// Recall if every root's agents counted as relevant. Looks at least as
    /// good as the scoped run, but only because foreign agents are
    /// returned; not a real improvement.
    pub illusory_recall: f64,
    pub false_positives: usize,
    pub cross_root_false_positives: usize,
    /// Mean records returned per query, relative to the relevant count.
    pub result_inflation: f64,
}

pub fn run_ablation_global(cfg: &DiscoveryConfig, net_cfg: &NetworkConfig) -> Result<AblationReport, EvalError> {
    let net_cfg = NetworkConfig { key_scheme: KeyScheme::Global, ..net_cfg.clone() };
    let agents = generate_population(cfg)?;
    let net = build_network(&agents, &net_cfg)?;
    let records = evaluate(&net, &agents, sample_queries(cfg, &agents), cfg.execution);
    let false_positives = records.iter().map(|q| q.returned - q.true_positives).sum();
    // a returned record is a false positive only by being foreign or off-path
    let cross_root_false_positives = records.iter().map(|q| q.cross_root).sum();
    let path_hits: usize = records.iter().map(|q| q.returned - q.off_path).sum();
    let any_root: usize = records.iter().map(|q| q.relevant_any_root).sum();
    let returned: usize = records.iter().map(|q| q.returned).sum();
    let relevant: usize = records.iter().map(|q| q.relevant).sum();
    Ok(AblationReport {
        illusory_recall: ratio(path_hits, any_root),
        false_positives,
        cross_root_false_positives,
        result_inflation: ratio(returned, relevant),
        scoped_ground_truth: summarize(records),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftPoint {
    pub drift_fraction: f64,
    pub drifted_agents: usize,
    pub report: DiscoveryReport,
}

/// One network, evaluated at each drift fraction. Queries follow the
/// agents' actual capabilities; registrations stay stale.
pub fn run_drift_sweep(cfg: &DiscoveryConfig, net_cfg: &NetworkConfig, fractions: &[f64]) -> Result<Vec<DriftPoint>, EvalError> {
    let mut agents = generate_population(cfg)?;
    let net = build_network(&agents, net_cfg)?;
    let mut out = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let drifted_agents = apply_drift(cfg, &mut agents, f)?;
        let queries = sample_queries(cfg, &agents);
        let report = summarize(evaluate(&net, &agents, queries, cfg.execution));
        out.push(DriftPoint { drift_fraction: f, drifted_agents, report });
    }
    Ok(out)
}

pub fn run_drift_experiment(cfg: &DiscoveryConfig, net_cfg: &NetworkConfig, drift_fraction: f64) -> Result<DiscoveryReport, EvalError> {
    let mut points = run_drift_sweep(cfg, net_cfg, &[drift_fraction])?;
    Ok(points.remove(0).report)
}

/// Mean ground-truth result sizes for prefix and exact queries, computed
/// without a network (under trust scoping the network returns exactly the
/// ground truth, which the discovery experiment checks).
pub fn ground_truth_sizes(cfg: &DiscoveryConfig) -> Result<(f64, f64), EvalError> {
    let agents = generate_population(cfg)?;
    // (root, path) -> (agents at or below, agents exactly at)
    let mut index: HashMap<(String, String), (usize, usize)> = HashMap::new();
    for a in &agents {
        for p in a.actual.prefixes() {
            let e = index.entry((a.uri.trust_root().to_string(), p.canonical())).or_default();
            e.0 += 1;
            if p.depth() == a.actual.depth() {
                e.1 += 1;
            }
        }
    }
    let queries = sample_queries(cfg, &agents);
    let size = |q: &Query| {
        let (under, at) = index.get(&(q.trust_root.to_string(), q.path.canonical())).copied().unwrap_or_default();
        (if q.mode == QueryMode::Prefix { under } else { at }) as f64
    };
    let prefix = mean(queries.iter().filter(|q| q.mode == QueryMode::Prefix).map(size));
    let exact = mean(queries.iter().filter(|q| q.mode == QueryMode::Exact).map(size));
    Ok((prefix, exact))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationPoint {
    pub depth_weights: [f64; 3],
    pub mean_prefix: f64,
    pub mean_exact: f64,
    pub ratio: f64,
}

/// Sweeps depth weights over a grid of step `1/steps` on the simplex,
/// averaging ground-truth sizes over `seeds`, and returns every point,
/// closest ratio to `target` first.
pub fn calibrate_depth_weights(cfg: &DiscoveryConfig, target: f64, steps: usize, seeds: &[u64]) -> Result<Vec<CalibrationPoint>, EvalError> {
    if steps == 0 || seeds.is_empty() {
        return Err(EvalError::BadConfig("calibration needs at least one step and one seed".into()));
    }
    let mut grid = Vec::new();
    for a in 0..=steps {
        for b in 0..=steps - a {
            let w = [a as f64 / steps as f64, b as f64 / steps as f64, (steps - a - b) as f64 / steps as f64];
            grid.push(w);
        }
    }
    let points = cfg.execution.map(grid, |w| {
        let (mut p, mut e) = (0.0, 0.0);
        for &seed in seeds {
            let (sp, se) = ground_truth_sizes(&DiscoveryConfig { depth_weights: w, seed, ..cfg.clone() })?;
            p += sp / seeds.len() as f64;
            e += se / seeds.len() as f64;
        }
        Ok(CalibrationPoint { depth_weights: w, mean_prefix: p, mean_exact: e, ratio: if e > 0.0 { p / e } else { 0.0 } })
    });
    let mut points = points.into_iter().collect::<Result<Vec<_>, _>>()?;
    points.sort_by(|x, y| (x.ratio - target).abs().total_cmp(&(y.ratio - target).abs()));
    Ok(points)
}
