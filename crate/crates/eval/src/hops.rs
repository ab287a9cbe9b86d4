//! Lookup hop scaling, migration independence and propagation time.

use agenturi_core::{AgentId, AgentUri, TrustRoot};
use agenturi_sim::{Endpoint, Network, NetworkConfig, Registration};
use serde::{Deserialize, Serialize};

use crate::{EvalError, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HopConfig {
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Probe agents registered and looked up per trial.
    pub probes: usize,
    pub migrations: usize,
    /// Network size for the migration comparison.
    pub migration_size: usize,
    /// Network size for the propagation check.
    pub propagation_size: usize,
    pub network: NetworkConfig,
    pub execution: Execution,
}

impl Default for HopConfig {
    fn default() -> Self {
        HopConfig {
            sizes: vec![100, 1_000, 10_000],
            trials: 100,
            probes: 10,
            migrations: 100,
            migration_size: 10_000,
            propagation_size: 1_000,
            network: NetworkConfig::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeStats {
    pub n: usize,
    pub trials: usize,
    pub lookups: usize,
    pub mean: f64,
    pub p95: f64,
    pub min: u32,
    pub max: u32,
}

/// Least-squares fit of `hops = a * log2(N) + b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub sizes: Vec<SizeStats>,
    pub fit: LogFit,
    /// Mean hops at the largest size over mean hops at the smallest.
    pub growth_ratio: f64,
    pub monotone: bool,
}

fn probe_uri(trial: usize, probe: usize) -> AgentUri {
    let root = TrustRoot::parse("probe.example").expect("valid");
    let path = format!("probe/t{trial}/p{probe}").parse().expect("valid");
    let id = AgentId::new(1_767_225_600_000 + (trial * 1000 + probe) as u64, (trial as u128) << 32 | probe as u128).expect("valid");
    AgentUri::new(root, path, id).expect("valid")
}

fn network(cfg: &NetworkConfig, n: usize, seed: u64) -> Result<Network, EvalError> {
    let k = cfg.k.min(n);
    Network::new(NetworkConfig { node_count: n, k, seed, ..cfg.clone() }).map_err(|e| EvalError::BadConfig(e.to_string()))
}

fn register(net: &mut Network, uri: &AgentUri, url: &str) -> Result<agenturi_sim::StoreReceipt, EvalError> {
    let ttl = net.config().default_ttl_ms;
    let reg = Registration::new(uri, vec![Endpoint::https(url)], None, net.now(), ttl);
    net.register(reg, false).map_err(|e| EvalError::Simulation(e.to_string()))
}

fn percentile(sorted: &[u32], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    // nearest rank
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1] as f64
}

/// Hops of exact lookups for freshly registered probes in one network.
fn trial_hops(cfg: &HopConfig, n: usize, trial: usize) -> Result<Vec<u32>, EvalError> {
    let mut net = network(&cfg.network, n, cfg.network.seed.wrapping_add(trial as u64))?;
    let mut hops = Vec::with_capacity(cfg.probes);
    for p in 0..cfg.probes {
        let uri = probe_uri(trial, p);
        register(&mut net, &uri, "https://probe.example/a")?;
        let r = net.lookup_exact(uri.trust_root(), uri.capability_path(), net.now());
        if r.records.len() != 1 {
            return Err(EvalError::Simulation(format!("probe {p} not found at N={n}, trial {trial}")));
        }
        hops.push(r.hops);
    }
    Ok(hops)
}

pub fn fit_log2(points: &[(usize, f64)]) -> LogFit {
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| *y).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let b = my - a * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (a * x + b)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    LogFit { a, b, residuals, r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 } }
}

pub fn run_hopcount_experiment(cfg: &HopConfig) -> Result<ScalingReport, EvalError> {
    if cfg.sizes.is_empty() || cfg.trials == 0 || cfg.probes == 0 {
        return Err(EvalError::BadConfig("sizes, trials and probes must be non-empty".into()));
    }
    if cfg.sizes.windows(2).any(|w| w[0] >= w[1]) || cfg.sizes[0] == 0 {
        return Err(EvalError::BadConfig("sizes must be positive and strictly ascending".into()));
    }
    let jobs: Vec<(usize, usize)> = cfg.sizes.iter().flat_map(|&n| (0..cfg.trials).map(move |t| (n, t))).collect();
    let results = cfg.execution.map(jobs, |(n, t)| trial_hops(cfg, n, t));
    let mut per_size: Vec<Vec<u32>> = vec![Vec::new(); cfg.sizes.len()];
    for (i, r) in results.into_iter().enumerate() {
        per_size[i / cfg.trials].extend(r?);
    }
    let sizes: Vec<SizeStats> = cfg
        .sizes
        .iter()
        .zip(per_size)
        .map(|(&n, mut hops)| {
            hops.sort_unstable();
            SizeStats {
                n,
                trials: cfg.trials,
                lookups: hops.len(),
                mean: hops.iter().map(|&h| h as f64).sum::<f64>() / hops.len() as f64,
                p95: percentile(&hops, 0.95),
                min: hops[0],
                max: hops[hops.len() - 1],
            }
        })
        .collect();
    let fit = fit_log2(&sizes.iter().map(|s| (s.n, s.mean)).collect::<Vec<_>>());
    let (first, last) = (sizes[0].mean, sizes[sizes.len() - 1].mean);
    Ok(ScalingReport {
        growth_ratio: if first > 0.0 { last / first } else if last == 0.0 { 1.0 } else { f64::INFINITY },
        monotone: sizes.windows(2).all(|w| w[0].mean <= w[1].mean),
        sizes,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MigrationComparison {
    pub n: usize,
    pub trials: usize,
    pub migrations: usize,
    pub fresh_mean_hops: f64,
    pub migrated_mean_hops: f64,
    pub difference: f64,
    /// Every migrated probe resolved to its final endpoint.
    pub resolved_to_latest: bool,
}

/// Per trial, two networks from the same seed: in one the probe is only
/// registered, in the other it is also migrated `migrations` times. The
/// lookup is then measured in both.
pub fn run_migration_comparison(cfg: &HopConfig) -> Result<MigrationComparison, EvalError> {
    if cfg.trials == 0 {
        return Err(EvalError::BadConfig("trials must be positive".into()));
    }
    let n = cfg.migration_size;
    let per_trial = cfg.execution.map((0..cfg.trials).collect(), |t| -> Result<(u32, u32, bool), EvalError> {
        let seed = cfg.network.seed.wrapping_add(t as u64);
        let uri = probe_uri(t, 0);
        let mut fresh = network(&cfg.network, n, seed)?;
        register(&mut fresh, &uri, "https://probe.example/v0")?;
        let fresh_hops = fresh.lookup_exact(uri.trust_root(), uri.capability_path(), fresh.now()).hops;

        let mut moved = network(&cfg.network, n, seed)?;
        register(&mut moved, &uri, "https://probe.example/v0")?;
        for m in 1..=cfg.migrations {
            moved.advance_time(1_000);
            let now = moved.now();
            moved
                .migrate(&uri, vec![Endpoint::https(format!("https://probe.example/v{m}"))], now)
                .map_err(|e| EvalError::Simulation(e.to_string()))?;
        }
        let r = moved.lookup_exact(uri.trust_root(), uri.capability_path(), moved.now());
        let latest = format!("https://probe.example/v{}", cfg.migrations);
        let ok = r.records.len() == 1 && r.records[0].endpoints[0].url == latest;
        Ok((fresh_hops, r.hops, ok))
    });
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mean = |f: fn(&(u32, u32, bool)) -> u32| per_trial.iter().map(|x| f(x) as f64).sum::<f64>() / per_trial.len() as f64;
    let (fresh, migrated) = (mean(|x| x.0), mean(|x| x.1));
    Ok(MigrationComparison {
        n,
        trials: cfg.trials,
        migrations: cfg.migrations,
        fresh_mean_hops: fresh,
        migrated_mean_hops: migrated,
        difference: (migrated - fresh).abs(),
        resolved_to_latest: per_trial.iter().all(|x| x.2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropagationCheck {
    pub n: usize,
    pub trials: usize,
    pub k: usize,
    pub rtt_max_ms: u64,
    pub bound_ms: u64,
    pub max_propagation_ms: u64,
    pub mean_propagation_ms: f64,
    pub within_bound: usize,
    /// Trials in which every replica was updated and lookups saw only the
    /// new endpoint.
    pub new_endpoint_only: usize,
}

pub fn run_propagation_check(cfg: &HopConfig) -> Result<PropagationCheck, EvalError> {
    let n = cfg.propagation_size;
    let k = cfg.network.k.min(n);
    let bound = k as u64 * cfg.network.rtt.max_ms;
    let per_trial = cfg.execution.map((0..cfg.trials).collect(), |t| -> Result<(u64, bool), EvalError> {
        let mut net = network(&cfg.network, n, cfg.network.seed.wrapping_add(t as u64))?;
        let uri = probe_uri(t, 0);
        register(&mut net, &uri, "https://old.example/a")?;
        net.advance_time(1_000);
        let now = net.now();
        let receipt = net
            .migrate(&uri, vec![Endpoint::https("https://new.example/a")], now)
            .map_err(|e| EvalError::Simulation(e.to_string()))?;
        let key = receipt.key;
        let replicas_updated = receipt.replicas.iter().all(|&r| {
            let stored = net.node(r).stored(&key);
            stored.len() == 1 && stored[0].endpoints[0].url == "https://new.example/a"
        });
        let r = net.lookup_exact(uri.trust_root(), uri.capability_path(), now.plus_ms(receipt.propagation_ms));
        let only_new = r.records.iter().all(|rec| rec.endpoints.iter().all(|e| e.url == "https://new.example/a"));
        Ok((receipt.propagation_ms, replicas_updated && only_new && r.records.len() == 1))
    });
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(PropagationCheck {
        n,
        trials: cfg.trials,
        k,
        rtt_max_ms: cfg.network.rtt.max_ms,
        bound_ms: bound,
        max_propagation_ms: per_trial.iter().map(|x| x.0).max().unwrap_or(0),
        mean_propagation_ms: per_trial.iter().map(|x| x.0 as f64).sum::<f64>() / per_trial.len().max(1) as f64,
        within_bound: per_trial.iter().filter(|x| x.0 <= bound).count(),
        new_endpoint_only: per_trial.iter().filter(|x| x.1).count(),
    })
}
